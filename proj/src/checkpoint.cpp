#include "fgrec/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace fgrec {
namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::vector<char>& bytes) {
    std::uint64_t hash = 0xCBF29CE484222325ull;
    for (char b : bytes) {
        hash ^= static_cast<unsigned char>(b);
        hash *= 0x100000001B3ull;
    }
    return hash;
}

struct Writer {
    std::vector<char> bytes;

    void raw(const void* data, std::size_t n) {
        const char* p = static_cast<const char*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void blob(const std::string& name, const Tensor& t) {
        str(name);
        u32(static_cast<std::uint32_t>(t.ndim()));
        for (std::size_t e : t.shape) u32(static_cast<std::uint32_t>(e));
        raw(t.data.data(), t.data.size() * sizeof(double));
    }
};

struct Reader {
    const std::vector<char>& bytes;
    std::size_t pos = 0;

    void raw(void* out, std::size_t n) {
        if (pos + n > bytes.size()) throw CorruptFile("checkpoint truncated");
        std::memcpy(out, bytes.data() + pos, n);
        pos += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (pos + n > bytes.size()) throw CorruptFile("checkpoint truncated");
        std::string s(bytes.data() + pos, n);
        pos += n;
        return s;
    }
    Tensor blob_body() {
        const std::uint32_t ndim = u32();
        std::vector<std::size_t> shape(ndim);
        for (auto& e : shape) e = u32();
        Tensor t(shape);
        raw(t.data.data(), t.data.size() * sizeof(double));
        return t;
    }
};

std::vector<char> serialize_payload(const Checkpoint& ckpt) {
    Writer w;
    w.u64(ckpt.seed);
    w.str(config_to_json(ckpt.config));
    w.u32(static_cast<std::uint32_t>(ckpt.params.arch.size()));
    for (std::size_t e : ckpt.params.arch) w.u32(static_cast<std::uint32_t>(e));
    w.u32(static_cast<std::uint32_t>(ckpt.params.class_count()));

    const std::size_t layers = ckpt.params.layer_count();
    w.u32(static_cast<std::uint32_t>(2 * layers + 1));
    for (std::size_t l = 0; l < layers; ++l) {
        w.blob("w" + std::to_string(l), ckpt.params.weights[l]);
        w.blob("b" + std::to_string(l), ckpt.params.biases[l]);
    }
    w.blob("head", ckpt.params.class_weights);
    return w.bytes;
}

} // namespace

std::uint64_t checkpoint_digest(const Checkpoint& ckpt) {
    return fnv1a(serialize_payload(ckpt));
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const std::vector<char> payload = serialize_payload(ckpt);
    const std::uint64_t digest = fnv1a(payload);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.write(reinterpret_cast<const char*>(&digest), 8);
    if (!out) throw Error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for reading: " + path);
    std::vector<char> all((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    if (all.size() < 16) throw CorruptFile("checkpoint too short: " + path);
    if (std::memcmp(all.data(), kMagic, 4) != 0)
        throw CorruptFile("bad checkpoint magic in " + path);
    std::uint32_t version;
    std::memcpy(&version, all.data() + 4, 4);
    if (version != kVersion)
        throw VersionUnsupported("checkpoint version " + std::to_string(version));

    std::uint64_t stored_digest;
    std::memcpy(&stored_digest, all.data() + all.size() - 8, 8);
    std::vector<char> payload(all.begin() + 8, all.end() - 8);
    if (fnv1a(payload) != stored_digest)
        throw CorruptFile("checkpoint digest mismatch in " + path);

    Reader r{payload};
    Checkpoint ckpt;
    ckpt.seed = r.u64();
    ckpt.config = config_from_json(r.str());

    const std::uint32_t arch_len = r.u32();
    ckpt.params.arch.resize(arch_len);
    for (auto& e : ckpt.params.arch) e = r.u32();
    const std::uint32_t class_count = r.u32();

    const std::uint32_t blob_count = r.u32();
    const std::size_t layers = arch_len - 1;
    if (blob_count != 2 * layers + 1)
        throw CorruptFile("checkpoint blob count inconsistent with architecture");
    for (std::size_t l = 0; l < layers; ++l) {
        if (r.str() != "w" + std::to_string(l))
            throw CorruptFile("unexpected blob name in checkpoint");
        ckpt.params.weights.push_back(r.blob_body());
        if (r.str() != "b" + std::to_string(l))
            throw CorruptFile("unexpected blob name in checkpoint");
        ckpt.params.biases.push_back(r.blob_body());
    }
    if (r.str() != "head") throw CorruptFile("missing head blob in checkpoint");
    ckpt.params.class_weights = r.blob_body();

    // Shape chain must reproduce the architecture descriptor exactly.
    for (std::size_t l = 0; l < layers; ++l) {
        if (ckpt.params.weights[l].shape !=
            std::vector<std::size_t>{ckpt.params.arch[l + 1], ckpt.params.arch[l]})
            throw CorruptFile("weight blob shape disagrees with architecture");
        if (ckpt.params.biases[l].shape != std::vector<std::size_t>{ckpt.params.arch[l + 1]})
            throw CorruptFile("bias blob shape disagrees with architecture");
    }
    if (ckpt.params.class_weights.shape !=
        std::vector<std::size_t>{class_count, ckpt.params.arch.back()})
        throw CorruptFile("head blob shape disagrees with architecture");
    ckpt.version = version;
    return ckpt;
}

} // namespace fgrec
