#include "fgrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fgrec/augment.hpp"
#include "fgrec/rng.hpp"

namespace fgrec {
namespace {

constexpr char kMagic[4] = {'F', 'G', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;

// Anchor and offset patterns are low-frequency random fields: a coarse
// random grid bilinearly upsampled to image size. Crops, flips, and small
// rotations of such fields stay close to the original, the way they do for
// natural images; per-pixel white noise would not survive augmentation.
constexpr std::size_t kAnchorGrid = 4;
constexpr std::size_t kFineGrid = 8;

Tensor smooth_field(Rng& rng, std::size_t channels, std::size_t height,
                    std::size_t width, std::size_t grid, double lo, double hi) {
    Tensor coarse({channels, std::min(grid, height), std::min(grid, width)});
    for (double& v : coarse.data) v = rng.uniform(lo, hi);
    return resize_bilinear(coarse, height, width);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
}

std::uint32_t read_u32(std::istream& in) {
    char buf[4];
    in.read(buf, 4);
    if (!in) throw CorruptFile("dataset file truncated");
    std::uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Root-mean-square pixel distance between two images.
double rms_distance(const Tensor& a, const Tensor& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(a.numel()));
}

} // namespace

Tensor Dataset::image(std::size_t index) const {
    const std::size_t channels = images.shape[1], height = images.shape[2],
                      width = images.shape[3];
    const std::size_t stride = channels * height * width;
    Tensor out({channels, height, width});
    std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(index * stride), stride,
                out.data.begin());
    return out;
}

void SyntheticDatasetSpec::validate() const {
    if (superclasses < 1) throw SpecInvalid("need at least one superclass");
    if (fine_per_superclass < 2)
        throw SpecInvalid("fine-grained structure needs >= 2 classes per superclass");
    if (channels < 1 || height < 1 || width < 1)
        throw SpecInvalid("image dimensions must be positive");
    if (delta_fine <= 0.0) throw SpecInvalid("delta_fine must be positive");
    if (noise_sigma < 0.0) throw SpecInvalid("noise sigma must be >= 0");
    if (train_per_class < 1) throw SpecInvalid("need at least one training image per class");
}

SyntheticDataset generate_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const std::size_t pixel_count = spec.channels * spec.height * spec.width;
    const std::size_t class_count = spec.class_count();

    // Superclass anchors, resampled until pairwise separation clears
    // delta_fine.
    std::vector<Tensor> anchors;
    for (int attempt = 0; attempt < 20; ++attempt) {
        anchors.clear();
        for (std::size_t s = 0; s < spec.superclasses; ++s)
            anchors.push_back(smooth_field(rng, spec.channels, spec.height, spec.width,
                                           kAnchorGrid, 0.25, 0.75));
        double min_sep = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < anchors.size(); ++a)
            for (std::size_t b = a + 1; b < anchors.size(); ++b)
                min_sep = std::min(min_sep, rms_distance(anchors[a], anchors[b]));
        if (spec.superclasses == 1 || min_sep > spec.delta_fine) break;
        if (attempt == 19)
            throw SpecInvalid("could not separate superclass anchors beyond delta_fine");
    }

    SyntheticDataset out;
    out.prototypes = Tensor({class_count, spec.channels, spec.height, spec.width});
    for (std::size_t s = 0; s < spec.superclasses; ++s)
        for (std::size_t f = 0; f < spec.fine_per_superclass; ++f) {
            const std::size_t label = s * spec.fine_per_superclass + f;
            const Tensor offset = smooth_field(rng, spec.channels, spec.height,
                                               spec.width, kFineGrid, -1.0, 1.0);
            for (std::size_t i = 0; i < pixel_count; ++i)
                out.prototypes.data[label * pixel_count + i] =
                    clamp01(anchors[s][i] + spec.delta_fine * offset[i]);
        }

    const auto make_split = [&](std::size_t per_class) {
        Dataset split;
        split.class_count = class_count;
        const std::size_t total = per_class * class_count;
        split.images = Tensor({total, spec.channels, spec.height, spec.width});
        split.labels.reserve(total);
        std::size_t row = 0;
        for (std::size_t label = 0; label < class_count; ++label)
            for (std::size_t n = 0; n < per_class; ++n, ++row) {
                split.labels.push_back(static_cast<std::uint32_t>(label));
                for (std::size_t i = 0; i < pixel_count; ++i)
                    split.images.data[row * pixel_count + i] = clamp01(
                        out.prototypes.data[label * pixel_count + i] +
                        (spec.noise_sigma > 0.0 ? rng.gaussian(0.0, spec.noise_sigma) : 0.0));
            }
        return split;
    };

    out.train = make_split(spec.train_per_class);
    out.val = make_split(spec.val_per_class);
    out.test = make_split(spec.test_per_class);
    return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(dataset.size()));
    write_u32(out, static_cast<std::uint32_t>(dataset.images.shape[1]));
    write_u32(out, static_cast<std::uint32_t>(dataset.images.shape[2]));
    write_u32(out, static_cast<std::uint32_t>(dataset.images.shape[3]));
    out.write(reinterpret_cast<const char*>(dataset.images.data.data()),
              static_cast<std::streamsize>(dataset.images.data.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(dataset.labels.data()),
              static_cast<std::streamsize>(dataset.labels.size() * sizeof(std::uint32_t)));
    if (!out) throw Error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for reading: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CorruptFile("bad dataset magic in " + path);
    const std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw VersionUnsupported("dataset version " + std::to_string(version));
    const std::uint32_t count = read_u32(in);
    const std::uint32_t channels = read_u32(in);
    const std::uint32_t height = read_u32(in);
    const std::uint32_t width = read_u32(in);

    Dataset dataset;
    dataset.images = Tensor({count, channels, height, width});
    in.read(reinterpret_cast<char*>(dataset.images.data.data()),
            static_cast<std::streamsize>(dataset.images.data.size() * sizeof(double)));
    if (!in) throw CorruptFile("dataset image payload truncated in " + path);
    dataset.labels.resize(count);
    in.read(reinterpret_cast<char*>(dataset.labels.data()),
            static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
    if (!in) throw CorruptFile("dataset label payload truncated in " + path);

    std::uint32_t max_label = 0;
    for (std::uint32_t label : dataset.labels) max_label = std::max(max_label, label);
    dataset.class_count = dataset.labels.empty() ? 0 : max_label + 1;
    return dataset;
}

void save_dataset_dir(const SyntheticDataset& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_dataset(data.train, dir + "/train.fgfd");
    save_dataset(data.val, dir + "/val.fgfd");
    save_dataset(data.test, dir + "/test.fgfd");
    std::ofstream manifest(dir + "/manifest.txt");
    manifest << "classes " << data.train.class_count << "\n"
             << "train train.fgfd\n"
             << "val val.fgfd\n"
             << "test test.fgfd\n";
}

Dataset load_split(const std::string& dir, const std::string& split) {
    std::ifstream manifest(dir + "/manifest.txt");
    if (!manifest) throw Error("missing manifest.txt in " + dir);
    std::size_t class_count = 0;
    std::string line;
    std::string file;
    while (std::getline(manifest, line)) {
        std::istringstream row(line);
        std::string key, value;
        row >> key >> value;
        if (key == "classes") class_count = std::stoul(value);
        else if (key == split) file = value;
    }
    if (file.empty()) throw Error("split '" + split + "' not listed in manifest");
    Dataset dataset = load_dataset(dir + "/" + file);
    if (class_count > 0) dataset.class_count = class_count;
    return dataset;
}

} // namespace fgrec
