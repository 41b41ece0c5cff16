#include "fgrec/logits_io.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fgrec {
namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no,
                             const std::string& why) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + why);
}

} // namespace

void LogitMatrix::validate() const {
    if (logits.ndim() != 2) throw ShapeMismatch("logit matrix must be 2-D");
    if (logits.shape[0] != image_ids.size())
        throw ShapeMismatch("logit row count differs from id count");
    if (logits.shape[1] != class_count)
        throw ShapeMismatch("logit column count differs from class count");
    for (std::size_t i = 1; i < image_ids.size(); ++i)
        if (image_ids[i] <= image_ids[i - 1])
            throw ShapeMismatch("image ids must be unique and sorted ascending");
}

void save_logits(const LogitMatrix& matrix, const std::string& path) {
    matrix.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    if (!matrix.model_tag.empty()) out << "# model=" << matrix.model_tag << "\n";
    out << "image_id";
    for (std::size_t k = 0; k < matrix.class_count; ++k) out << ",logit_" << k;
    out << "\n";
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out << matrix.image_ids[i];
        for (std::size_t k = 0; k < matrix.class_count; ++k)
            out << ',' << format_double(matrix.logits.at2(i, k));
        out << "\n";
    }
    if (!out) throw Error("write failed: " + path);
}

LogitMatrix load_logits(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path);

    LogitMatrix matrix;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find("model=");
            if (eq != std::string::npos) matrix.model_tag = line.substr(eq + 6);
            continue;
        }
        if (!header_seen) {
            const std::vector<std::string> cols = split_csv(line);
            if (cols.empty() || cols[0] != "image_id")
                throw HeaderMismatch(path + ": header must start with image_id");
            for (std::size_t k = 1; k < cols.size(); ++k)
                if (cols[k] != "logit_" + std::to_string(k - 1))
                    throw HeaderMismatch(path + ": expected column logit_" +
                                         std::to_string(k - 1));
            if (cols.size() < 2)
                throw HeaderMismatch(path + ": header lists no logit columns");
            matrix.class_count = cols.size() - 1;
            header_seen = true;
            continue;
        }
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != matrix.class_count + 1)
            parse_fail(path, line_no, "expected " + std::to_string(matrix.class_count + 1) +
                                          " fields, got " + std::to_string(fields.size()));
        std::uint64_t id = 0;
        const auto [idp, idec] =
            std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
        if (idec != std::errc() || idp != fields[0].data() + fields[0].size())
            parse_fail(path, line_no, "bad image id '" + fields[0] + "'");
        matrix.image_ids.push_back(id);
        for (std::size_t k = 1; k < fields.size(); ++k) {
            try {
                std::size_t used = 0;
                const double v = std::stod(fields[k], &used);
                if (used != fields[k].size())
                    parse_fail(path, line_no, "trailing junk in value '" + fields[k] + "'");
                values.push_back(v);
            } catch (const std::invalid_argument&) {
                parse_fail(path, line_no, "bad value '" + fields[k] + "'");
            } catch (const std::out_of_range&) {
                parse_fail(path, line_no, "value out of range '" + fields[k] + "'");
            }
        }
    }
    if (!header_seen) throw HeaderMismatch(path + ": missing header line");
    matrix.logits = Tensor({matrix.image_ids.size(), matrix.class_count}, std::move(values));
    matrix.validate();
    return matrix;
}

void save_predictions(const std::vector<std::uint64_t>& ids,
                      const std::vector<std::size_t>& predictions,
                      const std::string& path) {
    if (ids.size() != predictions.size())
        throw LengthMismatch("prediction count differs from id count");
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "image_id,label\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << predictions[i] << "\n";
    if (!out) throw Error("write failed: " + path);
}

std::pair<std::vector<std::uint64_t>, std::vector<std::size_t>>
load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::uint64_t> ids;
    std::vector<std::size_t> predictions;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "image_id,label")
                throw HeaderMismatch(path + ": expected header image_id,label");
            header_seen = true;
            continue;
        }
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 2) parse_fail(path, line_no, "expected two fields");
        try {
            ids.push_back(std::stoull(fields[0]));
            predictions.push_back(std::stoul(fields[1]));
        } catch (const std::exception&) {
            parse_fail(path, line_no, "bad prediction row");
        }
    }
    if (!header_seen) throw HeaderMismatch(path + ": missing header line");
    return {std::move(ids), std::move(predictions)};
}

} // namespace fgrec
