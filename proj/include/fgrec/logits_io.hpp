#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgrec/tensor.hpp"

namespace fgrec {

// Per-image pre-softmax class scores; the ensemble interchange unit.
struct LogitMatrix {
    std::vector<std::uint64_t> image_ids; // unique, sorted ascending
    std::size_t class_count = 0;
    Tensor logits; // N x K
    std::string model_tag;

    std::size_t size() const { return image_ids.size(); }
    void validate() const;
};

// Delimited text: optional "# model=<tag>" comment, then the header
// image_id,logit_0,...,logit_{K-1}, then one row per id in ascending order.
// Values carry 17 significant digits, so round trips are exact in practice.
void save_logits(const LogitMatrix& matrix, const std::string& path);
LogitMatrix load_logits(const std::string& path);

// Predictions CSV: header image_id,label.
void save_predictions(const std::vector<std::uint64_t>& ids,
                      const std::vector<std::size_t>& predictions,
                      const std::string& path);
std::pair<std::vector<std::uint64_t>, std::vector<std::size_t>>
load_predictions(const std::string& path);

} // namespace fgrec
