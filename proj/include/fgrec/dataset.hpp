#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgrec/tensor.hpp"

namespace fgrec {

struct Dataset {
    Tensor images; // N x C x H x W, values in [0, 1]
    std::vector<std::uint32_t> labels;
    std::size_t class_count = 0;

    std::size_t size() const { return labels.size(); }
    Tensor image(std::size_t index) const;
};

// Desk-scale stand-in for a large fine-grained corpus: S well-separated
// superclass anchors, F fine classes per superclass offset by delta_fine,
// Gaussian pixel noise on top.
struct SyntheticDatasetSpec {
    std::size_t superclasses = 4;
    std::size_t fine_per_superclass = 5;
    std::size_t train_per_class = 100;
    std::size_t val_per_class = 50;
    std::size_t test_per_class = 50;
    std::size_t channels = 3;
    std::size_t height = 32;
    std::size_t width = 32;
    double delta_fine = 0.08;
    double noise_sigma = 0.20;
    std::uint64_t seed = 1;

    std::size_t class_count() const { return superclasses * fine_per_superclass; }
    void validate() const;
};

struct SyntheticDataset {
    Dataset train, val, test;
    Tensor prototypes; // K x C x H x W noiseless class prototypes
};

// Deterministic given the spec seed. Labels run 0..K-1 grouped per class
// inside each split. The anchor set is resampled until every superclass
// pair is separated by more than delta_fine (RMS), so the fine structure
// never straddles superclasses.
SyntheticDataset generate_dataset(const SyntheticDatasetSpec& spec);

// Binary container: magic "FGFD", u32 version, u32 N/C/H/W, float64 image
// data, u32 labels. Little-endian throughout.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Writes train/val/test containers plus a text manifest into a directory.
void save_dataset_dir(const SyntheticDataset& data, const std::string& dir);

// Loads one split ("train" | "val" | "test") through the manifest.
Dataset load_split(const std::string& dir, const std::string& split);

} // namespace fgrec
