#pragma once

#include <cstdint>
#include <string>

#include "fgrec/config.hpp"
#include "fgrec/model.hpp"

namespace fgrec {

// Trained parameters plus the recipe that produced them. Serialized as
// magic "FGCK", version, seed, config JSON snapshot, named float64 blobs,
// and a trailing FNV-1a digest that is validated on load.
struct Checkpoint {
    std::uint32_t version = 1;
    ModelParams params;
    ExperimentConfig config;
    std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Digest over the serialized payload; stable across save/load round trips.
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

} // namespace fgrec
