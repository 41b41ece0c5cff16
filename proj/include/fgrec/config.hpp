#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fgrec/augment.hpp"
#include "fgrec/losses.hpp"

namespace fgrec {

enum class LossKind { cross_entropy, arcface, combined };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

struct SchedulerConfig {
    double lr_max = 0.005;
    double lr_min = 0.0;
    std::size_t t_max = 30;
};

// Full training/inference recipe. The config-a / config-b presets mirror the
// two-configuration experiment design at desk scale: a trains at 24 with
// cutmix, b trains at 32 and tests at 44; both test bigger than they train.
struct ExperimentConfig {
    std::string config_id = "config-a";
    std::size_t train_size = 24;
    std::size_t test_size = 32;
    std::size_t model_input = 32; // every view is resized here before the MLP
    std::vector<std::size_t> layer_widths = {64, 32}; // hidden widths, last = embed dim
    LossKind loss = LossKind::arcface;
    AugmentConfig augment;
    ArcFaceConfig arc;
    CircleConfig circle;
    // gamma1 defaults to 1/batch_size when unset.
    double gamma0 = 1.0;
    std::optional<double> gamma1;
    KDConfig kd;
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    SchedulerConfig sched;
    std::uint64_t seed = 1;

    CombinedLossConfig combined_config() const;
    void validate() const;
};

// "config-a" / "config-b" return the presets; anything else is read as a
// path to a JSON config file.
ExperimentConfig preset_config_a();
ExperimentConfig preset_config_b();
ExperimentConfig resolve_config(const std::string& id_or_path);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& json_text);

} // namespace fgrec
