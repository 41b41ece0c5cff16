#include "fgrec/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fgrec {

using nlohmann::json;

std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::cross_entropy: return "ce";
        case LossKind::arcface: return "arcface";
        case LossKind::combined: return "combined";
    }
    throw ConfigInvalid("unknown loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "ce" || name == "cross_entropy") return LossKind::cross_entropy;
    if (name == "arcface") return LossKind::arcface;
    if (name == "combined") return LossKind::combined;
    throw ConfigInvalid("unknown loss '" + name + "' (expected ce|arcface|combined)");
}

CombinedLossConfig ExperimentConfig::combined_config() const {
    CombinedLossConfig cfg;
    cfg.gamma0 = gamma0;
    cfg.gamma1 = gamma1.value_or(1.0 / static_cast<double>(batch_size));
    cfg.arc = arc;
    cfg.circle = circle;
    return cfg;
}

void ExperimentConfig::validate() const {
    if (train_size < 1 || test_size < 1 || model_input < 1)
        throw ConfigInvalid("image sizes must be positive");
    if (layer_widths.empty()) throw ConfigInvalid("need at least one hidden layer width");
    if (batch_size < 1) throw ConfigInvalid("batch size must be >= 1");
    if (sched.lr_max < sched.lr_min || sched.lr_min < 0.0)
        throw ConfigInvalid("scheduler requires lr_max >= lr_min >= 0");
    if (sched.t_max < 1) throw ConfigInvalid("scheduler T must be >= 1");
    if (gamma0 < 0.0 || gamma1.value_or(0.0) < 0.0)
        throw ConfigInvalid("loss weights must be non-negative");
    augment.validate();
}

ExperimentConfig preset_config_a() {
    ExperimentConfig cfg;
    cfg.config_id = "config-a";
    cfg.train_size = 24;
    cfg.test_size = 32;
    cfg.loss = LossKind::arcface;
    cfg.augment.cutmix_enabled = true;
    return cfg;
}

ExperimentConfig preset_config_b() {
    ExperimentConfig cfg;
    cfg.config_id = "config-b";
    cfg.train_size = 32;
    cfg.test_size = 44;
    cfg.loss = LossKind::combined;
    cfg.augment.cutmix_enabled = false;
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["config_id"] = cfg.config_id;
    j["train_size"] = cfg.train_size;
    j["test_size"] = cfg.test_size;
    j["model_input"] = cfg.model_input;
    j["layer_widths"] = cfg.layer_widths;
    j["loss"] = loss_kind_name(cfg.loss);
    j["augment"] = {{"crop_scale_lo", cfg.augment.crop_scale_lo},
                    {"crop_scale_hi", cfg.augment.crop_scale_hi},
                    {"flip_prob", cfg.augment.flip_prob},
                    {"max_rotate_deg", cfg.augment.max_rotate_deg},
                    {"jitter_strength", cfg.augment.jitter_strength},
                    {"cutmix_enabled", cfg.augment.cutmix_enabled},
                    {"cutmix_alpha", cfg.augment.cutmix_alpha}};
    j["arcface"] = {{"margin", cfg.arc.margin}, {"scale", cfg.arc.scale}};
    j["circle"] = {{"margin", cfg.circle.margin}, {"gamma", cfg.circle.gamma}};
    j["gamma0"] = cfg.gamma0;
    if (cfg.gamma1) j["gamma1"] = *cfg.gamma1;
    j["kd"] = {{"temperature", cfg.kd.temperature},
               {"kd_weight", cfg.kd.kd_weight},
               {"ce_weight", cfg.kd.ce_weight}};
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["scheduler"] = {{"lr_max", cfg.sched.lr_max},
                      {"lr_min", cfg.sched.lr_min},
                      {"t_max", cfg.sched.t_max}};
    j["seed"] = cfg.seed;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& err) {
        throw ConfigInvalid(std::string("config JSON parse error: ") + err.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.config_id = j.value("config_id", cfg.config_id);
        cfg.train_size = j.value("train_size", cfg.train_size);
        cfg.test_size = j.value("test_size", cfg.test_size);
        cfg.model_input = j.value("model_input", cfg.model_input);
        if (j.contains("layer_widths"))
            cfg.layer_widths = j["layer_widths"].get<std::vector<std::size_t>>();
        if (j.contains("loss")) cfg.loss = loss_kind_from_name(j["loss"].get<std::string>());
        if (j.contains("augment")) {
            const json& a = j["augment"];
            cfg.augment.crop_scale_lo = a.value("crop_scale_lo", cfg.augment.crop_scale_lo);
            cfg.augment.crop_scale_hi = a.value("crop_scale_hi", cfg.augment.crop_scale_hi);
            cfg.augment.flip_prob = a.value("flip_prob", cfg.augment.flip_prob);
            cfg.augment.max_rotate_deg = a.value("max_rotate_deg", cfg.augment.max_rotate_deg);
            cfg.augment.jitter_strength =
                a.value("jitter_strength", cfg.augment.jitter_strength);
            cfg.augment.cutmix_enabled = a.value("cutmix_enabled", cfg.augment.cutmix_enabled);
            cfg.augment.cutmix_alpha = a.value("cutmix_alpha", cfg.augment.cutmix_alpha);
        }
        if (j.contains("arcface")) {
            cfg.arc.margin = j["arcface"].value("margin", cfg.arc.margin);
            cfg.arc.scale = j["arcface"].value("scale", cfg.arc.scale);
        }
        if (j.contains("circle")) {
            cfg.circle.margin = j["circle"].value("margin", cfg.circle.margin);
            cfg.circle.gamma = j["circle"].value("gamma", cfg.circle.gamma);
        }
        cfg.gamma0 = j.value("gamma0", cfg.gamma0);
        if (j.contains("gamma1") && !j["gamma1"].is_null())
            cfg.gamma1 = j["gamma1"].get<double>();
        if (j.contains("kd")) {
            cfg.kd.temperature = j["kd"].value("temperature", cfg.kd.temperature);
            cfg.kd.kd_weight = j["kd"].value("kd_weight", cfg.kd.kd_weight);
            cfg.kd.ce_weight = j["kd"].value("ce_weight", cfg.kd.ce_weight);
        }
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.epochs = j.value("epochs", cfg.epochs);
        if (j.contains("scheduler")) {
            cfg.sched.lr_max = j["scheduler"].value("lr_max", cfg.sched.lr_max);
            cfg.sched.lr_min = j["scheduler"].value("lr_min", cfg.sched.lr_min);
            cfg.sched.t_max = j["scheduler"].value("t_max", cfg.sched.t_max);
        }
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& err) {
        throw ConfigInvalid(std::string("config JSON field error: ") + err.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig resolve_config(const std::string& id_or_path) {
    if (id_or_path == "config-a") return preset_config_a();
    if (id_or_path == "config-b") return preset_config_b();
    std::ifstream in(id_or_path);
    if (!in) throw ConfigInvalid("config '" + id_or_path +
                                 "' is neither a preset nor a readable file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json(buffer.str());
}

} // namespace fgrec
