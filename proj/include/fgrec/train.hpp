#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgrec/checkpoint.hpp"
#include "fgrec/config.hpp"
#include "fgrec/dataset.hpp"
#include "fgrec/model.hpp"

namespace fgrec {

struct OptimizerState {
    ModelGrads velocity;
    double momentum = 0.9;

    static OptimizerState for_params(const ModelParams& params, double momentum = 0.9);
};

// lr_min + (lr_max - lr_min)/2 * (1 + cos(pi * epoch / T)).
double cosine_lr(std::size_t epoch, const SchedulerConfig& cfg);

// v' = mu*v + g; p' = p - lr*v'.
void sgd_momentum_step(ModelParams& params, const ModelGrads& grads, OptimizerState& state,
                       double lr);

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double lr = 0.0;
    double train_loss = 0.0;
    double train_top1 = 0.0;
    double val_top1 = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

std::string history_to_tsv(const TrainHistory& history);

struct TrainResult {
    Checkpoint checkpoint;
    TrainHistory history;
};

// Full training loop: seeded shuffle, per-image augmentation streams,
// loss per cfg, SGD+momentum at the cosine schedule. Byte-reproducible
// given (cfg, data).
TrainResult train(const ExperimentConfig& cfg, const Dataset& train_set,
                  const Dataset& val_set);

// Teacher-student distillation with the same loop mechanics; the student
// sees distill_objective(student logits, teacher logits, labels). The
// teacher is never modified.
TrainResult distill(const Checkpoint& teacher, const ExperimentConfig& student_cfg,
                    const KDConfig& kd, const Dataset& train_set, const Dataset& val_set);

// Plain test-time view: resize to test_size, then to the model input side.
Tensor inference_input(const Tensor& image, std::size_t test_size, std::size_t model_input);

// Views are augmented in [0, 1] and centered right before the model; without
// this the shared background level dominates every embedding direction.
inline constexpr double kInputCenter = 0.5;

Tensor centered(Tensor view);

// Margin-free top-1 accuracy of a checkpoint over a dataset (no TTA).
double evaluate_top1(const Checkpoint& ckpt, const Dataset& dataset);

} // namespace fgrec
