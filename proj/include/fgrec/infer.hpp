#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgrec/checkpoint.hpp"
#include "fgrec/dataset.hpp"
#include "fgrec/logits_io.hpp"

namespace fgrec {

struct TTAConfig {
    std::size_t test_size = 32;
    bool use_resize = true;
    bool use_five_crop = true;
    bool use_hflip = true;
    bool use_rotate = true;
    double rotate_degrees = 15.0;
    // Five crops are taken from a resize to ceil(test_size * this factor).
    double crop_source_scale = 1.15;

    void validate() const;
    std::size_t view_count() const;
};

// Deterministic view list in fixed order: resize, five crops (TL, TR, BL,
// BR, C), horizontal flip of the resize view, rotate +deg, rotate -deg.
std::vector<Tensor> tta_views(const Tensor& image, const TTAConfig& cfg);

// Mean of softmax(predict_logits(view)) over all views; lands on the simplex.
Tensor tta_predict(const Checkpoint& ckpt, const Tensor& image, const TTAConfig& cfg);

// Without TTA: raw margin-free logits per image. With TTA: log of the mean
// TTA probability, so softmax downstream recovers the TTA distribution.
LogitMatrix predict_dataset(const Checkpoint& ckpt, const Dataset& dataset,
                            const TTAConfig* tta, const std::string& model_tag);

enum class EnsembleMethod { logit_sum, vote, stacking };

EnsembleMethod ensemble_method_from_name(const std::string& name);

struct EnsembleMember {
    LogitMatrix matrix;
    double weight = 1.0;
};

struct EnsembleSpec {
    std::vector<EnsembleMember> members;
    EnsembleMethod method = EnsembleMethod::logit_sum;

    void validate() const; // ids/class counts must agree -> MemberMismatch
};

// The competition weighting rule: 1.0 for members below a 0.90 validation
// score, 1.5 for members at or above it.
double score_based_weight(double val_top1);

// argmax_k sum_m w_m * logits_m; ties resolve to the lowest class index.
std::vector<std::size_t> ensemble_logit_sum(const EnsembleSpec& spec);

// Majority over member argmaxes; ties resolve by the highest weighted mean
// softmax probability among tied classes, then the lowest class index.
std::vector<std::size_t> ensemble_vote(const EnsembleSpec& spec);

// Multinomial logistic regression over concatenated member probabilities.
struct StackingModel {
    Tensor weights; // K x (M*K)
    Tensor bias;    // K
    std::size_t member_count = 0;
    std::size_t class_count = 0;
};

// Full-batch gradient descent with an L2 penalty on all meta parameters.
// Stops when the gradient max-norm falls below 1e-6 * (1 + l2), which by
// strong convexity bounds the parameter error by about 1e-6 regardless of
// the penalty size.
StackingModel fit_stacking(const std::vector<LogitMatrix>& member_matrices,
                           const std::vector<std::size_t>& labels, double l2 = 1e-3);

std::vector<std::size_t> ensemble_stacking(const StackingModel& model,
                                           const EnsembleSpec& spec);

double top1_accuracy(const std::vector<std::size_t>& predictions,
                     const std::vector<std::size_t>& labels);

std::size_t argmax_lowest(const double* values, std::size_t count);

} // namespace fgrec
