#include "fgrec/infer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fgrec/augment.hpp"
#include "fgrec/numerics.hpp"
#include "fgrec/train.hpp"

namespace fgrec {
namespace {

Tensor row_of(const Tensor& matrix, std::size_t row) {
    const std::size_t cols = matrix.shape[1];
    Tensor out({cols});
    for (std::size_t k = 0; k < cols; ++k) out[k] = matrix.at2(row, k);
    return out;
}

Tensor batch_views(const std::vector<Tensor>& views, std::size_t model_input) {
    const std::size_t channels = views.front().shape[0];
    Tensor inputs({views.size(), channels, model_input, model_input});
    const std::size_t plane = channels * model_input * model_input;
    for (std::size_t v = 0; v < views.size(); ++v) {
        Tensor resized = views[v];
        if (resized.shape[1] != model_input || resized.shape[2] != model_input)
            resized = resize_bilinear(resized, model_input, model_input);
        resized = centered(std::move(resized));
        std::copy(resized.data.begin(), resized.data.end(),
                  inputs.data.begin() + static_cast<std::ptrdiff_t>(v * plane));
    }
    return inputs;
}

} // namespace

std::size_t argmax_lowest(const double* values, std::size_t count) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < count; ++k)
        if (values[k] > values[best]) best = k;
    return best;
}

void TTAConfig::validate() const {
    if (!(use_resize || use_five_crop || use_hflip || use_rotate))
        throw ConfigInvalid("TTA needs at least one enabled view family");
    if (test_size < 1) throw ConfigInvalid("TTA test size must be >= 1");
    if (crop_source_scale < 1.0)
        throw ConfigInvalid("crop source scale must be >= 1");
}

std::size_t TTAConfig::view_count() const {
    std::size_t n = 0;
    if (use_resize) n += 1;
    if (use_five_crop) n += 5;
    if (use_hflip) n += 1;
    if (use_rotate) n += 2;
    return n;
}

std::vector<Tensor> tta_views(const Tensor& image, const TTAConfig& cfg) {
    cfg.validate();
    std::vector<Tensor> views;
    const Tensor base = resize_bilinear(image, cfg.test_size, cfg.test_size);
    if (cfg.use_resize) views.push_back(base);
    if (cfg.use_five_crop) {
        const auto source_side = static_cast<std::size_t>(
            std::ceil(static_cast<double>(cfg.test_size) * cfg.crop_source_scale));
        const Tensor zoomed = resize_bilinear(image, source_side, source_side);
        for (Tensor& view : five_crop(zoomed, cfg.test_size))
            views.push_back(std::move(view));
    }
    if (cfg.use_hflip) views.push_back(flip_horizontal(base));
    if (cfg.use_rotate) {
        views.push_back(rotate(base, cfg.rotate_degrees, /*fill=*/0.5));
        views.push_back(rotate(base, -cfg.rotate_degrees, /*fill=*/0.5));
    }
    return views;
}

Tensor tta_predict(const Checkpoint& ckpt, const Tensor& image, const TTAConfig& cfg) {
    const std::vector<Tensor> views = tta_views(image, cfg);
    const Tensor inputs = batch_views(views, ckpt.config.model_input);
    const Tensor logits = predict_logits(ckpt.params, inputs, ckpt.config.arc.scale);

    const std::size_t class_count = logits.shape[1];
    Tensor mean({class_count});
    for (std::size_t v = 0; v < views.size(); ++v) {
        const Tensor probs = softmax(row_of(logits, v));
        for (std::size_t k = 0; k < class_count; ++k) mean[k] += probs[k];
    }
    for (double& p : mean.data) p /= static_cast<double>(views.size());
    return mean;
}

LogitMatrix predict_dataset(const Checkpoint& ckpt, const Dataset& dataset,
                            const TTAConfig* tta, const std::string& model_tag) {
    if (dataset.size() > 0 && dataset.class_count != ckpt.params.class_count())
        throw ClassCountMismatch("dataset class count differs from checkpoint");
    if (tta != nullptr && tta->test_size < ckpt.config.train_size)
        std::fprintf(stderr,
                     "warning: TTA test size %zu below the checkpoint's train size %zu\n",
                     tta->test_size, ckpt.config.train_size);

    const std::size_t class_count = ckpt.params.class_count();
    LogitMatrix matrix;
    matrix.class_count = class_count;
    matrix.model_tag = model_tag;
    matrix.logits = Tensor({dataset.size(), class_count});
    for (std::size_t i = 0; i < dataset.size(); ++i)
        matrix.image_ids.push_back(i);

    if (tta == nullptr) {
        const std::size_t batch_size = std::max<std::size_t>(1, ckpt.config.batch_size);
        const std::size_t channels = dataset.size() ? dataset.images.shape[1] : 0;
        for (std::size_t begin = 0; begin < dataset.size(); begin += batch_size) {
            const std::size_t end = std::min(dataset.size(), begin + batch_size);
            Tensor inputs({end - begin, channels, ckpt.config.model_input,
                           ckpt.config.model_input});
            const std::size_t plane =
                channels * ckpt.config.model_input * ckpt.config.model_input;
            for (std::size_t b = 0; b < end - begin; ++b) {
                const Tensor view = centered(inference_input(
                    dataset.image(begin + b), ckpt.config.test_size, ckpt.config.model_input));
                std::copy(view.data.begin(), view.data.end(),
                          inputs.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
            }
            const Tensor logits = predict_logits(ckpt.params, inputs, ckpt.config.arc.scale);
            for (std::size_t b = 0; b < end - begin; ++b)
                for (std::size_t k = 0; k < class_count; ++k)
                    matrix.logits.at2(begin + b, k) = logits.at2(b, k);
        }
    } else {
        TTAConfig cfg = *tta;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            const Tensor probs = tta_predict(ckpt, dataset.image(i), cfg);
            for (std::size_t k = 0; k < class_count; ++k)
                matrix.logits.at2(i, k) = std::log(std::max(probs[k], 1e-300));
        }
    }
    matrix.validate();
    return matrix;
}

EnsembleMethod ensemble_method_from_name(const std::string& name) {
    if (name == "logit_sum") return EnsembleMethod::logit_sum;
    if (name == "vote") return EnsembleMethod::vote;
    if (name == "stacking") return EnsembleMethod::stacking;
    throw ConfigInvalid("unknown ensemble method '" + name +
                        "' (expected logit_sum|vote|stacking)");
}

void EnsembleSpec::validate() const {
    if (members.empty()) throw MemberMismatch("ensemble needs at least one member");
    const LogitMatrix& first = members.front().matrix;
    first.validate();
    for (const EnsembleMember& member : members) {
        if (member.weight <= 0.0) throw MemberMismatch("member weights must be positive");
        member.matrix.validate();
        if (member.matrix.class_count != first.class_count)
            throw MemberMismatch("ensemble members disagree on class count");
        if (member.matrix.image_ids != first.image_ids)
            throw MemberMismatch("ensemble members disagree on image ids");
    }
}

double score_based_weight(double val_top1) { return val_top1 < 0.90 ? 1.0 : 1.5; }

std::vector<std::size_t> ensemble_logit_sum(const EnsembleSpec& spec) {
    spec.validate();
    const std::size_t count = spec.members.front().matrix.size();
    const std::size_t class_count = spec.members.front().matrix.class_count;
    std::vector<std::size_t> predictions(count);
    std::vector<double> combined(class_count);
    for (std::size_t i = 0; i < count; ++i) {
        std::fill(combined.begin(), combined.end(), 0.0);
        for (const EnsembleMember& member : spec.members)
            for (std::size_t k = 0; k < class_count; ++k)
                combined[k] += member.weight * member.matrix.logits.at2(i, k);
        predictions[i] = argmax_lowest(combined.data(), class_count);
    }
    return predictions;
}

std::vector<std::size_t> ensemble_vote(const EnsembleSpec& spec) {
    spec.validate();
    const std::size_t count = spec.members.front().matrix.size();
    const std::size_t class_count = spec.members.front().matrix.class_count;
    std::vector<std::size_t> predictions(count);
    std::vector<std::size_t> votes(class_count);
    std::vector<double> mean_prob(class_count);

    double weight_total = 0.0;
    for (const EnsembleMember& member : spec.members) weight_total += member.weight;

    for (std::size_t i = 0; i < count; ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        std::fill(mean_prob.begin(), mean_prob.end(), 0.0);
        for (const EnsembleMember& member : spec.members) {
            Tensor row({class_count});
            for (std::size_t k = 0; k < class_count; ++k)
                row[k] = member.matrix.logits.at2(i, k);
            votes[argmax_lowest(row.data.data(), class_count)] += 1;
            const Tensor probs = softmax(row);
            for (std::size_t k = 0; k < class_count; ++k)
                mean_prob[k] += member.weight * probs[k] / weight_total;
        }
        const std::size_t top_votes = *std::max_element(votes.begin(), votes.end());
        std::size_t winner = class_count;
        double winner_prob = -1.0;
        for (std::size_t k = 0; k < class_count; ++k) {
            if (votes[k] != top_votes) continue;
            if (mean_prob[k] > winner_prob) {
                winner = k;
                winner_prob = mean_prob[k];
            }
        }
        predictions[i] = winner;
    }
    return predictions;
}

StackingModel fit_stacking(const std::vector<LogitMatrix>& member_matrices,
                           const std::vector<std::size_t>& labels, double l2) {
    if (member_matrices.size() < 2)
        throw MemberMismatch("stacking needs at least two members");
    EnsembleSpec probe;
    for (const LogitMatrix& matrix : member_matrices)
        probe.members.push_back({matrix, 1.0});
    probe.validate();
    const std::size_t count = member_matrices.front().size();
    const std::size_t class_count = member_matrices.front().class_count;
    if (labels.size() != count)
        throw LengthMismatch("stacking label count differs from matrix rows");
    for (std::size_t y : labels)
        if (y >= class_count) throw InvalidLabel("stacking label out of range");

    const std::size_t member_count = member_matrices.size();
    const std::size_t feat_dim = member_count * class_count;

    // Concatenated member probabilities per image.
    Tensor features({count, feat_dim});
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t m = 0; m < member_count; ++m) {
            Tensor row({class_count});
            for (std::size_t k = 0; k < class_count; ++k)
                row[k] = member_matrices[m].logits.at2(i, k);
            const Tensor probs = softmax(row);
            for (std::size_t k = 0; k < class_count; ++k)
                features.at2(i, m * class_count + k) = probs[k];
        }

    bool any_varying = false;
    for (std::size_t j = 0; j < feat_dim && !any_varying; ++j)
        for (std::size_t i = 1; i < count; ++i)
            if (features.at2(i, j) != features.at2(0, j)) {
                any_varying = true;
                break;
            }
    if (!any_varying) throw DegenerateInput("stacking features are all constant");

    StackingModel model;
    model.member_count = member_count;
    model.class_count = class_count;
    model.weights = Tensor({class_count, feat_dim});
    model.bias = Tensor({class_count});

    double mean_sq = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        double sq = 1.0; // bias feature
        for (std::size_t j = 0; j < feat_dim; ++j)
            sq += features.at2(i, j) * features.at2(i, j);
        mean_sq += sq;
    }
    mean_sq /= static_cast<double>(count);
    const double lr = 1.0 / (0.5 * mean_sq + l2);
    const double tol = 1e-6 * (1.0 + l2);
    constexpr int kMaxIters = 5000;

    Tensor grad_w({class_count, feat_dim});
    Tensor grad_b({class_count});
    for (int iter = 0; iter < kMaxIters; ++iter) {
        std::fill(grad_w.data.begin(), grad_w.data.end(), 0.0);
        std::fill(grad_b.data.begin(), grad_b.data.end(), 0.0);
        for (std::size_t i = 0; i < count; ++i) {
            Tensor logits({class_count});
            for (std::size_t k = 0; k < class_count; ++k) {
                double acc = model.bias[k];
                for (std::size_t j = 0; j < feat_dim; ++j)
                    acc += model.weights.at2(k, j) * features.at2(i, j);
                logits[k] = acc;
            }
            const Tensor probs = softmax(logits);
            for (std::size_t k = 0; k < class_count; ++k) {
                const double delta =
                    (probs[k] - (k == labels[i] ? 1.0 : 0.0)) / static_cast<double>(count);
                grad_b[k] += delta;
                for (std::size_t j = 0; j < feat_dim; ++j)
                    grad_w.at2(k, j) += delta * features.at2(i, j);
            }
        }
        double max_grad = 0.0;
        for (std::size_t idx = 0; idx < grad_w.numel(); ++idx) {
            grad_w[idx] += l2 * model.weights[idx];
            max_grad = std::max(max_grad, std::fabs(grad_w[idx]));
        }
        for (std::size_t k = 0; k < class_count; ++k) {
            grad_b[k] += l2 * model.bias[k];
            max_grad = std::max(max_grad, std::fabs(grad_b[k]));
        }
        if (max_grad <= tol) break;
        for (std::size_t idx = 0; idx < grad_w.numel(); ++idx)
            model.weights[idx] -= lr * grad_w[idx];
        for (std::size_t k = 0; k < class_count; ++k) model.bias[k] -= lr * grad_b[k];
    }
    return model;
}

std::vector<std::size_t> ensemble_stacking(const StackingModel& model,
                                           const EnsembleSpec& spec) {
    spec.validate();
    const std::size_t count = spec.members.front().matrix.size();
    const std::size_t class_count = spec.members.front().matrix.class_count;
    if (model.class_count != class_count || model.member_count != spec.members.size())
        throw ShapeMismatch("stacking model does not match the ensemble spec");

    const std::size_t feat_dim = model.member_count * class_count;
    std::vector<std::size_t> predictions(count);
    std::vector<double> features(feat_dim);
    std::vector<double> logits(class_count);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t m = 0; m < model.member_count; ++m) {
            Tensor row({class_count});
            for (std::size_t k = 0; k < class_count; ++k)
                row[k] = spec.members[m].matrix.logits.at2(i, k);
            const Tensor probs = softmax(row);
            for (std::size_t k = 0; k < class_count; ++k)
                features[m * class_count + k] = probs[k];
        }
        for (std::size_t k = 0; k < class_count; ++k) {
            double acc = model.bias[k];
            for (std::size_t j = 0; j < feat_dim; ++j)
                acc += model.weights.at2(k, j) * features[j];
            logits[k] = acc;
        }
        predictions[i] = argmax_lowest(logits.data(), class_count);
    }
    return predictions;
}

double top1_accuracy(const std::vector<std::size_t>& predictions,
                     const std::vector<std::size_t>& labels) {
    if (predictions.size() != labels.size())
        throw LengthMismatch("prediction count differs from label count");
    if (predictions.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

} // namespace fgrec
