#include "fgrec/train.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "fgrec/augment.hpp"
#include "fgrec/losses.hpp"
#include "fgrec/numerics.hpp"
#include "fgrec/rng.hpp"

namespace fgrec {
namespace {

std::size_t argmax_row(const Tensor& matrix, std::size_t row) {
    const std::size_t cols = matrix.shape[1];
    std::size_t best = 0;
    for (std::size_t k = 1; k < cols; ++k)
        if (matrix.at2(row, k) > matrix.at2(row, best)) best = k;
    return best;
}

void add_scaled(Tensor& into, const Tensor& from, double factor) {
    for (std::size_t i = 0; i < into.numel(); ++i) into[i] += factor * from[i];
}

struct PreparedBatch {
    Tensor inputs;                     // B x C x mi x mi
    Tensor soft_labels;                // B x K
    std::vector<std::size_t> labels;   // original hard labels
    std::vector<std::size_t> partners; // cutmix partner labels (empty if unused)
    std::vector<double> lambdas;       // cutmix survival weight per row
    bool mixed = false;

    std::size_t dominant_label(std::size_t row) const {
        if (!mixed) return labels[row];
        return lambdas[row] >= 0.5 ? labels[row] : partners[row];
    }
};

// One augmented, optionally cutmixed batch. Every image consumes its own
// derived RNG stream so batch composition never bleeds across images.
PreparedBatch prepare_batch(const Dataset& data, const std::vector<std::size_t>& order,
                            std::size_t begin, std::size_t end,
                            const ExperimentConfig& cfg, const Rng& epoch_rng) {
    const std::size_t batch = end - begin;
    const std::size_t class_count = data.class_count;
    const std::size_t mi = cfg.model_input;

    PreparedBatch out;
    out.inputs = Tensor({batch, data.images.shape[1], mi, mi});
    out.soft_labels = Tensor({batch, class_count});
    const std::size_t plane = data.images.shape[1] * mi * mi;
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t idx = order[begin + b];
        Rng stream = epoch_rng.derive(cfg.augment.rng_seed ^ (idx + 1));
        Tensor view = augment_image(data.image(idx), cfg.train_size, cfg.augment, stream);
        if (view.shape[1] != mi || view.shape[2] != mi)
            view = resize_bilinear(view, mi, mi);
        view = centered(std::move(view));
        std::copy(view.data.begin(), view.data.end(),
                  out.inputs.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
        out.labels.push_back(data.labels[idx]);
        out.soft_labels.at2(b, data.labels[idx]) = 1.0;
    }

    if (cfg.augment.cutmix_enabled && batch >= 2) {
        Rng mix_rng = epoch_rng.derive(0xC0FFEEull + begin);
        auto [mixed, records] =
            cutmix(Batch{out.inputs, out.soft_labels}, cfg.augment.cutmix_alpha, mix_rng);
        out.inputs = std::move(mixed.images);
        out.soft_labels = std::move(mixed.soft_labels);
        out.mixed = true;
        for (std::size_t b = 0; b < batch; ++b) {
            out.partners.push_back(out.labels[records[b].partner_index]);
            out.lambdas.push_back(records[b].lambda_adjusted);
        }
    } else {
        out.lambdas.assign(batch, 1.0);
    }
    return out;
}

struct BatchLoss {
    double value = 0.0;
    Tensor grad_embeddings;
    Tensor grad_class_weights;
};

// ArcFace needs one discrete target per row, so a cutmixed batch becomes
// the lambda-weighted sum of the two hard-label losses.
BatchLoss arcface_term(const Tensor& embeddings, const Tensor& head,
                       const PreparedBatch& batch, const ArcFaceConfig& arc) {
    BatchLoss out;
    if (!batch.mixed) {
        LossOutput loss = arcface_loss(embeddings, head, batch.labels, arc);
        out.value = loss.value;
        out.grad_embeddings = std::move(*loss.grad_embeddings);
        out.grad_class_weights = std::move(*loss.grad_class_weights);
        return out;
    }
    std::vector<double> keep_w = batch.lambdas;
    std::vector<double> partner_w(batch.lambdas.size());
    for (std::size_t i = 0; i < partner_w.size(); ++i) partner_w[i] = 1.0 - keep_w[i];

    LossOutput own = arcface_loss_weighted(embeddings, head, batch.labels, keep_w, arc);
    LossOutput other =
        arcface_loss_weighted(embeddings, head, batch.partners, partner_w, arc);
    out.value = own.value + other.value;
    out.grad_embeddings = std::move(*own.grad_embeddings);
    out.grad_class_weights = std::move(*own.grad_class_weights);
    add_scaled(out.grad_embeddings, *other.grad_embeddings, 1.0);
    add_scaled(out.grad_class_weights, *other.grad_class_weights, 1.0);
    return out;
}

BatchLoss compute_batch_loss(const Tensor& embeddings, const Tensor& head,
                             const PreparedBatch& batch, const ExperimentConfig& cfg,
                             const ModelParams* teacher, const Tensor* teacher_logits) {
    BatchLoss out;
    if (teacher != nullptr) {
        const Tensor student_logits = cosine_logits(embeddings, head, cfg.arc.scale);
        LossOutput obj =
            distill_objective(student_logits, *teacher_logits, batch.soft_labels, cfg.kd);
        out.value = obj.value;
        cosine_logits_backward(embeddings, head, cfg.arc.scale, *obj.grad_logits,
                               out.grad_embeddings, out.grad_class_weights);
        return out;
    }

    switch (cfg.loss) {
        case LossKind::cross_entropy: {
            const Tensor logits = cosine_logits(embeddings, head, cfg.arc.scale);
            LossOutput ce = cross_entropy(logits, batch.soft_labels);
            out.value = ce.value;
            cosine_logits_backward(embeddings, head, cfg.arc.scale, *ce.grad_logits,
                                   out.grad_embeddings, out.grad_class_weights);
            return out;
        }
        case LossKind::arcface:
            return arcface_term(embeddings, head, batch, cfg.arc);
        case LossKind::combined: {
            const CombinedLossConfig combo = cfg.combined_config();
            BatchLoss arc = arcface_term(embeddings, head, batch, combo.arc);
            std::vector<std::size_t> circle_labels(batch.labels.size());
            for (std::size_t i = 0; i < circle_labels.size(); ++i)
                circle_labels[i] = batch.dominant_label(i);
            LossOutput circ = circle_loss(embeddings, circle_labels, combo.circle);

            out.value = combo.gamma0 * arc.value + combo.gamma1 * circ.value;
            out.grad_embeddings = Tensor(embeddings.shape);
            add_scaled(out.grad_embeddings, arc.grad_embeddings, combo.gamma0);
            add_scaled(out.grad_embeddings, *circ.grad_embeddings, combo.gamma1);
            out.grad_class_weights = Tensor(head.shape);
            add_scaled(out.grad_class_weights, arc.grad_class_weights, combo.gamma0);
            return out;
        }
    }
    throw ConfigInvalid("unknown loss kind");
}

double dataset_top1(const ModelParams& params, const Dataset& data, double scale,
                    std::size_t test_size, std::size_t model_input,
                    std::size_t batch_size) {
    if (data.size() == 0) return 0.0;
    const std::size_t channels = data.images.shape[1];
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t end = std::min(data.size(), begin + batch_size);
        Tensor inputs({end - begin, channels, model_input, model_input});
        const std::size_t plane = channels * model_input * model_input;
        for (std::size_t b = 0; b < end - begin; ++b) {
            const Tensor view =
                centered(inference_input(data.image(begin + b), test_size, model_input));
            std::copy(view.data.begin(), view.data.end(),
                      inputs.data.begin() + static_cast<std::ptrdiff_t>(b * plane));
        }
        const Tensor logits = predict_logits(params, inputs, scale);
        for (std::size_t b = 0; b < end - begin; ++b)
            if (argmax_row(logits, b) == data.labels[begin + b]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult run_loop(const ExperimentConfig& cfg, const Dataset& train_set,
                     const Dataset& val_set, const ModelParams* teacher) {
    cfg.validate();
    if (train_set.size() == 0) throw DataEmpty("training split is empty");
    if (val_set.size() > 0 && val_set.class_count > train_set.class_count)
        throw ClassCountMismatch("validation classes exceed training classes");

    const std::size_t channels = train_set.images.shape[1];
    const std::size_t input_dim = channels * cfg.model_input * cfg.model_input;
    std::vector<std::size_t> arch{input_dim};
    arch.insert(arch.end(), cfg.layer_widths.begin(), cfg.layer_widths.end());
    ModelParams params = init_params(arch, train_set.class_count, cfg.seed);
    if (teacher != nullptr && teacher->class_count() != train_set.class_count)
        throw ClassCountMismatch("teacher class count differs from dataset");

    OptimizerState opt = OptimizerState::for_params(params);
    Rng master(cfg.seed);
    TrainHistory history;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.sched);
        Rng epoch_rng = master.derive(epoch + 1);
        std::vector<std::size_t> order = epoch_rng.permutation(train_set.size());

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            PreparedBatch batch =
                prepare_batch(train_set, order, begin, end, cfg, epoch_rng);

            auto [embeddings, cache] = forward(params, batch.inputs);

            Tensor teacher_logits;
            if (teacher != nullptr) {
                // Both KD heads run at the student's scale so the tempered
                // distributions live on a common footing.
                auto [t_emb, t_cache] = forward(*teacher, batch.inputs);
                teacher_logits =
                    cosine_logits(t_emb, teacher->class_weights, cfg.arc.scale);
            }
            BatchLoss loss = compute_batch_loss(embeddings, params.class_weights, batch,
                                                cfg, teacher, &teacher_logits);
            loss_sum += loss.value * static_cast<double>(end - begin);

            // Train accuracy against the dominant label, margin-free head.
            const Tensor plain = cosine_logits(embeddings, params.class_weights,
                                               cfg.arc.scale);
            for (std::size_t b = 0; b < end - begin; ++b)
                if (argmax_row(plain, b) == batch.dominant_label(b)) ++correct;

            ModelGrads grads = backward(params, cache, loss.grad_embeddings);
            add_scaled(grads.class_weights, loss.grad_class_weights, 1.0);
            sgd_momentum_step(params, grads, opt, lr);
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.train_top1 = static_cast<double>(correct) / static_cast<double>(train_set.size());
        rec.val_top1 = dataset_top1(params, val_set, cfg.arc.scale, cfg.test_size,
                                    cfg.model_input, cfg.batch_size);
        history.push_back(rec);
    }

    Checkpoint ckpt;
    ckpt.params = std::move(params);
    ckpt.config = cfg;
    ckpt.seed = cfg.seed;
    return {std::move(ckpt), std::move(history)};
}

} // namespace

OptimizerState OptimizerState::for_params(const ModelParams& params, double momentum) {
    if (momentum < 0.0 || momentum >= 1.0)
        throw ConfigInvalid("momentum must lie in [0, 1)");
    OptimizerState state;
    state.velocity = ModelGrads::zeros_like(params);
    state.momentum = momentum;
    return state;
}

double cosine_lr(std::size_t epoch, const SchedulerConfig& cfg) {
    if (cfg.t_max < 1) throw ConfigInvalid("scheduler T must be >= 1");
    if (epoch > cfg.t_max) throw OutOfRange("epoch beyond scheduler horizon");
    const double phase =
        M_PI * static_cast<double>(epoch) / static_cast<double>(cfg.t_max);
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(phase));
}

void sgd_momentum_step(ModelParams& params, const ModelGrads& grads, OptimizerState& state,
                       double lr) {
    if (grads.weights.size() != params.weights.size())
        throw ShapeMismatch("gradient stack depth differs from parameters");
    const auto step_tensor = [&](Tensor& p, const Tensor& g, Tensor& v) {
        if (!p.same_shape(g) || !p.same_shape(v))
            throw ShapeMismatch("gradient/velocity shape differs from parameter");
        for (std::size_t i = 0; i < p.numel(); ++i) {
            v[i] = state.momentum * v[i] + g[i];
            p[i] -= lr * v[i];
        }
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        step_tensor(params.weights[l], grads.weights[l], state.velocity.weights[l]);
        step_tensor(params.biases[l], grads.biases[l], state.velocity.biases[l]);
    }
    step_tensor(params.class_weights, grads.class_weights, state.velocity.class_weights);
}

std::string history_to_tsv(const TrainHistory& history) {
    std::ostringstream out;
    out << "epoch\tlr\ttrain_loss\ttrain_top1\tval_top1\n";
    char buf[160];
    for (const EpochRecord& rec : history) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.10g\t%.10g\t%.6f\t%.6f\n", rec.epoch,
                      rec.lr, rec.train_loss, rec.train_top1, rec.val_top1);
        out << buf;
    }
    return out.str();
}

TrainResult train(const ExperimentConfig& cfg, const Dataset& train_set,
                  const Dataset& val_set) {
    return run_loop(cfg, train_set, val_set, nullptr);
}

TrainResult distill(const Checkpoint& teacher, const ExperimentConfig& student_cfg,
                    const KDConfig& kd, const Dataset& train_set, const Dataset& val_set) {
    ExperimentConfig cfg = student_cfg;
    cfg.kd = kd;
    if (teacher.params.class_count() != train_set.class_count)
        throw ClassCountMismatch("teacher class count differs from dataset");
    if (teacher.config.model_input != cfg.model_input)
        throw ConfigInvalid("teacher and student must share the model input size");
    return run_loop(cfg, train_set, val_set, &teacher.params);
}

Tensor inference_input(const Tensor& image, std::size_t test_size, std::size_t model_input) {
    Tensor view = image;
    if (view.shape[1] != test_size || view.shape[2] != test_size)
        view = resize_bilinear(view, test_size, test_size);
    if (view.shape[1] != model_input || view.shape[2] != model_input)
        view = resize_bilinear(view, model_input, model_input);
    return view;
}

Tensor centered(Tensor view) {
    for (double& v : view.data) v -= kInputCenter;
    return view;
}

double evaluate_top1(const Checkpoint& ckpt, const Dataset& dataset) {
    return dataset_top1(ckpt.params, dataset, ckpt.config.arc.scale,
                        ckpt.config.test_size, ckpt.config.model_input,
                        std::max<std::size_t>(1, ckpt.config.batch_size));
}

} // namespace fgrec
