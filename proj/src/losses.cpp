#include "fgrec/losses.hpp"

#include <cmath>

#include "fgrec/numerics.hpp"

namespace fgrec {
namespace {

void require_matrix(const Tensor& t, const char* what) {
    if (t.ndim() != 2) throw ShapeMismatch(std::string(what) + " must be 2-D");
}

void require_labels(const std::vector<std::size_t>& labels, std::size_t batch,
                    std::size_t class_count) {
    if (labels.size() != batch)
        throw ShapeMismatch("label count does not match batch size");
    for (std::size_t y : labels)
        if (y >= class_count) throw InvalidLabel("label index out of range");
}

// Row-normalized copy plus the effective norms. The guard term inside the
// sqrt is far below one ulp for any live row but keeps rows that a dead
// ReLU stack zeroed out finite: they normalize to the zero direction and
// score cosine 0 against every class.
struct NormalizedRows {
    Tensor unit;               // same shape, unit (or zero) rows
    std::vector<double> norms; // per-row guarded L2 norms
};

NormalizedRows normalize_rows(const Tensor& m, const char* what) {
    (void)what;
    NormalizedRows out{Tensor(m.shape), std::vector<double>(m.shape[0])};
    const std::size_t rows = m.shape[0], cols = m.shape[1];
    for (std::size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sq += m.at2(i, j) * m.at2(i, j);
        const double norm = std::sqrt(sq + kNormEps * kNormEps);
        out.norms[i] = norm;
        for (std::size_t j = 0; j < cols; ++j) out.unit.at2(i, j) = m.at2(i, j) / norm;
    }
    return out;
}

// Cosine matrix between two sets of unit rows: out[i][j] = <a_i, b_j>.
Tensor unit_row_cosines(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.shape[0], m = b.shape[0], d = a.shape[1];
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += a.at2(i, k) * b.at2(j, k);
            out.at2(i, j) = dot;
        }
    return out;
}

double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
    return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

// d(target logit)/d(cos) for the margin branch actually taken.
double arcface_target_slope(double c, const ArcFaceConfig& cfg) {
    if (c > std::cos(M_PI - cfg.margin)) {
        const double sin_theta = std::sqrt(1.0 - c * c);
        return cfg.scale * (std::cos(cfg.margin) + c * std::sin(cfg.margin) / sin_theta);
    }
    return cfg.scale;
}

double arcface_target_logit(double c, const ArcFaceConfig& cfg) {
    if (c > std::cos(M_PI - cfg.margin)) {
        const double sin_theta = std::sqrt(1.0 - c * c);
        return cfg.scale * (c * std::cos(cfg.margin) - sin_theta * std::sin(cfg.margin));
    }
    return cfg.scale * (c - cfg.margin * std::sin(cfg.margin));
}

void validate_arcface_cfg(const ArcFaceConfig& cfg) {
    if (cfg.margin < 0.0 || cfg.margin >= M_PI / 2.0)
        throw ConfigInvalid("arcface margin must lie in [0, pi/2)");
    if (cfg.scale <= 0.0) throw ConfigInvalid("arcface scale must be positive");
}

void validate_circle_cfg(const CircleConfig& cfg) {
    if (cfg.margin <= 0.0 || cfg.margin >= 1.0)
        throw ConfigInvalid("circle margin must lie in (0, 1)");
    if (cfg.gamma <= 0.0) throw ConfigInvalid("circle gamma must be positive");
}

} // namespace

LossOutput cross_entropy(const Tensor& logits, const Tensor& soft_labels) {
    require_matrix(logits, "logits");
    require_matrix(soft_labels, "soft labels");
    if (!logits.same_shape(soft_labels))
        throw ShapeMismatch("cross_entropy: logits and labels shapes differ");
    logits.ensure_finite("cross_entropy logits");

    const std::size_t batch = logits.shape[0], class_count = logits.shape[1];
    for (std::size_t i = 0; i < batch; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < class_count; ++k) {
            const double y = soft_labels.at2(i, k);
            if (y < -1e-9) throw InvalidLabel("cross_entropy: negative label entry");
            sum += y;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw InvalidLabel("cross_entropy: label row off the simplex");
    }

    LossOutput out;
    out.grad_logits = Tensor({batch, class_count});
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        Tensor row({class_count});
        for (std::size_t k = 0; k < class_count; ++k) row[k] = logits.at2(i, k);
        const Tensor logp = log_softmax(row);
        double row_loss = 0.0;
        for (std::size_t k = 0; k < class_count; ++k) {
            const double y = soft_labels.at2(i, k);
            row_loss -= y * logp[k];
            out.grad_logits->at2(i, k) =
                (std::exp(logp[k]) - y) / static_cast<double>(batch);
        }
        total += row_loss;
    }
    out.value = total / static_cast<double>(batch);
    return out;
}

Tensor cosine_logits(const Tensor& embeddings, const Tensor& class_weights, double scale) {
    require_matrix(embeddings, "embeddings");
    require_matrix(class_weights, "class weights");
    if (embeddings.shape[1] != class_weights.shape[1])
        throw ShapeMismatch("cosine_logits: embedding dim differs from weight dim");
    const NormalizedRows e = normalize_rows(embeddings, "embeddings");
    const NormalizedRows w = normalize_rows(class_weights, "class weights");
    Tensor logits = unit_row_cosines(e.unit, w.unit);
    for (double& v : logits.data) v *= scale;
    return logits;
}

void cosine_logits_backward(const Tensor& embeddings, const Tensor& class_weights,
                            double scale, const Tensor& grad_logits,
                            Tensor& grad_embeddings, Tensor& grad_class_weights) {
    const std::size_t batch = embeddings.shape[0];
    const std::size_t class_count = class_weights.shape[0];
    const std::size_t dim = embeddings.shape[1];
    require_shape(grad_logits, {batch, class_count}, "grad_logits");

    const NormalizedRows e = normalize_rows(embeddings, "embeddings");
    const NormalizedRows w = normalize_rows(class_weights, "class weights");
    const Tensor cosines = unit_row_cosines(e.unit, w.unit);

    grad_embeddings = Tensor({batch, dim});
    grad_class_weights = Tensor({class_count, dim});
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < class_count; ++j) {
            const double g_cos = grad_logits.at2(i, j) * scale;
            if (g_cos == 0.0) continue;
            const double c = cosines.at2(i, j);
            for (std::size_t k = 0; k < dim; ++k) {
                grad_embeddings.at2(i, k) +=
                    g_cos * (w.unit.at2(j, k) - c * e.unit.at2(i, k)) / e.norms[i];
                grad_class_weights.at2(j, k) +=
                    g_cos * (e.unit.at2(i, k) - c * w.unit.at2(j, k)) / w.norms[j];
            }
        }
    }
}

Tensor arcface_logits(const Tensor& embeddings, const Tensor& class_weights,
                      const std::vector<std::size_t>& labels, const ArcFaceConfig& cfg) {
    validate_arcface_cfg(cfg);
    require_matrix(embeddings, "embeddings");
    require_matrix(class_weights, "class weights");
    if (embeddings.shape[1] != class_weights.shape[1])
        throw ShapeMismatch("arcface_logits: embedding dim differs from weight dim");
    require_labels(labels, embeddings.shape[0], class_weights.shape[0]);

    const NormalizedRows e = normalize_rows(embeddings, "embeddings");
    const NormalizedRows w = normalize_rows(class_weights, "class weights");
    Tensor logits = unit_row_cosines(e.unit, w.unit);

    const std::size_t batch = embeddings.shape[0];
    const std::size_t class_count = class_weights.shape[0];
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < class_count; ++j) {
            const double c = clamp_cosine(logits.at2(i, j));
            logits.at2(i, j) =
                j == labels[i] ? arcface_target_logit(c, cfg) : cfg.scale * c;
        }
    }
    return logits;
}

LossOutput arcface_loss(const Tensor& embeddings, const Tensor& class_weights,
                        const std::vector<std::size_t>& labels, const ArcFaceConfig& cfg) {
    return arcface_loss_weighted(embeddings, class_weights, labels,
                                 std::vector<double>(labels.size(), 1.0), cfg);
}

LossOutput arcface_loss_weighted(const Tensor& embeddings, const Tensor& class_weights,
                                 const std::vector<std::size_t>& labels,
                                 const std::vector<double>& row_weights,
                                 const ArcFaceConfig& cfg) {
    validate_arcface_cfg(cfg);
    require_matrix(embeddings, "embeddings");
    require_matrix(class_weights, "class weights");
    if (embeddings.shape[1] != class_weights.shape[1])
        throw ShapeMismatch("arcface_loss: embedding dim differs from weight dim");
    require_labels(labels, embeddings.shape[0], class_weights.shape[0]);
    if (row_weights.size() != labels.size())
        throw ShapeMismatch("arcface_loss: row weight count differs from batch");

    const std::size_t batch = embeddings.shape[0];
    const std::size_t class_count = class_weights.shape[0];
    const std::size_t dim = embeddings.shape[1];

    const NormalizedRows e = normalize_rows(embeddings, "embeddings");
    const NormalizedRows w = normalize_rows(class_weights, "class weights");
    const Tensor cosines = unit_row_cosines(e.unit, w.unit);

    LossOutput out;
    out.grad_embeddings = Tensor({batch, dim});
    out.grad_class_weights = Tensor({class_count, dim});

    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        Tensor row({class_count});
        for (std::size_t j = 0; j < class_count; ++j) {
            const double c = clamp_cosine(cosines.at2(i, j));
            row[j] = j == labels[i] ? arcface_target_logit(c, cfg) : cfg.scale * c;
        }
        const Tensor logp = log_softmax(row);
        total += -row_weights[i] * logp[labels[i]];

        for (std::size_t j = 0; j < class_count; ++j) {
            // d(loss)/d(logit), already carrying the row weight and 1/B.
            const double g_logit = row_weights[i] *
                                   (std::exp(logp[j]) - (j == labels[i] ? 1.0 : 0.0)) /
                                   static_cast<double>(batch);
            if (g_logit == 0.0) continue;
            const double c_clamped = clamp_cosine(cosines.at2(i, j));
            const double slope =
                j == labels[i] ? arcface_target_slope(c_clamped, cfg) : cfg.scale;
            const double g_cos = g_logit * slope;
            const double c_raw = cosines.at2(i, j);
            for (std::size_t k = 0; k < dim; ++k) {
                out.grad_embeddings->at2(i, k) +=
                    g_cos * (w.unit.at2(j, k) - c_raw * e.unit.at2(i, k)) / e.norms[i];
                out.grad_class_weights->at2(j, k) +=
                    g_cos * (e.unit.at2(i, k) - c_raw * w.unit.at2(j, k)) / w.norms[j];
            }
        }
    }
    out.value = total / static_cast<double>(batch);
    return out;
}

namespace {

struct CirclePairs {
    std::vector<std::pair<std::size_t, std::size_t>> pairs; // i < j, row-major order
    std::vector<bool> positive;
};

CirclePairs enumerate_pairs(std::size_t batch, const std::vector<std::size_t>& labels) {
    CirclePairs out;
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = i + 1; j < batch; ++j) {
            out.pairs.emplace_back(i, j);
            out.positive.push_back(labels[i] == labels[j]);
        }
    return out;
}

} // namespace

std::vector<double> circle_alpha_factors(const Tensor& embeddings,
                                         const std::vector<std::size_t>& labels,
                                         const CircleConfig& cfg) {
    validate_circle_cfg(cfg);
    const NormalizedRows e = normalize_rows(embeddings, "embeddings");
    const CirclePairs pc = enumerate_pairs(embeddings.shape[0], labels);
    const std::size_t dim = embeddings.shape[1];
    std::vector<double> alphas(pc.pairs.size());
    for (std::size_t p = 0; p < pc.pairs.size(); ++p) {
        const auto [i, j] = pc.pairs[p];
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += e.unit.at2(i, k) * e.unit.at2(j, k);
        alphas[p] = pc.positive[p] ? std::max(0.0, 1.0 + cfg.margin - s)
                                   : std::max(0.0, s + cfg.margin);
    }
    return alphas;
}

double circle_loss_value_frozen_alpha(const Tensor& embeddings,
                                      const std::vector<std::size_t>& labels,
                                      const CircleConfig& cfg,
                                      const std::vector<double>& alpha_by_pair) {
    validate_circle_cfg(cfg);
    const NormalizedRows e = normalize_rows(embeddings, "embeddings");
    const CirclePairs pc = enumerate_pairs(embeddings.shape[0], labels);
    if (alpha_by_pair.size() != pc.pairs.size())
        throw ShapeMismatch("circle loss: alpha count differs from pair count");
    const std::size_t dim = embeddings.shape[1];
    const double delta_p = 1.0 - cfg.margin, delta_n = cfg.margin;

    std::vector<double> neg_terms, pos_terms;
    for (std::size_t p = 0; p < pc.pairs.size(); ++p) {
        const auto [i, j] = pc.pairs[p];
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += e.unit.at2(i, k) * e.unit.at2(j, k);
        if (pc.positive[p])
            pos_terms.push_back(-cfg.gamma * alpha_by_pair[p] * (s - delta_p));
        else
            neg_terms.push_back(cfg.gamma * alpha_by_pair[p] * (s - delta_n));
    }
    if (neg_terms.empty() || pos_terms.empty()) return 0.0;
    return softplus(logsumexp(neg_terms) + logsumexp(pos_terms));
}

LossOutput circle_loss(const Tensor& embeddings, const std::vector<std::size_t>& labels,
                       const CircleConfig& cfg) {
    validate_circle_cfg(cfg);
    require_matrix(embeddings, "embeddings");
    if (embeddings.shape[0] < 1) throw ShapeMismatch("circle_loss: empty batch");
    if (labels.size() != embeddings.shape[0])
        throw ShapeMismatch("circle_loss: label count differs from batch");
    embeddings.ensure_finite("circle_loss embeddings");

    const std::size_t batch = embeddings.shape[0];
    const std::size_t dim = embeddings.shape[1];
    LossOutput out;
    out.grad_embeddings = Tensor({batch, dim});

    const NormalizedRows e = normalize_rows(embeddings, "embeddings");
    const CirclePairs pc = enumerate_pairs(batch, labels);

    const double delta_p = 1.0 - cfg.margin, delta_n = cfg.margin;
    std::vector<double> sims(pc.pairs.size());
    std::vector<double> alphas(pc.pairs.size());
    std::vector<double> neg_terms, pos_terms;
    std::vector<std::size_t> neg_idx, pos_idx;
    for (std::size_t p = 0; p < pc.pairs.size(); ++p) {
        const auto [i, j] = pc.pairs[p];
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += e.unit.at2(i, k) * e.unit.at2(j, k);
        sims[p] = s;
        if (pc.positive[p]) {
            alphas[p] = std::max(0.0, 1.0 + cfg.margin - s);
            pos_terms.push_back(-cfg.gamma * alphas[p] * (s - delta_p));
            pos_idx.push_back(p);
        } else {
            alphas[p] = std::max(0.0, s + cfg.margin);
            neg_terms.push_back(cfg.gamma * alphas[p] * (s - delta_n));
            neg_idx.push_back(p);
        }
    }

    if (neg_terms.empty() || pos_terms.empty()) {
        out.value = 0.0;
        return out;
    }

    const double lse_n = logsumexp(neg_terms);
    const double lse_p = logsumexp(pos_terms);
    const double t = lse_n + lse_p;
    out.value = softplus(t);
    const double sig = sigmoid(t);

    // dL/ds for each pair; alpha is a constant here.
    std::vector<double> grad_s(pc.pairs.size(), 0.0);
    for (std::size_t q = 0; q < neg_idx.size(); ++q) {
        const std::size_t p = neg_idx[q];
        grad_s[p] = sig * std::exp(neg_terms[q] - lse_n) * cfg.gamma * alphas[p];
    }
    for (std::size_t q = 0; q < pos_idx.size(); ++q) {
        const std::size_t p = pos_idx[q];
        grad_s[p] = -sig * std::exp(pos_terms[q] - lse_p) * cfg.gamma * alphas[p];
    }

    for (std::size_t p = 0; p < pc.pairs.size(); ++p) {
        if (grad_s[p] == 0.0) continue;
        const auto [i, j] = pc.pairs[p];
        const double s = sims[p];
        for (std::size_t k = 0; k < dim; ++k) {
            out.grad_embeddings->at2(i, k) +=
                grad_s[p] * (e.unit.at2(j, k) - s * e.unit.at2(i, k)) / e.norms[i];
            out.grad_embeddings->at2(j, k) +=
                grad_s[p] * (e.unit.at2(i, k) - s * e.unit.at2(j, k)) / e.norms[j];
        }
    }
    return out;
}

LossOutput combined_loss(const Tensor& embeddings, const Tensor& class_weights,
                         const std::vector<std::size_t>& labels,
                         const CombinedLossConfig& cfg) {
    if (cfg.gamma0 < 0.0 || cfg.gamma1 < 0.0)
        throw ConfigInvalid("combined loss weights must be non-negative");
    if (cfg.gamma0 == 0.0 && cfg.gamma1 == 0.0)
        throw ConfigInvalid("combined loss weights must not both be zero");

    const LossOutput arc = arcface_loss(embeddings, class_weights, labels, cfg.arc);
    const LossOutput circ = circle_loss(embeddings, labels, cfg.circle);

    LossOutput out;
    out.value = cfg.gamma0 * arc.value + cfg.gamma1 * circ.value;
    out.grad_embeddings = Tensor(embeddings.shape);
    out.grad_class_weights = Tensor(class_weights.shape);
    for (std::size_t i = 0; i < out.grad_embeddings->numel(); ++i)
        (*out.grad_embeddings)[i] = cfg.gamma0 * (*arc.grad_embeddings)[i] +
                                    cfg.gamma1 * (*circ.grad_embeddings)[i];
    // Circle has no class weights; the head gradient is the ArcFace term.
    for (std::size_t i = 0; i < out.grad_class_weights->numel(); ++i)
        (*out.grad_class_weights)[i] = cfg.gamma0 * (*arc.grad_class_weights)[i];
    return out;
}

LossOutput kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                   const KDConfig& cfg) {
    if (cfg.temperature <= 0.0) throw ConfigInvalid("kd temperature must be positive");
    require_matrix(student_logits, "student logits");
    require_matrix(teacher_logits, "teacher logits");
    if (!student_logits.same_shape(teacher_logits))
        throw ShapeMismatch("kd_loss: student and teacher shapes differ");
    student_logits.ensure_finite("kd student logits");
    teacher_logits.ensure_finite("kd teacher logits");

    const std::size_t batch = student_logits.shape[0];
    const std::size_t class_count = student_logits.shape[1];
    const double temp = cfg.temperature;

    LossOutput out;
    out.grad_logits = Tensor({batch, class_count});
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        Tensor srow({class_count}), trow({class_count});
        for (std::size_t k = 0; k < class_count; ++k) {
            srow[k] = student_logits.at2(i, k) / temp;
            trow[k] = teacher_logits.at2(i, k) / temp;
        }
        const Tensor logp_s = log_softmax(srow);
        const Tensor logp_t = log_softmax(trow);
        for (std::size_t k = 0; k < class_count; ++k) {
            const double p_t = std::exp(logp_t[k]);
            total += p_t * (logp_t[k] - logp_s[k]);
            out.grad_logits->at2(i, k) = temp * (std::exp(logp_s[k]) - p_t) /
                                         static_cast<double>(batch);
        }
    }
    // KL is non-negative; guard the value against float cancellation.
    out.value = temp * temp * std::max(0.0, total / static_cast<double>(batch));
    return out;
}

LossOutput distill_objective(const Tensor& student_logits, const Tensor& teacher_logits,
                             const Tensor& soft_labels, const KDConfig& cfg) {
    if (cfg.kd_weight < 0.0 || cfg.ce_weight < 0.0)
        throw ConfigInvalid("distill weights must be non-negative");
    if (cfg.kd_weight == 0.0) {
        // Degenerate weight: exactly the CE objective, bit for bit.
        LossOutput ce = cross_entropy(student_logits, soft_labels);
        ce.value *= cfg.ce_weight;
        for (double& g : ce.grad_logits->data) g *= cfg.ce_weight;
        return ce;
    }
    const LossOutput kd = kd_loss(student_logits, teacher_logits, cfg);
    const LossOutput ce = cross_entropy(student_logits, soft_labels);

    LossOutput out;
    out.value = cfg.kd_weight * kd.value + cfg.ce_weight * ce.value;
    out.grad_logits = Tensor(student_logits.shape);
    for (std::size_t i = 0; i < out.grad_logits->numel(); ++i)
        (*out.grad_logits)[i] =
            cfg.kd_weight * (*kd.grad_logits)[i] + cfg.ce_weight * (*ce.grad_logits)[i];
    return out;
}

} // namespace fgrec
