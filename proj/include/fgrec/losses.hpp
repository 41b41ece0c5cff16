#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fgrec/tensor.hpp"

namespace fgrec {

// Additive angular margin on the target-class angle, applied to scaled
// cosine logits.
struct ArcFaceConfig {
    double margin = 0.2; // radians
    double scale = 32.0;
};

// Pairwise similarity loss; the derived constants are O_p = 1+m, O_n = -m,
// Delta_p = 1-m, Delta_n = m.
struct CircleConfig {
    double margin = 0.25;
    double gamma = 32.0;
};

// gamma0 * arcface + gamma1 * circle. gamma1 defaults to 1/beta for the
// configured training batch size.
struct CombinedLossConfig {
    double gamma0 = 1.0;
    double gamma1 = 1.0 / 32.0;
    ArcFaceConfig arc;
    CircleConfig circle;

    static CombinedLossConfig for_batch_size(std::size_t beta) {
        CombinedLossConfig cfg;
        cfg.gamma1 = 1.0 / static_cast<double>(beta);
        return cfg;
    }
};

struct KDConfig {
    double temperature = 3.0;
    double kd_weight = 1.0;
    double ce_weight = 1.0;
};

struct LossOutput {
    double value = 0.0;
    std::optional<Tensor> grad_embeddings;    // B x d
    std::optional<Tensor> grad_class_weights; // K x d
    std::optional<Tensor> grad_logits;        // B x K
};

// Mean over the batch of -sum_k y_k log softmax(z)_k. Each label row must
// lie on the simplex (InvalidLabel beyond 1e-9). grad_logits = (p - y)/B.
LossOutput cross_entropy(const Tensor& logits, const Tensor& soft_labels);

// Margin-free scaled cosine head: s * cos(theta_ij) over L2-normalized
// embeddings and class weights.
Tensor cosine_logits(const Tensor& embeddings, const Tensor& class_weights, double scale);

// Pulls a d(loss)/d(logits) matrix back through the cosine head.
void cosine_logits_backward(const Tensor& embeddings, const Tensor& class_weights,
                            double scale, const Tensor& grad_logits,
                            Tensor& grad_embeddings, Tensor& grad_class_weights);

// ArcFace logits: target column becomes s*cos(theta_y + m) via
// s*(cos*cos m - sin*sin m); when cos(theta_y) <= cos(pi - m) the target
// falls back to s*(cos - m*sin m) to stay monotone. Other columns are
// s*cos(theta_j).
Tensor arcface_logits(const Tensor& embeddings, const Tensor& class_weights,
                      const std::vector<std::size_t>& labels, const ArcFaceConfig& cfg);

LossOutput arcface_loss(const Tensor& embeddings, const Tensor& class_weights,
                        const std::vector<std::size_t>& labels, const ArcFaceConfig& cfg);

// Per-row weighted variant: value = (1/B) sum_i w_i * ell_i. Used for the
// cutmix label mixing, where each mixed image contributes two hard-label
// terms with weights lambda and 1-lambda.
LossOutput arcface_loss_weighted(const Tensor& embeddings, const Tensor& class_weights,
                                 const std::vector<std::size_t>& labels,
                                 const std::vector<double>& row_weights,
                                 const ArcFaceConfig& cfg);

// Pairwise Circle loss over the batch:
//   log(1 + sum_N exp(g*a_n*(s - D_n)) * sum_P exp(-g*a_p*(s - D_p)))
// with a_p = max(0, O_p - s), a_n = max(0, s - O_n) detached from the
// gradient. Empty P or empty N gives value 0 with zero gradient.
LossOutput circle_loss(const Tensor& embeddings, const std::vector<std::size_t>& labels,
                       const CircleConfig& cfg);

// Same objective with the alpha factors frozen at externally supplied
// values; this is the function the finite-difference oracle probes, since
// the analytic gradient treats alpha as constant.
double circle_loss_value_frozen_alpha(const Tensor& embeddings,
                                      const std::vector<std::size_t>& labels,
                                      const CircleConfig& cfg,
                                      const std::vector<double>& alpha_by_pair);

// Alpha factors at the current point, ordered by pair index (i<j, row-major
// enumeration), for use with circle_loss_value_frozen_alpha.
std::vector<double> circle_alpha_factors(const Tensor& embeddings,
                                         const std::vector<std::size_t>& labels,
                                         const CircleConfig& cfg);

LossOutput combined_loss(const Tensor& embeddings, const Tensor& class_weights,
                         const std::vector<std::size_t>& labels,
                         const CombinedLossConfig& cfg);

// T^2-scaled mean KL(softmax(z_t/T) || softmax(z_s/T)); the gradient is
// w.r.t. student logits only.
LossOutput kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                   const KDConfig& cfg);

LossOutput distill_objective(const Tensor& student_logits, const Tensor& teacher_logits,
                             const Tensor& soft_labels, const KDConfig& cfg);

} // namespace fgrec
