#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fgrec/losses.hpp"
#include "fgrec/numerics.hpp"
#include "fgrec/rng.hpp"

using namespace fgrec;

namespace {

Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.5,
                     double hi = 1.5) {
    Tensor out({rows, cols});
    for (double& v : out.data) v = rng.uniform(lo, hi);
    // keep rows comfortably away from the zero-norm guard
    for (std::size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sq += out.at2(i, j) * out.at2(i, j);
        if (sq < 0.25) out.at2(i, 0) += 1.0;
    }
    return out;
}

std::vector<std::size_t> random_labels(Rng& rng, std::size_t batch, std::size_t classes) {
    std::vector<std::size_t> labels(batch);
    for (auto& y : labels) y = static_cast<std::size_t>(rng.uniform_int(classes));
    return labels;
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
    Tensor out({labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) out.at2(i, labels[i]) = 1.0;
    return out;
}

// Independent naive evaluation of the pairwise objective: explicit pair
// enumeration, no log-space tricks. Used as the brute-force oracle.
double circle_brute_force(const Tensor& embeddings, const std::vector<std::size_t>& labels,
                          const CircleConfig& cfg) {
    const std::size_t batch = embeddings.shape[0], dim = embeddings.shape[1];
    std::vector<std::vector<double>> unit(batch, std::vector<double>(dim));
    for (std::size_t i = 0; i < batch; ++i) {
        double sq = 0.0;
        for (std::size_t k = 0; k < dim; ++k) sq += embeddings.at2(i, k) * embeddings.at2(i, k);
        const double norm = std::sqrt(sq);
        for (std::size_t k = 0; k < dim; ++k) unit[i][k] = embeddings.at2(i, k) / norm;
    }
    double sum_n = 0.0, sum_p = 0.0;
    bool any_n = false, any_p = false;
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = i + 1; j < batch; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) s += unit[i][k] * unit[j][k];
            if (labels[i] == labels[j]) {
                const double alpha = std::max(0.0, 1.0 + cfg.margin - s);
                sum_p += std::exp(-cfg.gamma * alpha * (s - (1.0 - cfg.margin)));
                any_p = true;
            } else {
                const double alpha = std::max(0.0, s + cfg.margin);
                sum_n += std::exp(cfg.gamma * alpha * (s - cfg.margin));
                any_n = true;
            }
        }
    if (!any_n || !any_p) return 0.0;
    return std::log(1.0 + sum_n * sum_p);
}

} // namespace

TEST_CASE("cross entropy of uniform logits against a one-hot label is ln K") {
    const Tensor logits({1, 4}, {0.7, 0.7, 0.7, 0.7});
    const Tensor labels({1, 4}, {0.0, 1.0, 0.0, 0.0});
    const LossOutput out = cross_entropy(logits, labels);
    CHECK(out.value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy scalar case ln(1 + exp(-1))") {
    const Tensor logits({1, 2}, {1.0, 2.0});
    const Tensor labels({1, 2}, {0.0, 1.0});
    const LossOutput out = cross_entropy(logits, labels);
    CHECK(out.value == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(out.value == doctest::Approx(0.313262).epsilon(1e-5));
}

TEST_CASE("cross entropy gradient vanishes when labels equal the softmax") {
    Rng rng(3);
    Tensor logits = random_matrix(rng, 3, 4);
    Tensor labels({3, 4});
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor row({4});
        for (std::size_t k = 0; k < 4; ++k) row[k] = logits.at2(i, k);
        const Tensor p = softmax(row);
        for (std::size_t k = 0; k < 4; ++k) labels.at2(i, k) = p[k];
    }
    const LossOutput out = cross_entropy(logits, labels);
    for (double g : out.grad_logits->data) CHECK(std::fabs(g) <= 1e-12);
}

TEST_CASE("cross entropy rejects off-simplex labels") {
    const Tensor logits({1, 3}, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(cross_entropy(logits, Tensor({1, 3}, {0.5, 0.2, 0.2})), InvalidLabel);
    CHECK_THROWS_AS(cross_entropy(logits, Tensor({1, 3}, {1.5, -0.5, 0.0})), InvalidLabel);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t batch = 1 + rng.uniform_int(8);
        const std::size_t classes = 2 + rng.uniform_int(4);
        const Tensor logits = random_matrix(rng, batch, classes);
        const Tensor labels = one_hot(random_labels(rng, batch, classes), classes);
        const LossOutput out = cross_entropy(logits, labels);
        const auto f = [&](const Tensor& z) { return cross_entropy(z, labels).value; };
        const GradCheckReport report = grad_check(f, logits, *out.grad_logits, 1e-5);
        CHECK(report.max_rel_error <= 1e-4);
    }
}

TEST_CASE("arcface logits with margin disabled reduce to scaled cosines") {
    Rng rng(5);
    const Tensor emb = random_matrix(rng, 3, 4);
    const Tensor w = random_matrix(rng, 5, 4);
    ArcFaceConfig cfg;
    cfg.margin = 0.0;
    cfg.scale = 1.0;
    const Tensor logits = arcface_logits(emb, w, {0, 1, 2}, cfg);
    const Tensor cosines = cosine_logits(emb, w, 1.0);
    for (std::size_t i = 0; i < logits.numel(); ++i)
        CHECK(std::fabs(logits[i] - cosines[i]) <= 1e-12);
}

TEST_CASE("arcface target logit for an aligned embedding") {
    // embedding == class weight: cos clamps to 1 - 1e-7, so the target
    // logit is s*(c*cos m - sqrt(1-c^2)*sin m), just below 32*cos(0.2)
    const Tensor emb({1, 3}, {0.5, -0.25, 1.5});
    Tensor w({2, 3}, {0.5, -0.25, 1.5, 1.0, 0.0, 0.0});
    const ArcFaceConfig cfg; // defaults: margin 0.2, scale 32
    CHECK(cfg.margin == 0.2);
    CHECK(cfg.scale == 32.0);
    const Tensor logits = arcface_logits(emb, w, {0}, cfg);
    const double c = 1.0 - 1e-7;
    const double expected =
        32.0 * (c * std::cos(0.2) - std::sqrt(1.0 - c * c) * std::sin(0.2));
    CHECK(logits.at2(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::fabs(logits.at2(0, 0) - 32.0 * std::cos(0.2)) <= 0.01);
}

TEST_CASE("arcface loss with margin disabled equals cross entropy on cosines") {
    Rng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t batch = 2 + rng.uniform_int(4);
        const Tensor emb = random_matrix(rng, batch, 5);
        const Tensor w = random_matrix(rng, 3, 5);
        const std::vector<std::size_t> labels = random_labels(rng, batch, 3);
        ArcFaceConfig cfg;
        cfg.margin = 0.0;
        cfg.scale = 1.0;
        const LossOutput arc = arcface_loss(emb, w, labels, cfg);
        const LossOutput ce = cross_entropy(cosine_logits(emb, w, 1.0), one_hot(labels, 3));
        CHECK(std::fabs(arc.value - ce.value) <= 1e-10);
    }
}

TEST_CASE("arcface margin strictly raises the loss on a correct instance") {
    Rng rng(31);
    const Tensor w = random_matrix(rng, 3, 5);
    Tensor emb({3, 5});
    // embeddings close to their class weights: the batch is correctly
    // classified
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 5; ++k)
            emb.at2(i, k) = w.at2(i, k) + 0.01 * rng.uniform(-1.0, 1.0);
    const std::vector<std::size_t> labels{0, 1, 2};
    ArcFaceConfig with_margin; // 0.2 / 32
    ArcFaceConfig no_margin;
    no_margin.margin = 0.0;
    const double penalized = arcface_loss(emb, w, labels, with_margin).value;
    const double plain = arcface_loss(emb, w, labels, no_margin).value;
    CHECK(penalized > plain);
}

TEST_CASE("arcface gradients match finite differences") {
    Rng rng(37);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t batch = 4, classes = 3, dim = 5;
        const Tensor emb = random_matrix(rng, batch, dim);
        const Tensor w = random_matrix(rng, classes, dim);
        const std::vector<std::size_t> labels = random_labels(rng, batch, classes);
        const ArcFaceConfig cfg;
        const LossOutput out = arcface_loss(emb, w, labels, cfg);

        const auto f_emb = [&](const Tensor& e) {
            return arcface_loss(e, w, labels, cfg).value;
        };
        CHECK(grad_check(f_emb, emb, *out.grad_embeddings, 1e-5).max_rel_error <= 1e-4);

        const auto f_w = [&](const Tensor& cw) {
            return arcface_loss(emb, cw, labels, cfg).value;
        };
        CHECK(grad_check(f_w, w, *out.grad_class_weights, 1e-5).max_rel_error <= 1e-4);
    }
}

TEST_CASE("arcface hard-case fallback stays monotone and differentiable") {
    // embedding pointed almost opposite its class weight
    Tensor emb({1, 2}, {-1.0, 0.02});
    Tensor w({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const ArcFaceConfig cfg;
    const LossOutput out = arcface_loss(emb, w, {0}, cfg);
    CHECK(std::isfinite(out.value));
    const auto f = [&](const Tensor& e) { return arcface_loss(e, w, {0}, cfg).value; };
    CHECK(grad_check(f, emb, *out.grad_embeddings, 1e-5).max_rel_error <= 1e-4);
}

TEST_CASE("circle loss is zero when all labels differ") {
    Rng rng(41);
    const Tensor emb = random_matrix(rng, 4, 5);
    const LossOutput out = circle_loss(emb, {0, 1, 2, 3}, CircleConfig{});
    CHECK(out.value == 0.0);
    for (double g : out.grad_embeddings->data) CHECK(g == 0.0);
}

TEST_CASE("circle loss is zero when all labels agree") {
    Rng rng(43);
    const Tensor emb = random_matrix(rng, 4, 5);
    const LossOutput out = circle_loss(emb, {2, 2, 2, 2}, CircleConfig{});
    CHECK(out.value == 0.0);
    for (double g : out.grad_embeddings->data) CHECK(g == 0.0);
}

TEST_CASE("circle loss matches the brute-force pair enumeration") {
    Rng rng(47);
    const CircleConfig cfg; // m 0.25, gamma 32
    CHECK(cfg.margin == 0.25);
    CHECK(cfg.gamma == 32.0);
    SUBCASE("fixed B=3 instance with one positive and two negative pairs") {
        const Tensor emb({3, 4}, {0.9, 0.1, -0.2, 0.4,
                                  0.8, 0.2, -0.1, 0.5,
                                  -0.3, 0.9, 0.4, -0.6});
        const std::vector<std::size_t> labels{0, 0, 1};
        const LossOutput out = circle_loss(emb, labels, cfg);
        CHECK(out.value ==
              doctest::Approx(circle_brute_force(emb, labels, cfg)).epsilon(1e-10));
    }
    SUBCASE("random instances") {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t batch = 3 + rng.uniform_int(5);
            const Tensor emb = random_matrix(rng, batch, 4);
            const std::vector<std::size_t> labels = random_labels(rng, batch, 2);
            const LossOutput out = circle_loss(emb, labels, cfg);
            CHECK(out.value ==
                  doctest::Approx(circle_brute_force(emb, labels, cfg)).epsilon(1e-9));
        }
    }
}

TEST_CASE("circle gradient matches finite differences with frozen alpha") {
    // the alpha re-weights are constants in the analytic gradient, so the
    // oracle probes the same frozen-alpha objective
    Rng rng(53);
    int done = 0;
    while (done < 10) {
        const std::size_t batch = 3 + rng.uniform_int(5);
        const Tensor emb = random_matrix(rng, batch, 5);
        const std::vector<std::size_t> labels = random_labels(rng, batch, 2);
        const CircleConfig cfg;
        const LossOutput out = circle_loss(emb, labels, cfg);
        if (out.value == 0.0) continue; // needs both pair kinds
        const std::vector<double> alphas = circle_alpha_factors(emb, labels, cfg);
        const auto f = [&](const Tensor& e) {
            return circle_loss_value_frozen_alpha(e, labels, cfg, alphas);
        };
        CHECK(grad_check(f, emb, *out.grad_embeddings, 1e-5).max_rel_error <= 1e-4);
        ++done;
    }
}

TEST_CASE("circle loss only sees the same/different label partition") {
    Rng rng(59);
    const Tensor emb = random_matrix(rng, 5, 4);
    const std::vector<std::size_t> labels{0, 0, 1, 2, 1};
    const std::vector<std::size_t> relabeled{7, 7, 9, 4, 9};
    const CircleConfig cfg;
    const double a = circle_loss(emb, labels, cfg).value;
    const double b = circle_loss(emb, relabeled, cfg).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-15));
}

TEST_CASE("circle loss is invariant under a common rotation") {
    Rng rng(61);
    const std::size_t dim = 3;
    const Tensor emb = random_matrix(rng, 4, dim);
    const std::vector<std::size_t> labels{0, 0, 1, 1};

    // Gram-Schmidt on a random matrix gives an orthogonal Q
    double q[3][3];
    for (auto& row : q)
        for (double& v : row) v = rng.gaussian();
    for (int c = 0; c < 3; ++c) {
        for (int prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (int r = 0; r < 3; ++r) dot += q[r][c] * q[r][prev];
            for (int r = 0; r < 3; ++r) q[r][c] -= dot * q[r][prev];
        }
        double norm = 0.0;
        for (int r = 0; r < 3; ++r) norm += q[r][c] * q[r][c];
        norm = std::sqrt(norm);
        for (int r = 0; r < 3; ++r) q[r][c] /= norm;
    }
    Tensor rotated(emb.shape);
    for (std::size_t i = 0; i < 4; ++i)
        for (int r = 0; r < 3; ++r) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) acc += q[r][c] * emb.at2(i, c);
            rotated.at2(i, r) = acc;
        }
    const CircleConfig cfg;
    CHECK(circle_loss(emb, labels, cfg).value ==
          doctest::Approx(circle_loss(rotated, labels, cfg).value).epsilon(1e-9));
}

TEST_CASE("combined loss with gamma1 = 0 is exactly arcface") {
    Rng rng(67);
    const Tensor emb = random_matrix(rng, 4, 5);
    const Tensor w = random_matrix(rng, 3, 5);
    const std::vector<std::size_t> labels = random_labels(rng, 4, 3);
    CombinedLossConfig cfg;
    cfg.gamma1 = 0.0;
    const LossOutput combo = combined_loss(emb, w, labels, cfg);
    const LossOutput arc = arcface_loss(emb, w, labels, cfg.arc);
    CHECK(combo.value == doctest::Approx(arc.value).epsilon(1e-15));
    for (std::size_t i = 0; i < combo.grad_embeddings->numel(); ++i)
        CHECK((*combo.grad_embeddings)[i] ==
              doctest::Approx((*arc.grad_embeddings)[i]).epsilon(1e-15));
}

TEST_CASE("combined loss defaults follow gamma0 = 1, gamma1 = 1/beta") {
    const CombinedLossConfig cfg = CombinedLossConfig::for_batch_size(32);
    CHECK(cfg.gamma0 == 1.0);
    CHECK(cfg.gamma1 == doctest::Approx(1.0 / 32.0).epsilon(1e-15));
}

TEST_CASE("combined loss is the weighted sum of its parts") {
    Rng rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor emb = random_matrix(rng, 5, 4);
        const Tensor w = random_matrix(rng, 3, 4);
        const std::vector<std::size_t> labels = random_labels(rng, 5, 3);
        CombinedLossConfig cfg = CombinedLossConfig::for_batch_size(5);
        const LossOutput combo = combined_loss(emb, w, labels, cfg);
        const double arc = arcface_loss(emb, w, labels, cfg.arc).value;
        const double circ = circle_loss(emb, labels, cfg.circle).value;
        CHECK(combo.value ==
              doctest::Approx(cfg.gamma0 * arc + cfg.gamma1 * circ).epsilon(1e-12));
    }
}

TEST_CASE("combined loss is linear in the weights") {
    Rng rng(73);
    const Tensor emb = random_matrix(rng, 4, 4);
    const Tensor w = random_matrix(rng, 3, 4);
    const std::vector<std::size_t> labels{0, 0, 1, 2};
    CombinedLossConfig cfg = CombinedLossConfig::for_batch_size(4);
    CombinedLossConfig doubled = cfg;
    doubled.gamma0 *= 2.0;
    doubled.gamma1 *= 2.0;
    const LossOutput base = combined_loss(emb, w, labels, cfg);
    const LossOutput twice = combined_loss(emb, w, labels, doubled);
    CHECK(twice.value == doctest::Approx(2.0 * base.value).epsilon(1e-12));
    for (std::size_t i = 0; i < base.grad_embeddings->numel(); ++i)
        CHECK((*twice.grad_embeddings)[i] ==
              doctest::Approx(2.0 * (*base.grad_embeddings)[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < base.grad_class_weights->numel(); ++i)
        CHECK((*twice.grad_class_weights)[i] ==
              doctest::Approx(2.0 * (*base.grad_class_weights)[i]).epsilon(1e-12));
}

TEST_CASE("combined gradient matches finite differences") {
    Rng rng(79);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t batch = 4;
        const Tensor emb = random_matrix(rng, batch, 5);
        const Tensor w = random_matrix(rng, 3, 5);
        const std::vector<std::size_t> labels = random_labels(rng, batch, 3);
        const CombinedLossConfig cfg = CombinedLossConfig::for_batch_size(batch);
        const LossOutput out = combined_loss(emb, w, labels, cfg);
        const std::vector<double> alphas = circle_alpha_factors(emb, labels, cfg.circle);
        const auto f = [&](const Tensor& e) {
            return cfg.gamma0 * arcface_loss(e, w, labels, cfg.arc).value +
                   cfg.gamma1 * circle_loss_value_frozen_alpha(e, labels, cfg.circle, alphas);
        };
        CHECK(grad_check(f, emb, *out.grad_embeddings, 1e-5).max_rel_error <= 1e-4);
        const auto f_w = [&](const Tensor& cw) {
            return combined_loss(emb, cw, labels, cfg).value;
        };
        CHECK(grad_check(f_w, w, *out.grad_class_weights, 1e-5).max_rel_error <= 1e-4);
    }
}

TEST_CASE("kd loss is zero when teacher equals student") {
    Rng rng(83);
    const Tensor logits = random_matrix(rng, 3, 4);
    const LossOutput out = kd_loss(logits, logits, KDConfig{});
    CHECK(out.value == 0.0);
    for (double g : out.grad_logits->data) CHECK(std::fabs(g) <= 1e-15);
}

TEST_CASE("kd at T=1 against a saturated teacher approaches one-hot CE") {
    KDConfig cfg;
    cfg.temperature = 1.0;
    const Tensor teacher({1, 3}, {50.0, 0.0, 0.0});
    const Tensor student({1, 3}, {0.4, -0.3, 1.1});
    const double kd = kd_loss(student, teacher, cfg).value;
    const double ce = cross_entropy(student, Tensor({1, 3}, {1.0, 0.0, 0.0})).value;
    CHECK(std::fabs(kd - ce) <= 1e-10);
}

TEST_CASE("kd default temperature is 3 with 1:1 weights") {
    const KDConfig cfg;
    CHECK(cfg.temperature == 3.0);
    CHECK(cfg.kd_weight == 1.0);
    CHECK(cfg.ce_weight == 1.0);
}

TEST_CASE("kd loss is non-negative and vanishes only at matching distributions") {
    Rng rng(89);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t batch = 1 + rng.uniform_int(4);
        const Tensor student = random_matrix(rng, batch, 4);
        const Tensor teacher = random_matrix(rng, batch, 4);
        const double v = kd_loss(student, teacher, KDConfig{}).value;
        CHECK(v >= 0.0);
    }
    // shift invariance of softmax: shifted logits give the same tempered
    // distribution, so the loss is exactly zero
    const Tensor base({2, 3}, {0.1, 0.4, -0.2, 1.0, 2.0, 3.0});
    Tensor shifted = base;
    for (std::size_t k = 0; k < 3; ++k) shifted.at2(0, k) += 5.0;
    for (std::size_t k = 0; k < 3; ++k) shifted.at2(1, k) -= 2.0;
    CHECK(kd_loss(shifted, base, KDConfig{}).value <= 1e-12);
}

TEST_CASE("kd gradient matches finite differences") {
    Rng rng(97);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t batch = 1 + rng.uniform_int(6);
        const Tensor student = random_matrix(rng, batch, 5);
        const Tensor teacher = random_matrix(rng, batch, 5);
        const KDConfig cfg; // T = 3
        const LossOutput out = kd_loss(student, teacher, cfg);
        const auto f = [&](const Tensor& z) { return kd_loss(z, teacher, cfg).value; };
        CHECK(grad_check(f, student, *out.grad_logits, 1e-5).max_rel_error <= 1e-4);
    }
}

TEST_CASE("distill objective degenerate and additive cases") {
    Rng rng(101);
    const Tensor logits = random_matrix(rng, 2, 4);
    const Tensor labels = one_hot({1, 3}, 4);

    KDConfig no_ce;
    no_ce.ce_weight = 0.0;
    CHECK(distill_objective(logits, logits, labels, no_ce).value == 0.0);

    const KDConfig cfg;
    const Tensor teacher = random_matrix(rng, 2, 4);
    const LossOutput obj = distill_objective(logits, teacher, labels, cfg);
    const double expected =
        kd_loss(logits, teacher, cfg).value + cross_entropy(logits, labels).value;
    CHECK(obj.value == doctest::Approx(expected).epsilon(1e-12));

    const auto f = [&](const Tensor& z) {
        return distill_objective(z, teacher, labels, cfg).value;
    };
    CHECK(grad_check(f, logits, *obj.grad_logits, 1e-5).max_rel_error <= 1e-4);
}

TEST_CASE("losses are permutation equivariant in the batch") {
    Rng rng(103);
    const std::size_t batch = 5, dim = 4, classes = 3;
    const Tensor emb = random_matrix(rng, batch, dim);
    const Tensor w = random_matrix(rng, classes, dim);
    const std::vector<std::size_t> labels = random_labels(rng, batch, classes);

    // reverse the batch
    Tensor emb_rev(emb.shape);
    std::vector<std::size_t> labels_rev(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        labels_rev[i] = labels[batch - 1 - i];
        for (std::size_t k = 0; k < dim; ++k) emb_rev.at2(i, k) = emb.at2(batch - 1 - i, k);
    }

    const CombinedLossConfig cfg = CombinedLossConfig::for_batch_size(batch);
    const LossOutput a = combined_loss(emb, w, labels, cfg);
    const LossOutput b = combined_loss(emb_rev, w, labels_rev, cfg);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t k = 0; k < dim; ++k)
            CHECK((*a.grad_embeddings).at2(batch - 1 - i, k) ==
                  doctest::Approx((*b.grad_embeddings).at2(i, k)).epsilon(1e-10));
}

TEST_CASE("weighted arcface rows scale their contribution") {
    Rng rng(107);
    const Tensor emb = random_matrix(rng, 3, 4);
    const Tensor w = random_matrix(rng, 3, 4);
    const std::vector<std::size_t> labels{0, 1, 2};

    const LossOutput full = arcface_loss(emb, w, labels, ArcFaceConfig{});
    const LossOutput zeroed =
        arcface_loss_weighted(emb, w, labels, {0.0, 0.0, 0.0}, ArcFaceConfig{});
    CHECK(zeroed.value == 0.0);
    for (double g : zeroed.grad_embeddings->data) CHECK(g == 0.0);

    // lambda-weighted two-term mix equals the weighted sum of the two
    // hard-label losses
    const std::vector<std::size_t> partner{1, 2, 0};
    const double lam = 0.7;
    const LossOutput own =
        arcface_loss_weighted(emb, w, labels, {lam, lam, lam}, ArcFaceConfig{});
    const LossOutput other = arcface_loss_weighted(emb, w, partner,
                                                   {1 - lam, 1 - lam, 1 - lam},
                                                   ArcFaceConfig{});
    const double direct = own.value + other.value;
    const double manual = lam * arcface_loss(emb, w, labels, ArcFaceConfig{}).value +
                          (1 - lam) * arcface_loss(emb, w, partner, ArcFaceConfig{}).value;
    CHECK(direct == doctest::Approx(manual).epsilon(1e-12));
    CHECK(full.value == doctest::Approx(arcface_loss_weighted(emb, w, labels,
                                                              {1.0, 1.0, 1.0},
                                                              ArcFaceConfig{})
                                            .value)
                            .epsilon(1e-15));
}
