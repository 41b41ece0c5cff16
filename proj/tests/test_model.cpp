#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fgrec/losses.hpp"
#include "fgrec/model.hpp"
#include "fgrec/numerics.hpp"
#include "fgrec/rng.hpp"

using namespace fgrec;

namespace {

Tensor random_images(Rng& rng, std::size_t batch, std::size_t channels, std::size_t side) {
    Tensor out({batch, channels, side, side});
    for (double& v : out.data) v = rng.uniform(0.0, 1.0);
    return out;
}

} // namespace

TEST_CASE("init_params is deterministic per seed") {
    const ModelParams a = init_params({8, 4}, 3, 42);
    const ModelParams b = init_params({8, 4}, 3, 42);
    const ModelParams c = init_params({8, 4}, 3, 43);
    CHECK(a.weights[0].data == b.weights[0].data);
    CHECK(a.class_weights.data == b.class_weights.data);
    CHECK(a.weights[0].data != c.weights[0].data);
}

TEST_CASE("init_params parameter count follows sum(in*out + out) + K*d") {
    const std::vector<std::size_t> arch{48, 32, 16};
    const std::size_t classes = 20;
    const ModelParams params = init_params(arch, classes, 1);
    std::size_t expected = 0;
    for (std::size_t l = 0; l + 1 < arch.size(); ++l)
        expected += arch[l] * arch[l + 1] + arch[l + 1];
    expected += classes * arch.back();
    CHECK(params.parameter_count() == expected);
    CHECK(expected == 2416); // 48*32+32 + 32*16+16 + 20*16
}

TEST_CASE("init_params rejects bad architectures") {
    CHECK_THROWS_AS(init_params({}, 4, 1), BadArchitecture);
    CHECK_THROWS_AS(init_params({8, 0}, 4, 1), BadArchitecture);
    CHECK_THROWS_AS(init_params({8, 4}, 1, 1), BadArchitecture);
}

TEST_CASE("init_params draws stay inside the Glorot bound with zero biases") {
    const ModelParams params = init_params({10, 6}, 4, 9);
    const double bound = std::sqrt(6.0 / (10 + 6));
    for (double v : params.weights[0].data) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
    for (double v : params.biases[0].data) CHECK(v == 0.0);
}

TEST_CASE("forward with zero parameters gives zero embeddings") {
    ModelParams params = init_params({12, 5}, 3, 7);
    for (Tensor& w : params.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    Rng rng(1);
    const Tensor images = random_images(rng, 2, 3, 2); // 3*2*2 = 12
    const auto [emb, cache] = forward(params, images);
    for (double v : emb.data) CHECK(v == 0.0);
}

TEST_CASE("forward through an identity layer is ReLU of the flattened input") {
    ModelParams params = init_params({4, 4}, 3, 7);
    std::fill(params.weights[0].data.begin(), params.weights[0].data.end(), 0.0);
    for (std::size_t i = 0; i < 4; ++i) params.weights[0].at2(i, i) = 1.0;
    const Tensor images({1, 1, 2, 2}, {0.5, -0.25, 0.0, 1.5});
    const auto [emb, cache] = forward(params, images);
    CHECK(emb.at2(0, 0) == 0.5);
    CHECK(emb.at2(0, 1) == 0.0); // negative input clipped by ReLU
    CHECK(emb.at2(0, 2) == 0.0);
    CHECK(emb.at2(0, 3) == 1.5);
}

TEST_CASE("forward matches a per-coordinate recomputation") {
    Rng rng(13);
    const ModelParams params = init_params({12, 6, 4}, 3, 99);
    const Tensor images = random_images(rng, 3, 3, 2);
    const auto [emb, cache] = forward(params, images);

    for (std::size_t i = 0; i < 3; ++i) {
        // layer 1 by hand
        std::vector<double> hidden(6);
        for (std::size_t o = 0; o < 6; ++o) {
            double acc = params.biases[0][o];
            for (std::size_t k = 0; k < 12; ++k)
                acc += params.weights[0].at2(o, k) * images.data[i * 12 + k];
            hidden[o] = std::max(0.0, acc);
        }
        for (std::size_t o = 0; o < 4; ++o) {
            double acc = params.biases[1][o];
            for (std::size_t k = 0; k < 6; ++k)
                acc += params.weights[1].at2(o, k) * hidden[k];
            CHECK(emb.at2(i, o) == doctest::Approx(std::max(0.0, acc)).epsilon(1e-14));
        }
    }
}

TEST_CASE("forward rejects mismatched input dims") {
    const ModelParams params = init_params({12, 4}, 3, 7);
    Rng rng(2);
    CHECK_THROWS_AS(forward(params, random_images(rng, 2, 3, 3)), ShapeMismatch);
}

TEST_CASE("backward of a zero embedding gradient is zero everywhere") {
    Rng rng(17);
    const ModelParams params = init_params({12, 6, 4}, 3, 7);
    const Tensor images = random_images(rng, 2, 3, 2);
    const auto [emb, cache] = forward(params, images);
    const ModelGrads grads = backward(params, cache, Tensor({2, 4}));
    for (const Tensor& g : grads.weights)
        for (double v : g.data) CHECK(v == 0.0);
    for (const Tensor& g : grads.biases)
        for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("dead ReLU units receive no incoming-weight gradient") {
    ModelParams params = init_params({3, 2}, 2, 5);
    // unit 0 sees a large negative bias: dead for positive inputs
    params.biases[0][0] = -100.0;
    const Tensor images({1, 1, 1, 3}, {0.2, 0.4, 0.6});
    const auto [emb, cache] = forward(params, images);
    CHECK(emb.at2(0, 0) == 0.0);
    Tensor grad_emb({1, 2}, {1.0, 1.0});
    const ModelGrads grads = backward(params, cache, grad_emb);
    for (std::size_t k = 0; k < 3; ++k) CHECK(grads.weights[0].at2(0, k) == 0.0);
    CHECK(grads.biases[0][0] == 0.0);
}

TEST_CASE("full pipeline gradient matches finite differences for every parameter") {
    Rng rng(19);
    ModelParams params = init_params({12, 6, 5}, 3, 21);
    const Tensor images = random_images(rng, 4, 3, 2);
    const std::vector<std::size_t> labels{0, 1, 2, 1};
    const ArcFaceConfig arc;

    const auto loss_at = [&](const ModelParams& p) {
        auto [emb, cache] = forward(p, images);
        return arcface_loss(emb, p.class_weights, labels, arc).value;
    };

    auto [emb, cache] = forward(params, images);
    const LossOutput head = arcface_loss(emb, params.class_weights, labels, arc);
    ModelGrads grads = backward(params, cache, *head.grad_embeddings);

    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        const auto f_w = [&](const Tensor& t) {
            ModelParams probe = params;
            probe.weights[l] = t;
            return loss_at(probe);
        };
        CHECK(grad_check(f_w, params.weights[l], grads.weights[l], 1e-5).max_rel_error <=
              1e-4);
        const auto f_b = [&](const Tensor& t) {
            ModelParams probe = params;
            probe.biases[l] = t;
            return loss_at(probe);
        };
        CHECK(grad_check(f_b, params.biases[l], grads.biases[l], 1e-5).max_rel_error <=
              1e-4);
    }
    const auto f_head = [&](const Tensor& t) {
        ModelParams probe = params;
        probe.class_weights = t;
        return loss_at(probe);
    };
    CHECK(grad_check(f_head, params.class_weights, *head.grad_class_weights, 1e-5)
              .max_rel_error <= 1e-4);
}

TEST_CASE("backward rejects a stale cache") {
    Rng rng(23);
    const ModelParams a = init_params({12, 6, 4}, 3, 7);
    const ModelParams b = init_params({12, 8, 4}, 3, 7);
    const auto [emb, cache] = forward(a, random_images(rng, 2, 3, 2));
    CHECK_THROWS_AS(backward(b, cache, Tensor({2, 4})), StaleCache);
}

TEST_CASE("predict_logits hits the scale for an aligned class weight") {
    ModelParams params = init_params({4, 4}, 3, 7);
    std::fill(params.weights[0].data.begin(), params.weights[0].data.end(), 0.0);
    for (std::size_t i = 0; i < 4; ++i) params.weights[0].at2(i, i) = 1.0;
    const Tensor images({1, 1, 2, 2}, {0.5, 0.25, 0.0, 1.0});
    // class 1 weight equals the embedding itself
    for (std::size_t k = 0; k < 4; ++k)
        params.class_weights.at2(1, k) = images.data[k];
    const Tensor logits = predict_logits(params, images, 32.0);
    // cosine clamps just below 1
    CHECK(logits.at2(0, 1) == doctest::Approx(32.0).epsilon(1e-6));
    CHECK(logits.at2(0, 1) <= 32.0);
}

TEST_CASE("predict_logits argmax is invariant to positive scaling") {
    Rng rng(29);
    const ModelParams params = init_params({12, 6, 4}, 5, 31);
    const Tensor images = random_images(rng, 3, 3, 2);
    const Tensor once = predict_logits(params, images, 16.0);
    const Tensor twice = predict_logits(params, images, 32.0);
    for (std::size_t i = 0; i < 3; ++i) {
        std::size_t best_once = 0, best_twice = 0;
        for (std::size_t k = 1; k < 5; ++k) {
            if (once.at2(i, k) > once.at2(i, best_once)) best_once = k;
            if (twice.at2(i, k) > twice.at2(i, best_twice)) best_twice = k;
        }
        CHECK(best_once == best_twice);
        for (std::size_t k = 0; k < 5; ++k)
            CHECK(twice.at2(i, k) == doctest::Approx(2.0 * once.at2(i, k)).epsilon(1e-12));
    }
}

TEST_CASE("predict_logits agrees with arcface_logits at margin zero") {
    Rng rng(31);
    const ModelParams params = init_params({12, 6, 4}, 5, 37);
    const Tensor images = random_images(rng, 3, 3, 2);
    const auto [emb, cache] = forward(params, images);
    ArcFaceConfig cfg;
    cfg.margin = 0.0;
    cfg.scale = 32.0;
    const Tensor via_head = predict_logits(params, images, 32.0);
    const Tensor via_arc =
        arcface_logits(emb, params.class_weights, {0, 0, 0}, cfg);
    for (std::size_t i = 0; i < via_head.numel(); ++i)
        CHECK(via_head[i] == doctest::Approx(via_arc[i]).epsilon(1e-12));
}

TEST_CASE("forward is bit-deterministic") {
    Rng rng(41);
    const Tensor images = random_images(rng, 2, 3, 2);
    const ModelParams params = init_params({12, 6, 4}, 3, 7);
    const auto [a, ca] = forward(params, images);
    const auto [b, cb] = forward(params, images);
    CHECK(a.data == b.data);
}
