#include "fgrec/model.hpp"

#include <cmath>

#include "fgrec/losses.hpp"
#include "fgrec/rng.hpp"

namespace fgrec {

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& w : weights) n += w.numel();
    for (const Tensor& b : biases) n += b.numel();
    return n + class_weights.numel();
}

ModelGrads ModelGrads::zeros_like(const ModelParams& params) {
    ModelGrads g;
    for (const Tensor& w : params.weights) g.weights.emplace_back(w.shape);
    for (const Tensor& b : params.biases) g.biases.emplace_back(b.shape);
    g.class_weights = Tensor(params.class_weights.shape);
    return g;
}

ModelParams init_params(const std::vector<std::size_t>& arch, std::size_t class_count,
                        std::uint64_t seed) {
    if (arch.empty()) throw BadArchitecture("architecture width list is empty");
    for (std::size_t w : arch)
        if (w < 1) throw BadArchitecture("layer widths must be >= 1");
    if (class_count < 2) throw BadArchitecture("class count must be >= 2");

    Rng rng(seed);
    ModelParams params;
    params.arch = arch;
    for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
        const std::size_t fan_in = arch[l], fan_out = arch[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor w({fan_out, fan_in});
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(std::vector<std::size_t>{fan_out});
    }
    const std::size_t embed = arch.back();
    const double bound = std::sqrt(6.0 / static_cast<double>(embed + class_count));
    params.class_weights = Tensor({class_count, embed});
    for (double& v : params.class_weights.data) v = rng.uniform(-bound, bound);
    return params;
}

std::pair<Tensor, ForwardCache> forward(const ModelParams& params, const Tensor& images) {
    if (images.ndim() != 2 && images.ndim() != 4)
        throw ShapeMismatch("forward: images must be B x C x H x W or already flat");
    const std::size_t batch = images.shape[0];
    const std::size_t flat = images.numel() / batch;
    if (flat != params.input_dim())
        throw ShapeMismatch("forward: flattened image dim differs from input width");

    ForwardCache cache;
    cache.input = Tensor({batch, flat}, images.data);

    const Tensor* current = &cache.input;
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        const Tensor& w = params.weights[l];
        const Tensor& b = params.biases[l];
        const std::size_t in_dim = w.shape[1], out_dim = w.shape[0];
        Tensor pre({batch, out_dim});
        for (std::size_t i = 0; i < batch; ++i) {
            const double* xrow = &current->data[i * in_dim];
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double* wrow = &w.data[o * in_dim];
                double acc = b[o];
                for (std::size_t k = 0; k < in_dim; ++k) acc += wrow[k] * xrow[k];
                pre.at2(i, o) = acc;
            }
        }
        Tensor act = pre;
        for (double& v : act.data) v = v > 0.0 ? v : 0.0;
        cache.preactivations.push_back(std::move(pre));
        cache.activations.push_back(std::move(act));
        current = &cache.activations.back();
    }
    return {cache.activations.back(), cache};
}

ModelGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const Tensor& grad_embeddings) {
    if (cache.activations.size() != params.layer_count())
        throw StaleCache("backward: cache depth differs from parameter stack");
    const std::size_t batch = cache.input.shape[0];
    require_shape(grad_embeddings, {batch, params.embed_dim()}, "grad_embeddings");
    for (std::size_t l = 0; l < params.layer_count(); ++l)
        if (cache.preactivations[l].shape[1] != params.weights[l].shape[0])
            throw StaleCache("backward: cache shapes disagree with parameters");

    ModelGrads grads = ModelGrads::zeros_like(params);
    Tensor delta = grad_embeddings; // gradient w.r.t. current layer activation

    for (std::size_t li = params.layer_count(); li-- > 0;) {
        const Tensor& pre = cache.preactivations[li];
        const Tensor& below = li == 0 ? cache.input : cache.activations[li - 1];
        const std::size_t out_dim = pre.shape[1];
        const std::size_t in_dim = below.shape[1];

        // ReLU: subgradient at 0 is 0.
        Tensor dz = delta;
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t o = 0; o < out_dim; ++o)
                if (pre.at2(i, o) <= 0.0) dz.at2(i, o) = 0.0;

        Tensor& gw = grads.weights[li];
        Tensor& gb = grads.biases[li];
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double g = dz.at2(i, o);
                if (g == 0.0) continue;
                gb[o] += g;
                for (std::size_t k = 0; k < in_dim; ++k)
                    gw.at2(o, k) += g * below.at2(i, k);
            }

        if (li == 0) break;
        Tensor next({batch, in_dim});
        const Tensor& w = params.weights[li];
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double g = dz.at2(i, o);
                if (g == 0.0) continue;
                for (std::size_t k = 0; k < in_dim; ++k)
                    next.at2(i, k) += g * w.at2(o, k);
            }
        delta = std::move(next);
    }
    return grads;
}

Tensor predict_logits(const ModelParams& params, const Tensor& images, double scale) {
    return cosine_logits(forward(params, images).first, params.class_weights, scale);
}

} // namespace fgrec
