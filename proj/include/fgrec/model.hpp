#pragma once

#include <cstdint>
#include <vector>

#include "fgrec/tensor.hpp"

namespace fgrec {

// MLP feature extractor plus a normalized classification head. arch lists
// the layer widths starting at the flattened input dim and ending at the
// embedding dim; every layer is affine followed by ReLU.
struct ModelParams {
    std::vector<std::size_t> arch;   // [input, hidden..., embed]
    std::vector<Tensor> weights;     // weights[l]: arch[l+1] x arch[l]
    std::vector<Tensor> biases;      // biases[l]: arch[l+1]
    Tensor class_weights;            // K x embed

    std::size_t layer_count() const { return weights.size(); }
    std::size_t input_dim() const { return arch.front(); }
    std::size_t embed_dim() const { return arch.back(); }
    std::size_t class_count() const { return class_weights.shape[0]; }
    std::size_t parameter_count() const;
};

// Parameter-shaped gradient accumulator.
struct ModelGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
    Tensor class_weights;

    static ModelGrads zeros_like(const ModelParams& params);
};

struct ForwardCache {
    Tensor input;                       // B x input_dim, flattened images
    std::vector<Tensor> preactivations; // per layer, B x arch[l+1]
    std::vector<Tensor> activations;    // per layer, post-ReLU
};

// Deterministic Glorot-uniform init: weights ~ U(-a, a) with
// a = sqrt(6/(in+out)), biases zero, head rows drawn the same way.
ModelParams init_params(const std::vector<std::size_t>& arch, std::size_t class_count,
                        std::uint64_t seed);

// Flattens B x C x H x W images and runs the layers; the last activation is
// the embedding (pre-normalization).
std::pair<Tensor, ForwardCache> forward(const ModelParams& params, const Tensor& images);

// Exact reverse-mode gradients through the ReLU/affine stack. The head
// gradient is not produced here; losses own it.
ModelGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const Tensor& grad_embeddings);

// Margin-free inference head: s * cosine(embedding, class weight).
Tensor predict_logits(const ModelParams& params, const Tensor& images, double scale);

} // namespace fgrec
