#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fgrec/rng.hpp"
#include "fgrec/tensor.hpp"

namespace fgrec {

struct AugmentConfig {
    double crop_scale_lo = 0.75;
    double crop_scale_hi = 1.0;
    double flip_prob = 0.5;
    double max_rotate_deg = 15.0;
    double jitter_strength = 0.1;
    bool cutmix_enabled = false;
    double cutmix_alpha = 1.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Images mixed with a partner plus their exact surviving-label weight.
struct CutmixRecord {
    double lambda_adjusted = 1.0; // 1 - box_area/(H*W), exact
    std::size_t partner_index = 0;
    std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0; // half-open pixel bounds
};

struct Batch {
    Tensor images;      // B x C x H x W
    Tensor soft_labels; // B x K, rows on the simplex
};

// Corner-aligned bilinear resize; same-size calls reproduce the input
// exactly.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

Tensor crop(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t h,
            std::size_t w);

// Samples an area fraction in [lo, hi], crops a square of that area and
// resizes to out_size. A sub-pixel sample is retried up to 10 times and then
// falls back to a center crop.
Tensor random_resized_crop(const Tensor& image, std::size_t out_size, Rng& rng,
                           double scale_lo, double scale_hi);

Tensor flip_horizontal(const Tensor& image);

Tensor horizontal_flip(const Tensor& image, Rng& rng, double p);

// Rotation about the image center with bilinear resampling; out-of-bounds
// samples take the fill value. +90 degrees on a square image equals
// transpose followed by a horizontal flip.
Tensor rotate(const Tensor& image, double degrees, double fill = 0.0);

// Per-channel affine jitter v*(1+a_c) + b_c with a, b ~ U(-strength, strength),
// clamped to [0, 1].
Tensor color_jitter(const Tensor& image, Rng& rng, double strength);

// Clipped cutmix box for a sampled lambda and box center; exposed so the
// box arithmetic is testable without going through the sampler.
CutmixRecord cutmix_box(std::size_t height, std::size_t width, double lambda,
                        std::size_t center_y, std::size_t center_x);

// One lambda ~ Beta(alpha, alpha) and one box per call; every image receives
// the box region from a permuted partner and labels mix by the exact
// surviving-pixel fraction.
std::pair<Batch, std::vector<CutmixRecord>> cutmix(const Batch& batch, double alpha,
                                                   Rng& rng);

// Four corner crops plus the center crop, in the order TL, TR, BL, BR, C.
std::array<Tensor, 5> five_crop(const Tensor& image, std::size_t crop_size);

// Full train-time pipeline for one image: random resized crop, horizontal
// flip, rotation, color jitter. Cutmix happens at batch level.
Tensor augment_image(const Tensor& image, std::size_t out_size, const AugmentConfig& cfg,
                     Rng& rng);

} // namespace fgrec
