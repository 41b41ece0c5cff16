#include "fgrec/augment.hpp"

#include <algorithm>
#include <cmath>

#include "fgrec/errors.hpp"

namespace fgrec {
namespace {

void require_image(const Tensor& image) {
    if (image.ndim() != 3) throw ShapeMismatch("expected a C x H x W image tensor");
}

// Bilinear lookup at a fractional source position; the caller guarantees
// the point is inside [0, H-1] x [0, W-1].
double sample_bilinear(const Tensor& image, std::size_t channel, double sy, double sx) {
    const std::size_t height = image.shape[1], width = image.shape[2];
    const std::size_t y0 = static_cast<std::size_t>(sy);
    const std::size_t x0 = static_cast<std::size_t>(sx);
    const std::size_t y1 = std::min(y0 + 1, height - 1);
    const std::size_t x1 = std::min(x0 + 1, width - 1);
    const double fy = sy - static_cast<double>(y0);
    const double fx = sx - static_cast<double>(x0);
    const double top = (1.0 - fx) * image.at3(channel, y0, x0) + fx * image.at3(channel, y0, x1);
    const double bot = (1.0 - fx) * image.at3(channel, y1, x0) + fx * image.at3(channel, y1, x1);
    return (1.0 - fy) * top + fy * bot;
}

// Corner-aligned source coordinate for an output index.
double src_coord(std::size_t out_idx, std::size_t out_len, std::size_t src_len) {
    if (out_len <= 1) return 0.5 * static_cast<double>(src_len - 1);
    return static_cast<double>(out_idx) * static_cast<double>(src_len - 1) /
           static_cast<double>(out_len - 1);
}

} // namespace

void AugmentConfig::validate() const {
    if (!(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0))
        throw ConfigInvalid("crop scale range must satisfy 0 < lo <= hi <= 1");
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw ConfigInvalid("flip probability must lie in [0, 1]");
    if (max_rotate_deg < 0.0) throw ConfigInvalid("max rotation must be >= 0");
    if (cutmix_alpha <= 0.0) throw ConfigInvalid("cutmix alpha must be positive");
    if (jitter_strength < 0.0) throw ConfigInvalid("jitter strength must be >= 0");
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    require_image(image);
    if (out_h < 1 || out_w < 1) throw ConfigInvalid("resize target must be >= 1 pixel");
    const std::size_t channels = image.shape[0];
    Tensor out({channels, out_h, out_w});
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < out_h; ++y) {
            const double sy = src_coord(y, out_h, image.shape[1]);
            for (std::size_t x = 0; x < out_w; ++x) {
                const double sx = src_coord(x, out_w, image.shape[2]);
                out.at3(c, y, x) = sample_bilinear(image, c, sy, sx);
            }
        }
    return out;
}

Tensor crop(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t h,
            std::size_t w) {
    require_image(image);
    if (y0 + h > image.shape[1] || x0 + w > image.shape[2])
        throw CropTooLarge("crop region exceeds image bounds");
    const std::size_t channels = image.shape[0];
    Tensor out({channels, h, w});
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                out.at3(c, y, x) = image.at3(c, y0 + y, x0 + x);
    return out;
}

Tensor random_resized_crop(const Tensor& image, std::size_t out_size, Rng& rng,
                           double scale_lo, double scale_hi) {
    require_image(image);
    if (out_size < 1) throw ConfigInvalid("crop output size must be >= 1");
    const std::size_t height = image.shape[1], width = image.shape[2];
    const std::size_t max_side = std::min(height, width);
    const double area = static_cast<double>(height) * static_cast<double>(width);

    std::size_t side = 0;
    for (int attempt = 0; attempt < 10 && side == 0; ++attempt) {
        const double frac = rng.uniform(scale_lo, scale_hi);
        const auto candidate =
            static_cast<std::size_t>(std::llround(std::sqrt(frac * area)));
        if (candidate >= 1) side = std::min(candidate, max_side);
    }
    if (side == 0) {
        // Degenerate sample after 10 tries: center-crop fallback.
        side = max_side;
        const std::size_t y0 = (height - side) / 2, x0 = (width - side) / 2;
        return resize_bilinear(crop(image, y0, x0, side, side), out_size, out_size);
    }
    const std::size_t y0 = static_cast<std::size_t>(rng.uniform_int(height - side + 1));
    const std::size_t x0 = static_cast<std::size_t>(rng.uniform_int(width - side + 1));
    return resize_bilinear(crop(image, y0, x0, side, side), out_size, out_size);
}

Tensor flip_horizontal(const Tensor& image) {
    require_image(image);
    Tensor out(image.shape);
    const std::size_t channels = image.shape[0], height = image.shape[1],
                      width = image.shape[2];
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                out.at3(c, y, x) = image.at3(c, y, width - 1 - x);
    return out;
}

Tensor horizontal_flip(const Tensor& image, Rng& rng, double p) {
    if (p < 0.0 || p > 1.0) throw ConfigInvalid("flip probability must lie in [0, 1]");
    if (p > 0.0 && rng.bernoulli(p)) return flip_horizontal(image);
    return image;
}

Tensor rotate(const Tensor& image, double degrees, double fill) {
    require_image(image);
    if (std::fabs(degrees) > 180.0)
        throw ConfigInvalid("rotation angle must lie in [-180, 180]");
    const std::size_t channels = image.shape[0], height = image.shape[1],
                      width = image.shape[2];
    const double theta = degrees * M_PI / 180.0;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double cy = 0.5 * static_cast<double>(height - 1);
    const double cx = 0.5 * static_cast<double>(width - 1);

    // Samples a hair outside the grid from rounding still count as inside.
    constexpr double kEdgeEps = 1e-9;
    const double max_y = static_cast<double>(height - 1);
    const double max_x = static_cast<double>(width - 1);
    Tensor out(image.shape);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double u = static_cast<double>(x) - cx;
            const double v = static_cast<double>(y) - cy;
            double sx = cx + cos_t * u + sin_t * v;
            double sy = cy - sin_t * u + cos_t * v;
            const bool inside = sy >= -kEdgeEps && sy <= max_y + kEdgeEps &&
                                sx >= -kEdgeEps && sx <= max_x + kEdgeEps;
            sx = std::clamp(sx, 0.0, max_x);
            sy = std::clamp(sy, 0.0, max_y);
            for (std::size_t c = 0; c < channels; ++c)
                out.at3(c, y, x) = inside ? sample_bilinear(image, c, sy, sx) : fill;
        }
    return out;
}

Tensor color_jitter(const Tensor& image, Rng& rng, double strength) {
    require_image(image);
    if (strength < 0.0) throw ConfigInvalid("jitter strength must be >= 0");
    Tensor out = image;
    const std::size_t channels = image.shape[0];
    const std::size_t plane = image.shape[1] * image.shape[2];
    for (std::size_t c = 0; c < channels; ++c) {
        const double gain = 1.0 + rng.uniform(-strength, strength);
        const double bias = rng.uniform(-strength, strength);
        for (std::size_t i = 0; i < plane; ++i) {
            double& v = out.data[c * plane + i];
            v = std::clamp(v * gain + bias, 0.0, 1.0);
        }
    }
    return out;
}

CutmixRecord cutmix_box(std::size_t height, std::size_t width, double lambda,
                        std::size_t center_y, std::size_t center_x) {
    const double cut_frac = std::sqrt(1.0 - lambda);
    const auto box_w = static_cast<std::size_t>(std::floor(static_cast<double>(width) * cut_frac));
    const auto box_h = static_cast<std::size_t>(std::floor(static_cast<double>(height) * cut_frac));

    const std::ptrdiff_t half_w = static_cast<std::ptrdiff_t>(box_w / 2);
    const std::ptrdiff_t half_h = static_cast<std::ptrdiff_t>(box_h / 2);
    const std::ptrdiff_t raw_x0 = static_cast<std::ptrdiff_t>(center_x) - half_w;
    const std::ptrdiff_t raw_y0 = static_cast<std::ptrdiff_t>(center_y) - half_h;

    CutmixRecord rec;
    rec.x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, raw_x0));
    rec.y0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, raw_y0));
    rec.x1 = std::min(width, static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                                 0, raw_x0 + static_cast<std::ptrdiff_t>(box_w))));
    rec.y1 = std::min(height, static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                                  0, raw_y0 + static_cast<std::ptrdiff_t>(box_h))));
    const double box_area =
        static_cast<double>((rec.x1 - rec.x0) * (rec.y1 - rec.y0));
    rec.lambda_adjusted =
        1.0 - box_area / (static_cast<double>(height) * static_cast<double>(width));
    return rec;
}

std::pair<Batch, std::vector<CutmixRecord>> cutmix(const Batch& batch, double alpha,
                                                   Rng& rng) {
    if (batch.images.ndim() != 4)
        throw ShapeMismatch("cutmix: batch images must be B x C x H x W");
    const std::size_t size = batch.images.shape[0];
    if (size < 2) throw BatchTooSmall("cutmix needs a batch of at least 2");
    if (batch.soft_labels.ndim() != 2 || batch.soft_labels.shape[0] != size)
        throw ShapeMismatch("cutmix: label rows must match batch size");
    if (alpha <= 0.0) throw ConfigInvalid("cutmix alpha must be positive");

    const std::size_t channels = batch.images.shape[1];
    const std::size_t height = batch.images.shape[2];
    const std::size_t width = batch.images.shape[3];
    const std::size_t class_count = batch.soft_labels.shape[1];

    // Sampling order is fixed: lambda, partner permutation, box center.
    const double lambda = rng.beta_symmetric(alpha);
    const std::vector<std::size_t> partners = rng.permutation(size);
    const std::size_t center_y = static_cast<std::size_t>(rng.uniform_int(height));
    const std::size_t center_x = static_cast<std::size_t>(rng.uniform_int(width));
    const CutmixRecord box = cutmix_box(height, width, lambda, center_y, center_x);

    Batch out{batch.images, Tensor({size, class_count})};
    std::vector<CutmixRecord> records(size, box);
    for (std::size_t i = 0; i < size; ++i) {
        const std::size_t partner = partners[i];
        records[i].partner_index = partner;
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t y = box.y0; y < box.y1; ++y)
                for (std::size_t x = box.x0; x < box.x1; ++x)
                    out.images.at4(i, c, y, x) = batch.images.at4(partner, c, y, x);
        const double lam = box.lambda_adjusted;
        for (std::size_t k = 0; k < class_count; ++k)
            out.soft_labels.at2(i, k) = lam * batch.soft_labels.at2(i, k) +
                                        (1.0 - lam) * batch.soft_labels.at2(partner, k);
    }
    return {std::move(out), std::move(records)};
}

std::array<Tensor, 5> five_crop(const Tensor& image, std::size_t crop_size) {
    require_image(image);
    const std::size_t height = image.shape[1], width = image.shape[2];
    if (crop_size > std::min(height, width))
        throw CropTooLarge("five_crop size exceeds image bounds");
    const std::size_t cy = (height - crop_size) / 2;
    const std::size_t cx = (width - crop_size) / 2;
    return {crop(image, 0, 0, crop_size, crop_size),
            crop(image, 0, width - crop_size, crop_size, crop_size),
            crop(image, height - crop_size, 0, crop_size, crop_size),
            crop(image, height - crop_size, width - crop_size, crop_size, crop_size),
            crop(image, cy, cx, crop_size, crop_size)};
}

Tensor augment_image(const Tensor& image, std::size_t out_size, const AugmentConfig& cfg,
                     Rng& rng) {
    cfg.validate();
    Tensor view =
        random_resized_crop(image, out_size, rng, cfg.crop_scale_lo, cfg.crop_scale_hi);
    view = horizontal_flip(view, rng, cfg.flip_prob);
    if (cfg.max_rotate_deg > 0.0)
        view = rotate(view, rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg),
                      /*fill=*/0.5); // neutral gray, zero after input centering
    if (cfg.jitter_strength > 0.0) view = color_jitter(view, rng, cfg.jitter_strength);
    return view;
}

} // namespace fgrec
