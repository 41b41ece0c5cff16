#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "fgrec/errors.hpp"

namespace fgrec {

// Dense row-major float64 array with an explicit shape. This is the only
// numeric carrier in the library; no broadcasting, no views.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0)
        : shape(std::move(shape_)), data(numel_of(shape), fill) {}

    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (data.size() != numel_of(shape))
            throw ShapeMismatch("tensor data length does not match shape product");
    }

    static Tensor zeros(std::vector<std::size_t> shape_) { return Tensor(std::move(shape_)); }

    // Construction point for external inputs: rejects NaN/Inf.
    static Tensor from_data(std::vector<std::size_t> shape_, std::vector<double> data_) {
        Tensor t(std::move(shape_), std::move(data_));
        t.ensure_finite("tensor input");
        return t;
    }

    static Tensor vector(std::initializer_list<double> values) {
        std::vector<double> d(values);
        const std::size_t n = d.size();
        return Tensor({n}, std::move(d));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return s.empty() ? 0 : n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }
    std::size_t extent(std::size_t axis) const { return shape.at(axis); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    // C x H x W pixel access for image tensors.
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * shape[1] + y) * shape[2] + x];
    }

    // B x C x H x W access for batched images.
    double& at4(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
        return data[((b * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    double at4(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        return data[((b * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    void ensure_finite(const std::string& what) const {
        for (double v : data)
            if (!std::isfinite(v))
                throw Error(what + " contains a non-finite entry");
    }
};

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                          const std::string& what) {
    if (t.shape != shape)
        throw ShapeMismatch(what + " has unexpected shape");
}

} // namespace fgrec
