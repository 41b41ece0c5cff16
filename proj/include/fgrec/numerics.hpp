#pragma once

#include <functional>

#include "fgrec/tensor.hpp"

namespace fgrec {

inline constexpr double kNormEps = 1e-12;

// Cosines are clamped away from +-1 before any arccos/sqrt(1-c^2) so the
// margin math never sees an exact pole.
inline constexpr double kCosClamp = 1e-7;

inline double clamp_cosine(double c) {
    const double lo = -1.0 + kCosClamp;
    const double hi = 1.0 - kCosClamp;
    return c < lo ? lo : (c > hi ? hi : c);
}

double l2_norm(const Tensor& v);

// Unit-norm copy of v. Throws ZeroVector when the norm is at or below 1e-12.
Tensor l2_normalize(const Tensor& v);

// Max-subtracted softmax over a 1-D tensor.
Tensor softmax(const Tensor& logits);

// log(softmax(logits)) without forming intermediate exponentials of large
// magnitude.
Tensor log_softmax(const Tensor& logits);

double logsumexp(const std::vector<double>& xs);

using ScalarFn = std::function<double(const Tensor&)>;

// Central difference (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h);

struct GradCheckReport {
    double max_rel_error = 0.0;
    Tensor per_coordinate_errors;
    double step = 0.0;
};

// Relative error metric |a-n| / max(1, |a|, |n|) per coordinate; the report
// carries the max alongside the full error map.
GradCheckReport grad_check(const ScalarFn& f, const Tensor& x,
                           const Tensor& analytic_grad, double h = 1e-5);

} // namespace fgrec
