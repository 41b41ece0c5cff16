#include "fgrec/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fgrec {

double l2_norm(const Tensor& v) {
    double sum = 0.0;
    for (double x : v.data) sum += x * x;
    return std::sqrt(sum);
}

Tensor l2_normalize(const Tensor& v) {
    const double norm = l2_norm(v);
    if (norm <= kNormEps) throw ZeroVector("l2_normalize: vector norm below 1e-12");
    Tensor out = v;
    for (double& x : out.data) x /= norm;
    return out;
}

Tensor softmax(const Tensor& logits) {
    logits.ensure_finite("softmax input");
    Tensor out = logits;
    const double m = *std::max_element(out.data.begin(), out.data.end());
    double sum = 0.0;
    for (double& x : out.data) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : out.data) x /= sum;
    return out;
}

Tensor log_softmax(const Tensor& logits) {
    logits.ensure_finite("log_softmax input");
    const double m = *std::max_element(logits.data.begin(), logits.data.end());
    double sum = 0.0;
    for (double x : logits.data) sum += std::exp(x - m);
    const double lse = m + std::log(sum);
    Tensor out = logits;
    for (double& x : out.data) x -= lse;
    return out;
}

double logsumexp(const std::vector<double>& xs) {
    if (xs.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += std::exp(x - m);
    return m + std::log(sum);
}

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double h) {
    Tensor grad(x.shape);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x,
                           const Tensor& analytic_grad, double h) {
    if (!x.same_shape(analytic_grad))
        throw ShapeMismatch("grad_check: analytic gradient shape differs from x");
    const Tensor numeric = finite_diff_grad(f, x, h);
    GradCheckReport report;
    report.step = h;
    report.per_coordinate_errors = Tensor(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double a = analytic_grad[i];
        const double n = numeric[i];
        const double denom = std::max({1.0, std::fabs(a), std::fabs(n)});
        const double err = std::fabs(a - n) / denom;
        report.per_coordinate_errors[i] = err;
        report.max_rel_error = std::max(report.max_rel_error, err);
    }
    return report;
}

} // namespace fgrec
