#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace plm::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true, float scale = 1.0f) {
    std::vector<float> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.normal_f() * scale;
    return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

// Central finite differences of a scalar-valued forward function with
// respect to one input tensor. The forward runs in float32, like the
// implementation under test.
inline std::vector<float> finite_difference_grad(Tensor& input,
                                                 const std::function<float()>& forward,
                                                 float h = 1e-3f) {
    std::vector<float> grad(static_cast<size_t>(input.numel()));
    auto vals = input.values_mut();
    for (size_t i = 0; i < grad.size(); ++i) {
        const float orig = vals[i];
        vals[i] = orig + h;
        const float fp = forward();
        vals[i] = orig - h;
        const float fm = forward();
        vals[i] = orig;
        grad[i] = (fp - fm) / (2.0f * h);
    }
    return grad;
}

// max_i |a-b| / max(max_i |b|, floor): infinity-norm relative error.
inline double relative_error(std::span<const float> got, const std::vector<float>& want,
                             double floor = 1e-6) {
    double max_diff = 0.0, max_ref = 0.0;
    for (size_t i = 0; i < want.size(); ++i) {
        max_diff = std::max(max_diff, std::fabs(static_cast<double>(got[i]) - want[i]));
        max_ref = std::max(max_ref, std::fabs(static_cast<double>(want[i])));
    }
    return max_diff / std::max(max_ref, floor);
}

// Checks the autodiff gradient of `loss_fn` (which must rebuild the graph on
// every call) against central finite differences for one input tensor. The
// forward runs in float32, so the default step is set where rounding noise
// (~eps*|f|/2h) and truncation (~h^2) are both well under a 1e-3 tolerance.
inline double gradient_check(Tensor& input, const std::function<Tensor()>& loss_fn, float h = 2e-3f) {
    input.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);
    const auto fd = finite_difference_grad(input, [&] { return loss_fn().item(); }, h);
    if (!input.has_grad()) {
        // no gradient reached the input: finite differences must agree it is 0
        double mx = 0.0;
        for (float g : fd) mx = std::max(mx, std::fabs(static_cast<double>(g)));
        return mx;
    }
    return relative_error(input.grad(), fd);
}

}  // namespace plm::testing
