#include "core/adam.hpp"

#include <cmath>

namespace plm {

AdamState::AdamState(std::vector<Tensor> params, AdamHyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(static_cast<size_t>(p.numel()), 0.0f);
        v_.emplace_back(static_cast<size_t>(p.numel()), 0.0f);
    }
}

void AdamState::step() {
    for (size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) {
            throw UsageError("adam_step: parameter " + std::to_string(i) + " has no gradient");
        }
    }
    step_ += 1;
    const float bc1 = 1.0f - std::pow(hyper_.beta1, static_cast<float>(step_));
    const float bc2 = 1.0f - std::pow(hyper_.beta2, static_cast<float>(step_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto w = params_[i].values_mut();
        const auto g = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < m.size(); ++j) {
            m[j] = hyper_.beta1 * m[j] + (1.0f - hyper_.beta1) * g[j];
            v[j] = hyper_.beta2 * v[j] + (1.0f - hyper_.beta2) * g[j] * g[j];
            const float mhat = m[j] / bc1;
            const float vhat = v[j] / bc2;
            w[j] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
        }
    }
}

void AdamState::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace plm
