#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace plm {

struct AdamHyper {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Standard Adam with bias correction over a fixed parameter list. Moment
// buffers are zero-initialized and shape-matched; step counts from 0 and
// increases by exactly one per update. Gradients are read, never modified.
class AdamState {
public:
    AdamState(std::vector<Tensor> params, AdamHyper hyper);

    // One optimizer step. Every parameter must have a populated gradient.
    void step();
    void zero_grad();

    int64_t steps_taken() const { return step_; }
    const AdamHyper& hyper() const { return hyper_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    AdamHyper hyper_;
    int64_t step_ = 0;
};

}  // namespace plm
