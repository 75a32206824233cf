#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace plm {

// Dense float32 tensors with reverse-mode autodiff. Storage is row-major,
// all accumulation is float32 (tolerances elsewhere assume this). Every op
// returns a fresh tensor; there are no views. Broadcasting is limited to
// bias-add over the last dimension plus a few purpose-built ops below.

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool backward_done = false;  // set on a loss root once consumed
    std::vector<NodePtr> parents;
    std::function<void()> backprop;  // reads this->grad, accumulates into parents

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0f);
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float v, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<float> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

    std::span<const float> values() const { return node_->value; }
    // Direct mutation is only legitimate on leaves (parameters, inputs).
    std::span<float> values_mut() { return node_->value; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const float> grad() const { return node_->grad; }
    std::span<float> grad_mut() { return node_->grad; }
    void zero_grad() { node_->grad.clear(); node_->backward_done = false; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    float item() const;

    NodePtr node() const { return node_; }
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

private:
    NodePtr node_;
};

// While a guard is alive, ops do not record the graph (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// ---- elementwise / linear algebra ----

Tensor add(const Tensor& a, const Tensor& b);            // same shape
Tensor sub(const Tensor& a, const Tensor& b);            // same shape
Tensor mul(const Tensor& a, const Tensor& b);            // same shape
Tensor scale(const Tensor& a, float s);
Tensor add_bias(const Tensor& x, const Tensor& bias);    // bias over last dim
Tensor matmul(const Tensor& a, const Tensor& b);         // (m,k)x(k,n)
Tensor bmm(const Tensor& a, const Tensor& b);            // (B,m,k)x(B,k,n)
Tensor bmm_nt(const Tensor& a, const Tensor& b);         // (B,m,k)x(B,n,k)^T -> (B,m,n)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x[...,k] w(k,n)
Tensor reshape(const Tensor& x, Shape shape);

// ---- nonlinearities / normalization ----

Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);
Tensor gelu(const Tensor& x);  // tanh approximation
Tensor clamp(const Tensor& x, float lo, float hi);
Tensor dropout(const Tensor& x, float rate, Rng& rng, bool train);

// ---- gather / structural ops for the models ----

// rows of table (V,d) selected by ids; output shape = lead + {d}
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids, Shape lead);
// x (B,L,d) + pos(maxL,d) broadcast over batch, first L rows of pos
Tensor add_positional(const Tensor& x, const Tensor& pos);
// (B,L,H*dh) -> (B*H,L,dh) and back
Tensor split_heads(const Tensor& x, int heads);
Tensor merge_heads(const Tensor& x, int heads);
// scores (B*H,Lq,Lk); keys with mask==0 get -1e9 added pre-softmax
Tensor apply_key_padding_mask(const Tensor& scores, const std::vector<uint8_t>& mask, int heads);
// scores (B,L,L); positions k > q get -1e9
Tensor apply_causal_mask(const Tensor& scores);
// hidden (B,L,d), mask (B*L) 0/1 -> (B,d); errors on an all-zero mask row
Tensor mean_pool_masked(const Tensor& hidden, const std::vector<uint8_t>& mask);
// prefix (B,d) prepended along sequence axis -> (B,L+1,d)
Tensor concat_prefix(const Tensor& prefix, const Tensor& x);

// ---- losses / reductions ----

// mean -log softmax(logits)[target] over targets != ignore_index; 0 if all ignored
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_index);
Tensor mse_loss(const Tensor& pred, const std::vector<float>& targets);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// ---- VAE-specific fused ops ----

// mu + exp(logvar/2) * eps, eps recorded as a constant
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const std::vector<float>& eps);
// mean over rows of 0.5 * sum_z(exp(logvar) + mu^2 - 1 - logvar)
Tensor kl_standard_normal(const Tensor& mu, const Tensor& logvar);

// Reverse-mode sweep from a scalar loss. Populates grad on every
// requires_grad tensor in the recorded graph. Calling it twice on the same
// loss without zeroing grads is an error.
void backward(const Tensor& loss);

}  // namespace plm
