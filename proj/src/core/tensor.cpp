#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace plm {

namespace {

thread_local bool g_grad_enabled = true;

NodePtr new_node(Shape shape) {
    auto n = std::make_shared<TensorNode>();
    n->value.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
    n->shape = std::move(shape);
    return n;
}

// Wires the autodiff edge out<-parents when recording is on and at least one
// parent participates. Returns true when the caller must install a backprop.
bool wire(const NodePtr& out, std::initializer_list<NodePtr> parents) {
    if (!g_grad_enabled) return false;
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    if (!rg) return false;
    out->requires_grad = true;
    out->parents.assign(parents);
    return true;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

}  // namespace

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = new_node(std::move(shape));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(Shape shape, float v, bool requires_grad) {
    auto n = new_node(std::move(shape));
    std::fill(n->value.begin(), n->value.end(), v);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_values(Shape shape, std::vector<float> values, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(values.size())) {
        throw ShapeError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item(): tensor has " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto out = new_node(a.shape());
    const size_t n = out->value.size();
    const float* pa = a.values().data();
    const float* pb = b.values().data();
    for (size_t i = 0; i < n; ++i) out->value[i] = pa[i] + pb[i];
    if (wire(out, {a.node(), b.node()})) {
        TensorNode* o = out.get();
        TensorNode* na = a.node().get();
        TensorNode* nb = b.node().get();
        out->backprop = [o, na, nb] {
            if (na->requires_grad) {
                na->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) na->grad[i] += o->grad[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) nb->grad[i] += o->grad[i];
            }
        };
    }
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto out = new_node(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = a.values()[i] - b.values()[i];
    if (wire(out, {a.node(), b.node()})) {
        TensorNode* o = out.get();
        TensorNode* na = a.node().get();
        TensorNode* nb = b.node().get();
        out->backprop = [o, na, nb] {
            if (na->requires_grad) {
                na->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) na->grad[i] += o->grad[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) nb->grad[i] -= o->grad[i];
            }
        };
    }
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto out = new_node(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = a.values()[i] * b.values()[i];
    if (wire(out, {a.node(), b.node()})) {
        TensorNode* o = out.get();
        TensorNode* na = a.node().get();
        TensorNode* nb = b.node().get();
        out->backprop = [o, na, nb] {
            if (na->requires_grad) {
                na->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) na->grad[i] += o->grad[i] * nb->value[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) nb->grad[i] += o->grad[i] * na->value[i];
            }
        };
    }
    return Tensor(out);
}

Tensor scale(const Tensor& a, float s) {
    auto out = new_node(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = a.values()[i] * s;
    if (wire(out, {a.node()})) {
        TensorNode* o = out.get();
        TensorNode* na = a.node().get();
        out->backprop = [o, na, s] {
            na->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) na->grad[i] += o->grad[i] * s;
        };
    }
    return Tensor(out);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (bias.ndim() != 1 || x.ndim() < 1 || x.shape().back() != bias.dim(0)) {
        throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match last dim of " +
                         shape_str(x.shape()));
    }
    const int d = bias.dim(0);
    const int64_t rows = x.numel() / d;
    auto out = new_node(x.shape());
    const float* px = x.values().data();
    const float* pb = bias.values().data();
    for (int64_t r = 0; r < rows; ++r) {
        float* po = out->value.data() + r * d;
        const float* pr = px + r * d;
        for (int j = 0; j < d; ++j) po[j] = pr[j] + pb[j];
    }
    if (wire(out, {x.node(), bias.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        TensorNode* nb = bias.node().get();
        out->backprop = [o, nx, nb, rows, d] {
            if (nx->requires_grad) {
                nx->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) nx->grad[i] += o->grad[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (int64_t r = 0; r < rows; ++r) {
                    const float* g = o->grad.data() + r * d;
                    for (int j = 0; j < d; ++j) nb->grad[j] += g[j];
                }
            }
        };
    }
    return Tensor(out);
}

// ---- matmul family ----

namespace {

// C(m,n) += A(m,k) x B(k,n); accumulation over k ascending for each output
// element, which keeps results reproducible and lets the naive oracle match
// bit-for-bit.
void matmul_accum(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<int64_t>(i) * n;
        const float* arow = a + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// dA(m,k) += dC(m,n) x B(k,n)^T
void matmul_grad_a(const float* dc, const float* b, float* da, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const float* gc = dc + static_cast<int64_t>(i) * n;
        float* ga = da + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const float* brow = b + static_cast<int64_t>(p) * n;
            float acc = 0.0f;
            for (int j = 0; j < n; ++j) acc += gc[j] * brow[j];
            ga[p] += acc;
        }
    }
}

// dB(k,n) += A(m,k)^T x dC(m,n)
void matmul_grad_b(const float* a, const float* dc, float* db, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<int64_t>(i) * k;
        const float* gc = dc + static_cast<int64_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            float* grow = db + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) grow[j] += av * gc[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw ShapeError("matmul: expected 2-D operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = new_node({m, n});
    matmul_accum(a.values().data(), b.values().data(), out->value.data(), m, k, n);
    if (wire(out, {a.node(), b.node()})) {
        TensorNode* o = out.get();
        TensorNode* na = a.node().get();
        TensorNode* nb = b.node().get();
        out->backprop = [o, na, nb, m, k, n] {
            if (na->requires_grad) {
                na->ensure_grad();
                matmul_grad_a(o->grad.data(), nb->value.data(), na->grad.data(), m, k, n);
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                matmul_grad_b(na->value.data(), o->grad.data(), nb->grad.data(), m, k, n);
            }
        };
    }
    return Tensor(out);
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
        throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const int bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    auto out = new_node({bs, m, n});
    for (int t = 0; t < bs; ++t) {
        matmul_accum(a.values().data() + static_cast<int64_t>(t) * m * k,
                     b.values().data() + static_cast<int64_t>(t) * k * n,
                     out->value.data() + static_cast<int64_t>(t) * m * n, m, k, n);
    }
    if (wire(out, {a.node(), b.node()})) {
        TensorNode* o = out.get();
        TensorNode* na = a.node().get();
        TensorNode* nb = b.node().get();
        out->backprop = [o, na, nb, bs, m, k, n] {
            for (int t = 0; t < bs; ++t) {
                const float* gc = o->grad.data() + static_cast<int64_t>(t) * m * n;
                if (na->requires_grad) {
                    na->ensure_grad();
                    matmul_grad_a(gc, nb->value.data() + static_cast<int64_t>(t) * k * n,
                                  na->grad.data() + static_cast<int64_t>(t) * m * k, m, k, n);
                }
                if (nb->requires_grad) {
                    nb->ensure_grad();
                    matmul_grad_b(na->value.data() + static_cast<int64_t>(t) * m * k, gc,
                                  nb->grad.data() + static_cast<int64_t>(t) * k * n, m, k, n);
                }
            }
        };
    }
    return Tensor(out);
}

Tensor bmm_nt(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
        throw ShapeError("bmm_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
    }
    const int bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
    auto out = new_node({bs, m, n});
    for (int t = 0; t < bs; ++t) {
        const float* pa = a.values().data() + static_cast<int64_t>(t) * m * k;
        const float* pb = b.values().data() + static_cast<int64_t>(t) * n * k;
        float* pc = out->value.data() + static_cast<int64_t>(t) * m * n;
        for (int i = 0; i < m; ++i) {
            const float* arow = pa + static_cast<int64_t>(i) * k;
            for (int j = 0; j < n; ++j) {
                const float* brow = pb + static_cast<int64_t>(j) * k;
                float acc = 0.0f;
                for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
                pc[static_cast<int64_t>(i) * n + j] = acc;
            }
        }
    }
    if (wire(out, {a.node(), b.node()})) {
        TensorNode* o = out.get();
        TensorNode* na = a.node().get();
        TensorNode* nb = b.node().get();
        out->backprop = [o, na, nb, bs, m, k, n] {
            for (int t = 0; t < bs; ++t) {
                const float* gc = o->grad.data() + static_cast<int64_t>(t) * m * n;
                const float* pa = na->value.data() + static_cast<int64_t>(t) * m * k;
                const float* pb = nb->value.data() + static_cast<int64_t>(t) * n * k;
                if (na->requires_grad) {
                    na->ensure_grad();
                    float* ga = na->grad.data() + static_cast<int64_t>(t) * m * k;
                    // dA = dC x B
                    matmul_accum(gc, pb, ga, m, n, k);
                }
                if (nb->requires_grad) {
                    nb->ensure_grad();
                    float* gb = nb->grad.data() + static_cast<int64_t>(t) * n * k;
                    // dB = dC^T x A
                    for (int i = 0; i < m; ++i) {
                        const float* arow = pa + static_cast<int64_t>(i) * k;
                        for (int j = 0; j < n; ++j) {
                            const float g = gc[static_cast<int64_t>(i) * n + j];
                            float* brow = gb + static_cast<int64_t>(j) * k;
                            for (int p = 0; p < k; ++p) brow[p] += g * arow[p];
                        }
                    }
                }
            }
        };
    }
    return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.ndim() != 2 || x.shape().back() != w.dim(0)) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
    }
    if (b.ndim() != 1 || b.dim(0) != w.dim(1)) {
        throw ShapeError("linear: bias " + shape_str(b.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
    }
    const int k = w.dim(0), n = w.dim(1);
    const int64_t m = x.numel() / k;
    Shape out_shape(x.shape());
    out_shape.back() = n;
    auto out = new_node(out_shape);
    // rows start at the broadcast bias, then accumulate the product
    const float* pb = b.values().data();
    for (int64_t r = 0; r < m; ++r) {
        float* row = out->value.data() + r * n;
        for (int j = 0; j < n; ++j) row[j] = pb[j];
    }
    matmul_accum(x.values().data(), w.values().data(), out->value.data(), static_cast<int>(m), k, n);
    if (wire(out, {x.node(), w.node(), b.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        TensorNode* nw = w.node().get();
        TensorNode* nb = b.node().get();
        const int mi = static_cast<int>(m);
        out->backprop = [o, nx, nw, nb, mi, k, n] {
            if (nx->requires_grad) {
                nx->ensure_grad();
                matmul_grad_a(o->grad.data(), nw->value.data(), nx->grad.data(), mi, k, n);
            }
            if (nw->requires_grad) {
                nw->ensure_grad();
                matmul_grad_b(nx->value.data(), o->grad.data(), nw->grad.data(), mi, k, n);
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (int r = 0; r < mi; ++r) {
                    const float* g = o->grad.data() + static_cast<int64_t>(r) * n;
                    for (int j = 0; j < n; ++j) nb->grad[j] += g[j];
                }
            }
        };
    }
    return Tensor(out);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    auto out = std::make_shared<TensorNode>();
    out->shape = std::move(shape);
    out->value.assign(x.values().begin(), x.values().end());
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx] {
            nx->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) nx->grad[i] += o->grad[i];
        };
    }
    return Tensor(out);
}

// ---- nonlinearities ----

Tensor softmax(const Tensor& x, int axis) {
    const int nd = x.ndim();
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
    }
    const int len = x.dim(axis);
    int64_t inner = 1;
    for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
    const int64_t outer = x.numel() / (static_cast<int64_t>(len) * inner);

    auto out = new_node(x.shape());
    const float* px = x.values().data();
    float* po = out->value.data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = o * len * inner + i;
            float mx = px[base];
            for (int t = 1; t < len; ++t) mx = std::max(mx, px[base + t * inner]);
            float z = 0.0f;
            for (int t = 0; t < len; ++t) {
                const float e = std::exp(px[base + t * inner] - mx);
                po[base + t * inner] = e;
                z += e;
            }
            const float inv = 1.0f / z;
            for (int t = 0; t < len; ++t) po[base + t * inner] *= inv;
        }
    }
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx, len, inner, outer] {
            nx->ensure_grad();
            for (int64_t u = 0; u < outer; ++u) {
                for (int64_t i = 0; i < inner; ++i) {
                    const int64_t base = u * len * inner + i;
                    float dot = 0.0f;
                    for (int t = 0; t < len; ++t) dot += o->grad[base + t * inner] * o->value[base + t * inner];
                    for (int t = 0; t < len; ++t) {
                        const int64_t idx = base + t * inner;
                        nx->grad[idx] += o->value[idx] * (o->grad[idx] - dot);
                    }
                }
            }
        };
    }
    return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (x.ndim() < 1) throw ShapeError("layer_norm: scalar input");
    const int d = x.shape().back();
    if (gamma.ndim() != 1 || gamma.dim(0) != d || beta.ndim() != 1 || beta.dim(0) != d) {
        throw ShapeError("layer_norm: gamma/beta must have shape (" + std::to_string(d) + ")");
    }
    if (eps < 0.0f) throw ShapeError("layer_norm: negative eps");
    const int64_t rows = x.numel() / d;

    auto out = new_node(x.shape());
    std::vector<float> xhat(static_cast<size_t>(x.numel()));
    std::vector<float> inv_std(static_cast<size_t>(rows));
    const float* px = x.values().data();
    const float* pg = gamma.values().data();
    const float* pb = beta.values().data();
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = px + r * d;
        float mean = 0.0f;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<float>(d);
        float var = 0.0f;
        for (int j = 0; j < d; ++j) {
            const float c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<float>(d);
        const float istd = 1.0f / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = istd;
        float* prow = out->value.data() + r * d;
        float* ph = xhat.data() + r * d;
        for (int j = 0; j < d; ++j) {
            const float h = (row[j] - mean) * istd;
            ph[j] = h;
            prow[j] = h * pg[j] + pb[j];
        }
    }
    if (wire(out, {x.node(), gamma.node(), beta.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        TensorNode* ng = gamma.node().get();
        TensorNode* nb = beta.node().get();
        out->backprop = [o, nx, ng, nb, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
            for (int64_t r = 0; r < rows; ++r) {
                const float* g = o->grad.data() + r * d;
                const float* ph = xhat.data() + r * d;
                if (ng->requires_grad) {
                    ng->ensure_grad();
                    for (int j = 0; j < d; ++j) ng->grad[j] += g[j] * ph[j];
                }
                if (nb->requires_grad) {
                    nb->ensure_grad();
                    for (int j = 0; j < d; ++j) nb->grad[j] += g[j];
                }
                if (nx->requires_grad) {
                    nx->ensure_grad();
                    float mean_dh = 0.0f, mean_dh_h = 0.0f;
                    for (int j = 0; j < d; ++j) {
                        const float dh = g[j] * ng->value[j];
                        mean_dh += dh;
                        mean_dh_h += dh * ph[j];
                    }
                    mean_dh /= static_cast<float>(d);
                    mean_dh_h /= static_cast<float>(d);
                    float* gx = nx->grad.data() + r * d;
                    const float istd = inv_std[static_cast<size_t>(r)];
                    for (int j = 0; j < d; ++j) {
                        const float dh = g[j] * ng->value[j];
                        gx[j] += istd * (dh - mean_dh - ph[j] * mean_dh_h);
                    }
                }
            }
        };
    }
    return Tensor(out);
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;
}  // namespace

Tensor gelu(const Tensor& x) {
    auto out = new_node(x.shape());
    const size_t n = out->value.size();
    const float* px = x.values().data();
    for (size_t i = 0; i < n; ++i) {
        const float v = px[i];
        const float t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        out->value[i] = 0.5f * v * (1.0f + t);
    }
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx] {
            nx->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) {
                const float v = nx->value[i];
                const float t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
                const float d = 0.5f * (1.0f + t) +
                                0.5f * v * (1.0f - t * t) * kGeluC * (1.0f + 3.0f * kGeluA * v * v);
                nx->grad[i] += o->grad[i] * d;
            }
        };
    }
    return Tensor(out);
}

Tensor clamp(const Tensor& x, float lo, float hi) {
    if (lo > hi) throw ShapeError("clamp: lo > hi");
    auto out = new_node(x.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = std::min(std::max(x.values()[i], lo), hi);
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx, lo, hi] {
            nx->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) {
                const float v = nx->value[i];
                if (v > lo && v < hi) nx->grad[i] += o->grad[i];
            }
        };
    }
    return Tensor(out);
}

Tensor dropout(const Tensor& x, float rate, Rng& rng, bool train) {
    if (rate < 0.0f || rate >= 1.0f) throw ShapeError("dropout: rate must be in [0,1)");
    if (!train || rate == 0.0f) return x;
    auto out = new_node(x.shape());
    const size_t n = out->value.size();
    std::vector<float> mask(n);
    const float keep = 1.0f - rate;
    const float scale_kept = 1.0f / keep;
    for (size_t i = 0; i < n; ++i) {
        mask[i] = (rng.uniform() < rate) ? 0.0f : scale_kept;
        out->value[i] = x.values()[i] * mask[i];
    }
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx, mask = std::move(mask)] {
            nx->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) nx->grad[i] += o->grad[i] * mask[i];
        };
    }
    return Tensor(out);
}

// ---- structural ops ----

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids, Shape lead) {
    if (table.ndim() != 2) throw ShapeError("embedding_rows: table must be 2-D");
    const int v = table.dim(0), d = table.dim(1);
    const int64_t n = shape_numel(lead);
    if (n != static_cast<int64_t>(ids.size())) {
        throw ShapeError("embedding_rows: " + std::to_string(ids.size()) + " ids for lead shape " +
                         shape_str(lead));
    }
    for (int id : ids) {
        if (id < 0 || id >= v) throw ShapeError("embedding_rows: id " + std::to_string(id) + " out of range");
    }
    Shape out_shape = std::move(lead);
    out_shape.push_back(d);
    auto out = new_node(out_shape);
    const float* pt = table.values().data();
    for (int64_t i = 0; i < n; ++i) {
        std::copy_n(pt + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d, d,
                    out->value.data() + i * d);
    }
    if (wire(out, {table.node()})) {
        TensorNode* o = out.get();
        TensorNode* nt = table.node().get();
        out->backprop = [o, nt, ids, n, d] {
            nt->ensure_grad();
            for (int64_t i = 0; i < n; ++i) {
                float* row = nt->grad.data() + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d;
                const float* g = o->grad.data() + i * d;
                for (int j = 0; j < d; ++j) row[j] += g[j];
            }
        };
    }
    return Tensor(out);
}

Tensor add_positional(const Tensor& x, const Tensor& pos) {
    if (x.ndim() != 3 || pos.ndim() != 2 || x.dim(2) != pos.dim(1) || x.dim(1) > pos.dim(0)) {
        throw ShapeError("add_positional: " + shape_str(x.shape()) + " with table " + shape_str(pos.shape()));
    }
    const int b = x.dim(0), l = x.dim(1), d = x.dim(2);
    auto out = new_node(x.shape());
    const float* px = x.values().data();
    const float* pp = pos.values().data();
    for (int t = 0; t < b; ++t) {
        for (int i = 0; i < l; ++i) {
            const int64_t off = (static_cast<int64_t>(t) * l + i) * d;
            const float* prow = pp + static_cast<int64_t>(i) * d;
            for (int j = 0; j < d; ++j) out->value[off + j] = px[off + j] + prow[j];
        }
    }
    if (wire(out, {x.node(), pos.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        TensorNode* np = pos.node().get();
        out->backprop = [o, nx, np, b, l, d] {
            if (nx->requires_grad) {
                nx->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) nx->grad[i] += o->grad[i];
            }
            if (np->requires_grad) {
                np->ensure_grad();
                for (int t = 0; t < b; ++t) {
                    for (int i = 0; i < l; ++i) {
                        const float* g = o->grad.data() + (static_cast<int64_t>(t) * l + i) * d;
                        float* row = np->grad.data() + static_cast<int64_t>(i) * d;
                        for (int j = 0; j < d; ++j) row[j] += g[j];
                    }
                }
            }
        };
    }
    return Tensor(out);
}

Tensor split_heads(const Tensor& x, int heads) {
    if (x.ndim() != 3 || x.dim(2) % heads != 0) {
        throw ShapeError("split_heads: " + shape_str(x.shape()) + " with " + std::to_string(heads) +
                         " heads");
    }
    const int b = x.dim(0), l = x.dim(1), d = x.dim(2), dh = d / heads;
    auto out = new_node({b * heads, l, dh});
    const float* px = x.values().data();
    for (int t = 0; t < b; ++t) {
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < l; ++i) {
                const float* src = px + (static_cast<int64_t>(t) * l + i) * d + static_cast<int64_t>(h) * dh;
                float* dst = out->value.data() +
                             ((static_cast<int64_t>(t) * heads + h) * l + i) * dh;
                std::copy_n(src, dh, dst);
            }
        }
    }
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx, b, l, d, dh, heads] {
            nx->ensure_grad();
            for (int t = 0; t < b; ++t) {
                for (int h = 0; h < heads; ++h) {
                    for (int i = 0; i < l; ++i) {
                        const float* g = o->grad.data() +
                                         ((static_cast<int64_t>(t) * heads + h) * l + i) * dh;
                        float* dst = nx->grad.data() + (static_cast<int64_t>(t) * l + i) * d +
                                     static_cast<int64_t>(h) * dh;
                        for (int j = 0; j < dh; ++j) dst[j] += g[j];
                    }
                }
            }
        };
    }
    return Tensor(out);
}

Tensor merge_heads(const Tensor& x, int heads) {
    if (x.ndim() != 3 || x.dim(0) % heads != 0) {
        throw ShapeError("merge_heads: " + shape_str(x.shape()) + " with " + std::to_string(heads) +
                         " heads");
    }
    const int b = x.dim(0) / heads, l = x.dim(1), dh = x.dim(2), d = dh * heads;
    auto out = new_node({b, l, d});
    const float* px = x.values().data();
    for (int t = 0; t < b; ++t) {
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < l; ++i) {
                const float* src = px + ((static_cast<int64_t>(t) * heads + h) * l + i) * dh;
                float* dst = out->value.data() + (static_cast<int64_t>(t) * l + i) * d +
                             static_cast<int64_t>(h) * dh;
                std::copy_n(src, dh, dst);
            }
        }
    }
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx, b, l, d, dh, heads] {
            nx->ensure_grad();
            for (int t = 0; t < b; ++t) {
                for (int h = 0; h < heads; ++h) {
                    for (int i = 0; i < l; ++i) {
                        const float* g = o->grad.data() + (static_cast<int64_t>(t) * l + i) * d +
                                         static_cast<int64_t>(h) * dh;
                        float* dst = nx->grad.data() +
                                     ((static_cast<int64_t>(t) * heads + h) * l + i) * dh;
                        for (int j = 0; j < dh; ++j) dst[j] += g[j];
                    }
                }
            }
        };
    }
    return Tensor(out);
}

namespace {
constexpr float kMaskFill = -1e9f;
}

Tensor apply_key_padding_mask(const Tensor& scores, const std::vector<uint8_t>& mask, int heads) {
    if (scores.ndim() != 3 || scores.dim(0) % heads != 0) {
        throw ShapeError("apply_key_padding_mask: scores " + shape_str(scores.shape()));
    }
    const int bh = scores.dim(0), lq = scores.dim(1), lk = scores.dim(2);
    const int b = bh / heads;
    if (mask.size() != static_cast<size_t>(b) * lk) {
        throw ShapeError("apply_key_padding_mask: mask size " + std::to_string(mask.size()) +
                         " for batch " + std::to_string(b) + " x keys " + std::to_string(lk));
    }
    auto out = new_node(scores.shape());
    const float* ps = scores.values().data();
    for (int t = 0; t < bh; ++t) {
        const uint8_t* mrow = mask.data() + static_cast<int64_t>(t / heads) * lk;
        for (int q = 0; q < lq; ++q) {
            const int64_t off = (static_cast<int64_t>(t) * lq + q) * lk;
            for (int k = 0; k < lk; ++k) {
                out->value[off + k] = ps[off + k] + (mrow[k] ? 0.0f : kMaskFill);
            }
        }
    }
    if (wire(out, {scores.node()})) {
        TensorNode* o = out.get();
        TensorNode* ns = scores.node().get();
        out->backprop = [o, ns] {
            ns->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) ns->grad[i] += o->grad[i];
        };
    }
    return Tensor(out);
}

Tensor apply_causal_mask(const Tensor& scores) {
    if (scores.ndim() != 3 || scores.dim(1) != scores.dim(2)) {
        throw ShapeError("apply_causal_mask: scores " + shape_str(scores.shape()));
    }
    const int b = scores.dim(0), l = scores.dim(1);
    auto out = new_node(scores.shape());
    const float* ps = scores.values().data();
    for (int t = 0; t < b; ++t) {
        for (int q = 0; q < l; ++q) {
            const int64_t off = (static_cast<int64_t>(t) * l + q) * l;
            for (int k = 0; k < l; ++k) out->value[off + k] = ps[off + k] + (k <= q ? 0.0f : kMaskFill);
        }
    }
    if (wire(out, {scores.node()})) {
        TensorNode* o = out.get();
        TensorNode* ns = scores.node().get();
        out->backprop = [o, ns] {
            ns->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) ns->grad[i] += o->grad[i];
        };
    }
    return Tensor(out);
}

Tensor mean_pool_masked(const Tensor& hidden, const std::vector<uint8_t>& mask) {
    if (hidden.ndim() != 3) throw ShapeError("mean_pool_masked: hidden must be (B,L,d)");
    const int b = hidden.dim(0), l = hidden.dim(1), d = hidden.dim(2);
    if (mask.size() != static_cast<size_t>(b) * l) {
        throw ShapeError("mean_pool_masked: mask size " + std::to_string(mask.size()));
    }
    std::vector<float> inv_count(static_cast<size_t>(b));
    for (int t = 0; t < b; ++t) {
        int c = 0;
        for (int i = 0; i < l; ++i) c += mask[static_cast<size_t>(t) * l + i] ? 1 : 0;
        if (c == 0) throw ShapeError("mean_pool_masked: all-zero mask row " + std::to_string(t));
        inv_count[static_cast<size_t>(t)] = 1.0f / static_cast<float>(c);
    }
    auto out = new_node({b, d});
    const float* ph = hidden.values().data();
    for (int t = 0; t < b; ++t) {
        float* prow = out->value.data() + static_cast<int64_t>(t) * d;
        for (int i = 0; i < l; ++i) {
            if (!mask[static_cast<size_t>(t) * l + i]) continue;
            const float* src = ph + (static_cast<int64_t>(t) * l + i) * d;
            for (int j = 0; j < d; ++j) prow[j] += src[j];
        }
        for (int j = 0; j < d; ++j) prow[j] *= inv_count[static_cast<size_t>(t)];
    }
    if (wire(out, {hidden.node()})) {
        TensorNode* o = out.get();
        TensorNode* nh = hidden.node().get();
        out->backprop = [o, nh, mask, inv_count = std::move(inv_count), b, l, d] {
            nh->ensure_grad();
            for (int t = 0; t < b; ++t) {
                const float* g = o->grad.data() + static_cast<int64_t>(t) * d;
                for (int i = 0; i < l; ++i) {
                    if (!mask[static_cast<size_t>(t) * l + i]) continue;
                    float* dst = nh->grad.data() + (static_cast<int64_t>(t) * l + i) * d;
                    for (int j = 0; j < d; ++j) dst[j] += g[j] * inv_count[static_cast<size_t>(t)];
                }
            }
        };
    }
    return Tensor(out);
}

Tensor concat_prefix(const Tensor& prefix, const Tensor& x) {
    if (prefix.ndim() != 2 || x.ndim() != 3 || prefix.dim(0) != x.dim(0) || prefix.dim(1) != x.dim(2)) {
        throw ShapeError("concat_prefix: prefix " + shape_str(prefix.shape()) + " with " +
                         shape_str(x.shape()));
    }
    const int b = x.dim(0), l = x.dim(1), d = x.dim(2);
    auto out = new_node({b, l + 1, d});
    for (int t = 0; t < b; ++t) {
        float* dst = out->value.data() + static_cast<int64_t>(t) * (l + 1) * d;
        std::copy_n(prefix.values().data() + static_cast<int64_t>(t) * d, d, dst);
        std::copy_n(x.values().data() + static_cast<int64_t>(t) * l * d, static_cast<int64_t>(l) * d,
                    dst + d);
    }
    if (wire(out, {prefix.node(), x.node()})) {
        TensorNode* o = out.get();
        TensorNode* np = prefix.node().get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, np, nx, b, l, d] {
            for (int t = 0; t < b; ++t) {
                const float* g = o->grad.data() + static_cast<int64_t>(t) * (l + 1) * d;
                if (np->requires_grad) {
                    np->ensure_grad();
                    float* dst = np->grad.data() + static_cast<int64_t>(t) * d;
                    for (int j = 0; j < d; ++j) dst[j] += g[j];
                }
                if (nx->requires_grad) {
                    nx->ensure_grad();
                    float* dst = nx->grad.data() + static_cast<int64_t>(t) * l * d;
                    const float* gs = g + d;
                    for (int64_t j = 0; j < static_cast<int64_t>(l) * d; ++j) dst[j] += gs[j];
                }
            }
        };
    }
    return Tensor(out);
}

// ---- losses ----

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_index) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy: logits must be (N,V)");
    const int n = logits.dim(0), v = logits.dim(1);
    if (targets.size() != static_cast<size_t>(n)) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
    }
    int count = 0;
    for (int t : targets) {
        if (t == ignore_index) continue;
        if (t < 0 || t >= v) throw ShapeError("cross_entropy: target " + std::to_string(t) + " out of range");
        ++count;
    }
    auto out = new_node({1});
    if (count == 0) {
        // all positions ignored: zero loss, no gradient contribution
        return Tensor(out);
    }
    std::vector<float> probs(static_cast<size_t>(logits.numel()));
    const float* pl = logits.values().data();
    float loss = 0.0f;
    for (int r = 0; r < n; ++r) {
        const float* row = pl + static_cast<int64_t>(r) * v;
        float mx = row[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        float z = 0.0f;
        float* prow = probs.data() + static_cast<int64_t>(r) * v;
        for (int j = 0; j < v; ++j) {
            const float e = std::exp(row[j] - mx);
            prow[j] = e;
            z += e;
        }
        const float inv = 1.0f / z;
        for (int j = 0; j < v; ++j) prow[j] *= inv;
        if (targets[static_cast<size_t>(r)] != ignore_index) {
            loss += std::log(z) + mx - row[targets[static_cast<size_t>(r)]];
        }
    }
    out->value[0] = loss / static_cast<float>(count);
    if (wire(out, {logits.node()})) {
        TensorNode* o = out.get();
        TensorNode* nl = logits.node().get();
        out->backprop = [o, nl, targets, probs = std::move(probs), n, v, count, ignore_index] {
            nl->ensure_grad();
            const float g = o->grad[0] / static_cast<float>(count);
            for (int r = 0; r < n; ++r) {
                const int t = targets[static_cast<size_t>(r)];
                if (t == ignore_index) continue;
                const float* prow = probs.data() + static_cast<int64_t>(r) * v;
                float* grow = nl->grad.data() + static_cast<int64_t>(r) * v;
                for (int j = 0; j < v; ++j) grow[j] += g * (prow[j] - (j == t ? 1.0f : 0.0f));
            }
        };
    }
    return Tensor(out);
}

Tensor mse_loss(const Tensor& pred, const std::vector<float>& targets) {
    if (pred.numel() != static_cast<int64_t>(targets.size())) {
        throw ShapeError("mse_loss: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(pred.numel()) + " predictions");
    }
    const int64_t n = pred.numel();
    if (n == 0) throw ShapeError("mse_loss: empty input");
    auto out = new_node({1});
    float acc = 0.0f;
    for (int64_t i = 0; i < n; ++i) {
        const float dlt = pred.values()[static_cast<size_t>(i)] - targets[static_cast<size_t>(i)];
        acc += dlt * dlt;
    }
    out->value[0] = acc / static_cast<float>(n);
    if (wire(out, {pred.node()})) {
        TensorNode* o = out.get();
        TensorNode* np = pred.node().get();
        out->backprop = [o, np, targets, n] {
            np->ensure_grad();
            const float g = o->grad[0] * 2.0f / static_cast<float>(n);
            for (int64_t i = 0; i < n; ++i) {
                np->grad[static_cast<size_t>(i)] +=
                    g * (np->value[static_cast<size_t>(i)] - targets[static_cast<size_t>(i)]);
            }
        };
    }
    return Tensor(out);
}

Tensor sum_all(const Tensor& x) {
    auto out = new_node({1});
    float acc = 0.0f;
    for (float v : x.values()) acc += v;
    out->value[0] = acc;
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx] {
            nx->ensure_grad();
            for (auto& g : nx->grad) g += o->grad[0];
        };
    }
    return Tensor(out);
}

Tensor mean_all(const Tensor& x) {
    auto out = new_node({1});
    float acc = 0.0f;
    for (float v : x.values()) acc += v;
    const float inv = 1.0f / static_cast<float>(x.numel());
    out->value[0] = acc * inv;
    if (wire(out, {x.node()})) {
        TensorNode* o = out.get();
        TensorNode* nx = x.node().get();
        out->backprop = [o, nx, inv] {
            nx->ensure_grad();
            for (auto& g : nx->grad) g += o->grad[0] * inv;
        };
    }
    return Tensor(out);
}

// ---- VAE ops ----

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const std::vector<float>& eps) {
    check_same_shape(mu, logvar, "reparameterize");
    if (eps.size() != static_cast<size_t>(mu.numel())) {
        throw ShapeError("reparameterize: eps size mismatch");
    }
    auto out = new_node(mu.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) {
        out->value[i] = mu.values()[i] + std::exp(0.5f * logvar.values()[i]) * eps[i];
    }
    if (wire(out, {mu.node(), logvar.node()})) {
        TensorNode* o = out.get();
        TensorNode* nm = mu.node().get();
        TensorNode* nl = logvar.node().get();
        out->backprop = [o, nm, nl, eps] {
            if (nm->requires_grad) {
                nm->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) nm->grad[i] += o->grad[i];
            }
            if (nl->requires_grad) {
                nl->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) {
                    nl->grad[i] += o->grad[i] * 0.5f * std::exp(0.5f * nl->value[i]) * eps[i];
                }
            }
        };
    }
    return Tensor(out);
}

Tensor kl_standard_normal(const Tensor& mu, const Tensor& logvar) {
    check_same_shape(mu, logvar, "kl_standard_normal");
    if (mu.ndim() != 2) throw ShapeError("kl_standard_normal: expected (B,z)");
    const int b = mu.dim(0);
    auto out = new_node({1});
    float acc = 0.0f;
    const size_t n = static_cast<size_t>(mu.numel());
    for (size_t i = 0; i < n; ++i) {
        const float m = mu.values()[i];
        const float lv = logvar.values()[i];
        acc += 0.5f * (std::exp(lv) + m * m - 1.0f - lv);
    }
    out->value[0] = acc / static_cast<float>(b);
    if (wire(out, {mu.node(), logvar.node()})) {
        TensorNode* o = out.get();
        TensorNode* nm = mu.node().get();
        TensorNode* nl = logvar.node().get();
        const float inv_b = 1.0f / static_cast<float>(b);
        out->backprop = [o, nm, nl, inv_b] {
            const float g = o->grad[0] * inv_b;
            if (nm->requires_grad) {
                nm->ensure_grad();
                for (size_t i = 0; i < nm->grad.size(); ++i) nm->grad[i] += g * nm->value[i];
            }
            if (nl->requires_grad) {
                nl->ensure_grad();
                for (size_t i = 0; i < nl->grad.size(); ++i) {
                    nl->grad[i] += g * 0.5f * (std::exp(nl->value[i]) - 1.0f);
                }
            }
        };
    }
    return Tensor(out);
}

// ---- backward ----

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward: loss must be a defined scalar tensor");
    }
    NodePtr root = loss.node();
    if (root->backward_done) {
        throw UsageError("backward: called twice on the same loss without a gradient reset");
    }
    root->backward_done = true;

    // reverse post-order over the recorded DAG, iterative to keep the stack flat
    std::vector<TensorNode*> topo;
    std::unordered_set<TensorNode*> visited;
    struct Frame {
        TensorNode* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorNode* p = f.node->parents[f.next_parent++].get();
            if (visited.insert(p).second) stack.push_back({p, 0});
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0f;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        TensorNode* node = *it;
        if (!node->backprop) continue;
        if (node->grad.empty()) continue;  // no contribution reached this node
        node->backprop();
    }
}

}  // namespace plm
