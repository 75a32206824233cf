#include <doctest.h>

#include <cmath>

#include "core/tensor.hpp"
#include "core/tokenizer.hpp"
#include "test_support.hpp"

using namespace plm;
using plm::testing::gradient_check;
using plm::testing::random_tensor;

namespace {

// Independent naive triple-loop product, k ascending like the implementation.
std::vector<float> naive_matmul(const std::vector<float>& a, const std::vector<float>& b, int m,
                                int k, int n) {
    std::vector<float> c(static_cast<size_t>(m) * n, 0.0f);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int p = 0; p < k; ++p) {
                acc += a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * n + j];
            }
            c[static_cast<size_t>(i) * n + j] = acc;
        }
    }
    return c;
}

}  // namespace

TEST_CASE("matmul identity and known product") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    Tensor r = matmul(a, eye);
    CHECK(r.values()[0] == 1.0f);
    CHECK(r.values()[1] == 2.0f);
    CHECK(r.values()[2] == 3.0f);
    CHECK(r.values()[3] == 4.0f);

    Tensor b = Tensor::from_values({2, 2}, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c.values()[0] == 19.0f);
    CHECK(c.values()[1] == 22.0f);
    CHECK(c.values()[2] == 43.0f);
    CHECK(c.values()[3] == 50.0f);
}

TEST_CASE("matmul shape mismatch is an error") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul matches the naive oracle bit-for-bit") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 1 + static_cast<int>(rng.below(6));
        const int k = 1 + static_cast<int>(rng.below(6));
        const int n = 1 + static_cast<int>(rng.below(6));
        Tensor a = random_tensor({m, k}, rng, false);
        Tensor b = random_tensor({k, n}, rng, false);
        const auto want = naive_matmul({a.values().begin(), a.values().end()},
                                       {b.values().begin(), b.values().end()}, m, k, n);
        const Tensor got = matmul(a, b);
        for (size_t i = 0; i < want.size(); ++i) CHECK(got.values()[i] == want[i]);
    }
}

TEST_CASE("softmax rows are normalized and shift-invariant") {
    Tensor x = Tensor::from_values({1, 3}, {0, 0, 0});
    Tensor y = softmax(x, 1);
    for (float v : y.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

    Tensor z = Tensor::from_values({1, 2}, {0.0f, std::log(2.0f)});
    Tensor s = softmax(z, 1);
    CHECK(s.values()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(s.values()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({4, 7}, rng, false, 10.0f);
        std::vector<float> moved(a.values().begin(), a.values().end());
        const float c = rng.normal_f() * 5.0f;
        for (auto& v : moved) v += c;
        Tensor b = Tensor::from_values({4, 7}, std::move(moved));
        Tensor sa = softmax(a, 1), sb = softmax(b, 1);
        for (int64_t i = 0; i < sa.numel(); ++i) {
            CHECK(sa.values()[static_cast<size_t>(i)] ==
                  doctest::Approx(sb.values()[static_cast<size_t>(i)]).epsilon(1e-5));
        }
        for (int row = 0; row < 4; ++row) {
            float sum = 0.0f;
            for (int j = 0; j < 7; ++j) sum += sa.values()[static_cast<size_t>(row) * 7 + j];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("softmax over a middle axis") {
    Tensor x = Tensor::from_values({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor y = softmax(x, 1);
    // slices along axis 1: (x[b,0,i], x[b,1,i]) must sum to 1
    for (int b = 0; b < 2; ++b) {
        for (int i = 0; i < 2; ++i) {
            const float s = y.values()[static_cast<size_t>(b) * 4 + i] +
                            y.values()[static_cast<size_t>(b) * 4 + 2 + i];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("layer_norm closed forms") {
    Tensor gamma = Tensor::full({3}, 1.0f);
    Tensor beta = Tensor::zeros({3});

    Tensor constant = Tensor::from_values({1, 3}, {5, 5, 5});
    Tensor zeros = layer_norm(constant, gamma, beta, 1e-5f);
    for (float v : zeros.values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));

    Tensor gamma0 = Tensor::zeros({3});
    Tensor beta_b = Tensor::full({3}, 2.5f);
    Tensor row = Tensor::from_values({1, 3}, {1, 7, -4});
    Tensor all_b = layer_norm(row, gamma0, beta_b, 1e-5f);
    for (float v : all_b.values()) CHECK(v == doctest::Approx(2.5).epsilon(1e-6));

    // [1,2,3] with eps=0: mean 2, biased var 2/3, normalized = +-sqrt(1.5), 0
    Tensor r = layer_norm(Tensor::from_values({1, 3}, {1, 2, 3}), gamma, beta, 0.0f);
    const double s = std::sqrt(1.5);
    CHECK(r.values()[0] == doctest::Approx(-s).epsilon(1e-5));
    CHECK(r.values()[1] == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(r.values()[2] == doctest::Approx(s).epsilon(1e-5));
}

TEST_CASE("gelu endpoints") {
    Tensor x = Tensor::from_values({3}, {0.0f, 10.0f, -10.0f});
    Tensor y = gelu(x);
    CHECK(y.values()[0] == 0.0f);
    CHECK(y.values()[1] == doctest::Approx(10.0).epsilon(1e-4));
    CHECK(std::fabs(y.values()[2]) < 1e-4);
}

TEST_CASE("cross_entropy closed forms") {
    // uniform logits over 30 classes
    Tensor logits = Tensor::zeros({1, 30});
    Tensor loss = cross_entropy(logits, {7}, kIgnoreIndex);
    CHECK(loss.item() == doctest::Approx(std::log(30.0)).epsilon(1e-5));

    // near-one-hot: +1000 on the target class
    std::vector<float> v(30, 0.0f);
    v[4] = 1000.0f;
    Tensor hot = Tensor::from_values({1, 30}, std::move(v));
    CHECK(cross_entropy(hot, {4}, kIgnoreIndex).item() == doctest::Approx(0.0).epsilon(1e-6));

    // logits [0, ln 3], target 1 -> -ln(3/4)
    Tensor two = Tensor::from_values({1, 2}, {0.0f, std::log(3.0f)});
    CHECK(cross_entropy(two, {1}, kIgnoreIndex).item() ==
          doctest::Approx(-std::log(3.0 / 4.0)).epsilon(1e-5));

    // all ignored -> exact zero, no gradient contribution
    Tensor lg = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor zero = cross_entropy(lg, {kIgnoreIndex, kIgnoreIndex}, kIgnoreIndex);
    CHECK(zero.item() == 0.0f);
    backward(zero);
    CHECK_FALSE(lg.has_grad());

    CHECK_THROWS_AS(cross_entropy(Tensor::zeros({1, 3}), {5}, kIgnoreIndex), ShapeError);
}

TEST_CASE("backward basics") {
    Tensor x = Tensor::from_values({4}, {1, 2, 3, 4}, true);
    Tensor loss = sum_all(x);
    backward(loss);
    REQUIRE(x.has_grad());
    for (float g : x.grad()) CHECK(g == 1.0f);

    // repeated backward on the same loss without reset is an error
    CHECK_THROWS_AS(backward(loss), UsageError);

    // non-scalar loss is an error
    Tensor y = Tensor::from_values({2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("grad of sum(A x B) matches ones x B^T") {
    Rng rng(5);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({4, 2}, rng, true);
    Tensor loss = sum_all(matmul(a, b));
    backward(loss);

    // dA = ones(3,2) x B^T: dA[i,p] = sum_j B[p,j]
    REQUIRE(a.has_grad());
    for (int i = 0; i < 3; ++i) {
        for (int p = 0; p < 4; ++p) {
            float want = 0.0f;
            for (int j = 0; j < 2; ++j) want += b.values()[static_cast<size_t>(p) * 2 + j];
            CHECK(a.grad()[static_cast<size_t>(i) * 4 + p] == doctest::Approx(want).epsilon(1e-6));
        }
    }
}

TEST_CASE("per-op gradients match central finite differences") {
    Rng rng(17);
    const double tol = 1e-3;

    for (int trial = 0; trial < 3; ++trial) {
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 5}, rng);
        CHECK(gradient_check(a, [&] { return mean_all(matmul(a, b)); }) < tol);
        CHECK(gradient_check(b, [&] { return mean_all(matmul(a, b)); }) < tol);

        Tensor x = random_tensor({2, 3, 4}, rng);
        Tensor y = random_tensor({2, 3, 4}, rng);
        CHECK(gradient_check(x, [&] { return mean_all(mul(x, y)); }) < tol);
        CHECK(gradient_check(x, [&] { return mean_all(add(x, y)); }) < tol);
        CHECK(gradient_check(x, [&] { return mean_all(sub(x, y)); }) < tol);
        CHECK(gradient_check(x, [&] { return mean_all(gelu(x)); }) < tol);
        // weight the softmax output: its plain mean is constant (rows sum to 1)
        Tensor sm_w = random_tensor({2, 3, 4}, rng, false);
        CHECK(gradient_check(x, [&] { return mean_all(mul(softmax(x, 2), sm_w)); }) < tol);
        CHECK(gradient_check(x, [&] { return mean_all(scale(x, 1.7f)); }) < tol);

        Tensor bias = random_tensor({4}, rng);
        CHECK(gradient_check(bias, [&] { return mean_all(add_bias(x, bias)); }) < tol);

        Tensor gamma = random_tensor({4}, rng);
        Tensor beta = random_tensor({4}, rng);
        CHECK(gradient_check(x, [&] { return mean_all(layer_norm(x, gamma, beta, 1e-5f)); }) < tol);
        CHECK(gradient_check(gamma, [&] { return mean_all(layer_norm(x, gamma, beta, 1e-5f)); }) < tol);
        CHECK(gradient_check(beta, [&] { return mean_all(layer_norm(x, gamma, beta, 1e-5f)); }) < tol);

        Tensor p = random_tensor({2, 3, 4}, rng);
        Tensor q = random_tensor({2, 4, 3}, rng);
        CHECK(gradient_check(p, [&] { return mean_all(bmm(p, q)); }) < tol);
        CHECK(gradient_check(q, [&] { return mean_all(bmm(p, q)); }) < tol);

        Tensor u = random_tensor({2, 3, 4}, rng);
        CHECK(gradient_check(p, [&] { return mean_all(bmm_nt(p, u)); }) < tol);
        CHECK(gradient_check(u, [&] { return mean_all(bmm_nt(p, u)); }) < tol);

        Tensor w = random_tensor({4, 6}, rng);
        Tensor wb = random_tensor({6}, rng);
        CHECK(gradient_check(x, [&] { return mean_all(linear(x, w, wb)); }) < tol);
        CHECK(gradient_check(w, [&] { return mean_all(linear(x, w, wb)); }) < tol);
        CHECK(gradient_check(wb, [&] { return mean_all(linear(x, w, wb)); }) < tol);

        // structural ops
        CHECK(gradient_check(x, [&] { return mean_all(split_heads(x, 2)); }) < tol);
        Tensor heads = random_tensor({4, 3, 2}, rng);
        CHECK(gradient_check(heads, [&] { return mean_all(merge_heads(heads, 2)); }) < tol);
        CHECK(gradient_check(x, [&] { return mean_all(reshape(x, {6, 4})); }) < tol);

        Tensor table = random_tensor({7, 4}, rng);
        const std::vector<int> ids = {0, 3, 6, 3, 1, 2};
        CHECK(gradient_check(table, [&] {
                  return mean_all(embedding_rows(table, ids, {2, 3}));
              }) < tol);

        Tensor pos = random_tensor({5, 4}, rng);
        CHECK(gradient_check(pos, [&] { return mean_all(add_positional(x, pos)); }) < tol);
        CHECK(gradient_check(x, [&] { return mean_all(add_positional(x, pos)); }) < tol);

        const std::vector<uint8_t> mask = {1, 1, 0, 1, 0, 0};
        CHECK(gradient_check(x, [&] { return mean_all(mean_pool_masked(x, mask)); }) < tol);

        Tensor scores = random_tensor({4, 3, 3}, rng);
        Tensor attn_w = random_tensor({4, 3, 3}, rng, false);
        CHECK(gradient_check(scores, [&] {
                  return mean_all(mul(softmax(apply_causal_mask(scores), 2), attn_w));
              }) < tol);
        const std::vector<uint8_t> kmask = {1, 1, 1, 1, 1, 0};
        CHECK(gradient_check(scores, [&] {
                  return mean_all(mul(softmax(apply_key_padding_mask(scores, kmask, 2), 2), attn_w));
              }) < tol);

        Tensor prefix = random_tensor({2, 4}, rng);
        CHECK(gradient_check(prefix, [&] { return mean_all(concat_prefix(prefix, x)); }) < tol);
        CHECK(gradient_check(x, [&] { return mean_all(concat_prefix(prefix, x)); }) < tol);

        Tensor mu = random_tensor({2, 5}, rng);
        Tensor logvar = random_tensor({2, 5}, rng, true, 0.3f);
        std::vector<float> eps(10);
        for (auto& e : eps) e = rng.normal_f();
        CHECK(gradient_check(mu, [&] { return mean_all(reparameterize(mu, logvar, eps)); }) < tol);
        CHECK(gradient_check(logvar, [&] { return mean_all(reparameterize(mu, logvar, eps)); }) < tol);
        // fused reductions need a wider FD step to stay above float32
        // forward rounding; truncation is still negligible at 5e-3
        CHECK(gradient_check(mu, [&] { return kl_standard_normal(mu, logvar); }, 5e-3f) < tol);
        CHECK(gradient_check(logvar, [&] { return kl_standard_normal(mu, logvar); }, 5e-3f) < tol);

        Tensor cl = random_tensor({2, 5}, rng);
        CHECK(gradient_check(cl, [&] { return mean_all(clamp(cl, -0.5f, 0.5f)); }) < tol);

        Tensor logits = random_tensor({6, 5}, rng);
        const std::vector<int> targets = {0, 4, kIgnoreIndex, 2, 1, 3};
        CHECK(gradient_check(logits, [&] { return cross_entropy(logits, targets, kIgnoreIndex); },
                             5e-3f) < tol);

        Tensor pred = random_tensor({5}, rng);
        const std::vector<float> tv = {0.1f, -0.2f, 0.3f, 0.0f, 1.0f};
        CHECK(gradient_check(pred, [&] { return mse_loss(pred, tv); }) < tol);
    }
}

TEST_CASE("random composite graphs match finite differences") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 4}, rng);
        Tensor g = random_tensor({4}, rng);
        Tensor bt = random_tensor({4}, rng);
        // wide LayerNorm eps keeps inv_std bounded: gelu squashes rows toward
        // constants and a tiny row variance would leave finite differences
        // truncation-dominated at any usable step
        auto loss_fn = [&] {
            Tensor h = gelu(matmul(a, b));
            h = layer_norm(h, g, bt, 1e-2f);
            return mean_all(mul(softmax(h, 1), h));
        };
        CHECK(gradient_check(a, loss_fn, 5e-3f) < 1e-3);
        CHECK(gradient_check(b, loss_fn, 5e-3f) < 1e-3);
        CHECK(gradient_check(g, loss_fn, 5e-3f) < 1e-3);
    }
}

TEST_CASE("dropout") {
    Rng rng(31);
    Tensor x = Tensor::full({1000}, 1.0f, true);
    SUBCASE("eval mode and rate 0 are pass-through") {
        Tensor same_rate = dropout(x, 0.0f, rng, true);
        CHECK(same_rate.node() == x.node());
        Tensor same_eval = dropout(x, 0.5f, rng, false);
        CHECK(same_eval.node() == x.node());
    }
    SUBCASE("train mode keeps expectation and scales survivors") {
        Tensor y = dropout(x, 0.25f, rng, true);
        int dropped = 0;
        for (float v : y.values()) {
            if (v == 0.0f) {
                ++dropped;
            } else {
                CHECK(v == doctest::Approx(1.0f / 0.75f));
            }
        }
        CHECK(dropped > 180);  // ~250 expected
        CHECK(dropped < 320);
    }
    SUBCASE("invalid rate") { CHECK_THROWS_AS(dropout(x, 1.0f, rng, true), ShapeError); }
}

TEST_CASE("mean_pool_masked rejects all-zero rows") {
    Tensor h = Tensor::zeros({1, 2, 3});
    CHECK_THROWS_AS(mean_pool_masked(h, {0, 0}), ShapeError);
}

TEST_CASE("no-grad mode records nothing") {
    Rng rng(1);
    Tensor a = random_tensor({2, 2}, rng);
    Tensor out;
    {
        NoGradGuard guard;
        out = matmul(a, a);
    }
    CHECK_FALSE(out.requires_grad());
    CHECK(out.node()->parents.empty());
}
