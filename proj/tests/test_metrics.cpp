#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/metrics.hpp"
#include "core/rng.hpp"

using namespace plm;

namespace {

// ---- independent brute-force oracles ----

// AUC by exhaustive pair counting: concordant + half credit for ties.
double auc_pair_counting(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                num += 1.0;
            } else if (scores[i] == scores[j]) {
                num += 0.5;
            }
        }
    }
    return num / static_cast<double>(pairs);
}

// Ranks via per-element counting (lower_bound/upper_bound style).
std::vector<double> rank_oracle(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        int less = 0, equal = 0;
        for (double x : v) {
            if (x < v[i]) ++less;
            if (x == v[i]) ++equal;
        }
        out[i] = less + 1 + (equal - 1) * 0.5;
    }
    return out;
}

double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = rank_oracle(x);
    const auto ry = rank_oracle(y);
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < rx.size(); ++i) {
        sx += rx[i];
        sy += ry[i];
        sxy += rx[i] * ry[i];
        sxx += rx[i] * rx[i];
        syy += ry[i] * ry[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Full-table Levenshtein, recursively defined, independent of the two-row
// implementation.
int levenshtein_oracle(const std::string& a, const std::string& b) {
    std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
    for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
    }
    return d[a.size()][b.size()];
}

std::string random_protein(Rng& rng, int min_len, int max_len) {
    const char* alphabet = "ACDEFGHIKLMNPQRSTVWY";
    std::string s(static_cast<size_t>(min_len + rng.below(max_len - min_len + 1)), 'A');
    for (auto& c : s) c = alphabet[rng.below(20)];
    return s;
}

}  // namespace

TEST_CASE("accuracy") {
    CHECK(accuracy({1, 0, 1}, {1, 0, 1}) == 1.0);
    CHECK(accuracy({1, 0, 1}, {1, 0, 0}) == doctest::Approx(2.0 / 3.0));
    CHECK(accuracy({1, 1}, {0, 0}) == 0.0);
    CHECK_THROWS_AS(accuracy({}, {}), MetricError);
    CHECK_THROWS_AS(accuracy({1}, {1, 2}), MetricError);
}

TEST_CASE("auc_roc closed forms and errors") {
    CHECK(auc_roc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
    CHECK(auc_roc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
    CHECK(auc_roc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {1, 1}), MetricError);
    CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {0, 2}), MetricError);
}

TEST_CASE("spearman closed forms and errors") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> rev = x;
    std::reverse(rev.begin(), rev.end());
    CHECK(spearman_rho(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman_rho(x, rev) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(spearman_rho({1, 2, 2, 4}, {1, 3, 2, 4}) ==
          doctest::Approx(spearman_oracle({1, 2, 2, 4}, {1, 3, 2, 4})).epsilon(1e-12));
    CHECK_THROWS_AS(spearman_rho({1, 1, 1}, {1, 2, 3}), MetricError);
    CHECK_THROWS_AS(spearman_rho({1}, {1}), MetricError);
}

TEST_CASE("sequence identity closed forms") {
    CHECK(sequence_identity("ACDE", "ACDE") == 1.0);
    CHECK(sequence_identity("ACDE", "ACDF") == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(sequence_identity("A", "W") == 0.0);
    CHECK_THROWS_AS(sequence_identity("", "A"), MetricError);
}

TEST_CASE("200 random instances match the oracles within 1e-12") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 5 + static_cast<int>(rng.below(40));

        // AUC with deliberate ties (quantized scores)
        std::vector<double> scores(static_cast<size_t>(n));
        std::vector<int> labels(static_cast<size_t>(n));
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            scores[static_cast<size_t>(i)] = std::floor(rng.uniform() * 8.0) / 8.0;
            labels[static_cast<size_t>(i)] = rng.uniform() < 0.5 ? 0 : 1;
            pos += labels[static_cast<size_t>(i)];
        }
        if (pos == 0) labels[0] = 1;
        if (pos == n) labels[0] = 0;
        CHECK(std::fabs(auc_roc(scores, labels) - auc_pair_counting(scores, labels)) < 1e-12);

        // Spearman with ties
        std::vector<double> x(static_cast<size_t>(n)), y(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            x[static_cast<size_t>(i)] = std::floor(rng.uniform() * 12.0);
            y[static_cast<size_t>(i)] = std::floor(rng.uniform() * 12.0);
        }
        x[0] = -1;  // guarantee non-constant
        x[1] = 13;
        y[0] = -1;
        y[1] = 13;
        CHECK(std::fabs(spearman_rho(x, y) - spearman_oracle(x, y)) < 1e-12);

        // identity vs full-table DP
        const std::string a = random_protein(rng, 1, 30);
        const std::string b = random_protein(rng, 1, 30);
        const double want = 1.0 - static_cast<double>(levenshtein_oracle(a, b)) /
                                      static_cast<double>(std::max(a.size(), b.size()));
        CHECK(std::fabs(sequence_identity(a, b) - want) < 1e-12);
    }
}

TEST_CASE("monotone transform invariance") {
    Rng rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 8 + static_cast<int>(rng.below(30));
        std::vector<double> scores(static_cast<size_t>(n));
        std::vector<int> labels(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            scores[static_cast<size_t>(i)] = rng.normal();
            labels[static_cast<size_t>(i)] = i % 2;
        }
        // strictly monotone map: a*x + b with a>0, then exp or atan-ish mixes
        const double a = 0.5 + rng.uniform() * 3.0;
        const double b = rng.normal();
        std::vector<double> mapped(scores);
        const int which = static_cast<int>(rng.below(3));
        for (auto& s : mapped) {
            const double t = a * s + b;
            s = which == 0 ? t : which == 1 ? std::exp(t) : std::atan(t) * 2.0 + t;
        }
        CHECK(auc_roc(scores, labels) == doctest::Approx(auc_roc(mapped, labels)).epsilon(1e-12));

        std::vector<double> y(static_cast<size_t>(n));
        for (auto& v : y) v = rng.normal();
        CHECK(spearman_rho(scores, y) == doctest::Approx(spearman_rho(mapped, y)).epsilon(1e-12));
        CHECK(spearman_rho(y, scores) == doctest::Approx(spearman_rho(y, mapped)).epsilon(1e-12));
    }
}

TEST_CASE("identity is symmetric and 1 iff equal") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::string a = random_protein(rng, 1, 20);
        const std::string b = random_protein(rng, 1, 20);
        CHECK(sequence_identity(a, b) == sequence_identity(b, a));
        CHECK((sequence_identity(a, b) == 1.0) == (a == b));
        CHECK(sequence_identity(a, a) == 1.0);
    }
}
