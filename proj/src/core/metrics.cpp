#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace plm {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw MetricError("accuracy: length mismatch");
    if (predicted.empty()) throw MetricError("accuracy: empty input");
    size_t hits = 0;
    for (size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });

    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        // positions i..j share the average of 1-based ranks i+1..j+1
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw MetricError("auc_roc: length mismatch");
    if (scores.empty()) throw MetricError("auc_roc: empty input");
    int64_t pos = 0, neg = 0;
    for (int l : labels) {
        if (l == 1) {
            ++pos;
        } else if (l == 0) {
            ++neg;
        } else {
            throw MetricError("auc_roc: labels must be 0 or 1");
        }
    }
    if (pos == 0 || neg == 0) {
        throw MetricError("auc_roc: undefined for single-class input (" + std::to_string(pos) +
                          " positives, " + std::to_string(neg) + " negatives)");
    }
    const auto ranks = average_ranks(scores);
    double rank_sum_pos = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) rank_sum_pos += ranks[i];
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw MetricError("spearman_rho: length mismatch");
    if (x.size() < 2) throw MetricError("spearman_rho: need at least 2 points");
    const auto all_equal = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
    };
    if (all_equal(x) || all_equal(y)) {
        throw MetricError("spearman_rho: undefined for constant input");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

int levenshtein_distance(const std::string& a, const std::string& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double sequence_identity(const std::string& a, const std::string& b) {
    if (a.empty() || b.empty()) throw MetricError("sequence_identity: empty input");
    const double d = levenshtein_distance(a, b);
    return 1.0 - d / static_cast<double>(std::max(a.size(), b.size()));
}

}  // namespace plm
