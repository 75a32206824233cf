#pragma once

#include <string>
#include <vector>

#include "core/errors.hpp"

namespace plm {

struct MetricResult {
    std::string name;
    double value = 0.0;
    int support = 0;  // number of scored items
};

// Fraction of exact matches. Errors on empty or length-mismatched input.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

// Mann-Whitney AUC: (concordant pairs + 0.5 * tied pairs) / (P*N), computed
// via average ranks. Both classes must be present; a single-class input is a
// MetricError, not 0.5.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

// Pearson correlation of average ranks (ties share the average rank).
// Needs length >= 2 and non-constant input on both sides.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// 1 - Levenshtein(a,b) / max(|a|,|b|). Errors on empty input.
double sequence_identity(const std::string& a, const std::string& b);

int levenshtein_distance(const std::string& a, const std::string& b);

// Average ranks (1-based, ties averaged); shared by spearman and AUC.
std::vector<double> average_ranks(const std::vector<double>& v);

}  // namespace plm
