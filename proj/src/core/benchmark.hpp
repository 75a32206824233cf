#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/encoder.hpp"
#include "core/metrics.hpp"

namespace plm {

// Reference numbers from the ProtBERT/DeepChem comparison the toolkit is
// modeled on (full-scale training); reported alongside results for context,
// never used as a desk-scale target.
struct ReferenceValues {
    double sub_cellular_localization_accuracy = 69.7;
    double membrane_solubility_accuracy = 85.2;
    double epitope_region_auc_roc = 66.73;
    double gb1_fitness_spearman = 0.43;
};

struct BenchmarkReport {
    std::string task;
    std::string split;
    std::vector<MetricResult> metrics;
    ReferenceValues reference;
    std::map<std::string, std::string> config;
    uint64_t seed = 0;
};

// Raw predictions gathered in eval mode; which vectors are filled depends on
// the task kind.
struct EvalPredictions {
    std::vector<int> pred_classes;   // sequence classification
    std::vector<int> true_classes;
    std::vector<double> scores;      // token classification: P(class 1) per residue
    std::vector<int> binary_truth;
    std::vector<double> pred_values;  // regression
    std::vector<double> true_values;
};

EvalPredictions collect_predictions(const EncoderModel& model, const TaskHead& head,
                                    const Dataset& dataset, const std::string& split,
                                    int batch_size = 16);

// The task's designated metric on one split.
MetricResult evaluate_split(const EncoderModel& model, const TaskHead& head, const Dataset& dataset,
                            const std::string& split, int batch_size = 16);

BenchmarkReport run_benchmark(const EncoderModel& model, const TaskHead& head,
                              const Dataset& dataset, const std::string& split,
                              const std::map<std::string, std::string>& config, uint64_t seed);

// JSON document / one-line CSV row for aggregation.
std::string benchmark_report_json(const BenchmarkReport& report);
std::string benchmark_report_csv(const BenchmarkReport& report);

}  // namespace plm
