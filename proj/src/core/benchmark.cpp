#include "core/benchmark.hpp"

#include <sstream>

#include <json.hpp>

namespace plm {

EvalPredictions collect_predictions(const EncoderModel& model, const TaskHead& head,
                                    const Dataset& dataset, const std::string& split,
                                    int batch_size) {
    if (dataset.spec.kind != head.kind) {
        throw UsageError("collect_predictions: dataset/head kind mismatch");
    }
    Vocabulary vocab;
    EvalPredictions out;
    NoGradGuard no_grad;
    BatchIterator iter(dataset, split, vocab, batch_size, model.config.max_len, std::nullopt);
    Batch batch;
    while (iter.next(batch)) {
        Tensor hidden = encode_batch(model, batch.tokens, false);
        switch (head.kind) {
            case TaskKind::sequence_classification: {
                Tensor logits = head_forward(head, pool(hidden, flatten_attention_masks(batch.tokens)));
                const int c = logits.dim(1);
                for (size_t i = 0; i < batch.labels.size(); ++i) {
                    const float* row = logits.values().data() + i * static_cast<size_t>(c);
                    int best = 0;
                    for (int j = 1; j < c; ++j) {
                        if (row[j] > row[best]) best = j;
                    }
                    out.pred_classes.push_back(best);
                    out.true_classes.push_back(std::get<int>(batch.labels[i]));
                }
                break;
            }
            case TaskKind::token_classification: {
                if (head.num_classes != 2) {
                    throw UsageError("collect_predictions: token-classification AUC needs 2 classes");
                }
                Tensor probs = softmax(head_forward(head, hidden), 2);
                const int l = batch.padded_len;
                for (size_t i = 0; i < batch.tokens.size(); ++i) {
                    const auto& tok = batch.tokens[i];
                    const auto& labels = std::get<std::string>(batch.labels[i]);
                    for (int p = 1; p + 1 < tok.true_length; ++p) {
                        const size_t off = ((i * static_cast<size_t>(l)) + static_cast<size_t>(p)) * 2;
                        out.scores.push_back(probs.values()[off + 1]);
                        out.binary_truth.push_back(labels[static_cast<size_t>(p - 1)] - '0');
                    }
                }
                break;
            }
            case TaskKind::sequence_regression: {
                Tensor pred = head_forward(head, pool(hidden, flatten_attention_masks(batch.tokens)));
                for (size_t i = 0; i < batch.labels.size(); ++i) {
                    out.pred_values.push_back(pred.values()[i]);
                    out.true_values.push_back(std::get<float>(batch.labels[i]));
                }
                break;
            }
        }
    }
    return out;
}

MetricResult evaluate_split(const EncoderModel& model, const TaskHead& head, const Dataset& dataset,
                            const std::string& split, int batch_size) {
    const auto preds = collect_predictions(model, head, dataset, split, batch_size);
    MetricResult r;
    r.name = metric_kind_name(dataset.spec.metric);
    switch (dataset.spec.metric) {
        case MetricKind::accuracy:
            r.value = accuracy(preds.pred_classes, preds.true_classes);
            r.support = static_cast<int>(preds.pred_classes.size());
            break;
        case MetricKind::auc_roc:
            r.value = auc_roc(preds.scores, preds.binary_truth);
            r.support = static_cast<int>(preds.scores.size());
            break;
        case MetricKind::spearman:
            r.value = spearman_rho(preds.pred_values, preds.true_values);
            r.support = static_cast<int>(preds.pred_values.size());
            break;
    }
    return r;
}

BenchmarkReport run_benchmark(const EncoderModel& model, const TaskHead& head,
                              const Dataset& dataset, const std::string& split,
                              const std::map<std::string, std::string>& config, uint64_t seed) {
    if (dataset.splits.of(split).empty()) {
        throw DataError("run_benchmark: split '" + split + "' is empty");
    }
    BenchmarkReport report;
    report.task = dataset.spec.name;
    report.split = split;
    report.metrics.push_back(evaluate_split(model, head, dataset, split));
    report.config = config;
    report.seed = seed;
    return report;
}

std::string benchmark_report_json(const BenchmarkReport& report) {
    nlohmann::json j;
    j["task"] = report.task;
    j["split"] = report.split;
    j["metrics"] = nlohmann::json::array();
    for (const auto& m : report.metrics) {
        j["metrics"].push_back({{"name", m.name}, {"value", m.value}, {"support", m.support}});
    }
    j["reference"] = {
        {"sub_cellular_localization_accuracy", report.reference.sub_cellular_localization_accuracy},
        {"membrane_solubility_accuracy", report.reference.membrane_solubility_accuracy},
        {"epitope_region_auc_roc", report.reference.epitope_region_auc_roc},
        {"gb1_fitness_spearman", report.reference.gb1_fitness_spearman},
        {"note", "full-scale reference values; not a target at desk scale"},
    };
    j["config"] = report.config;
    j["seed"] = report.seed;
    return j.dump(2) + "\n";
}

std::string benchmark_report_csv(const BenchmarkReport& report) {
    std::ostringstream os;
    for (const auto& m : report.metrics) {
        os << report.task << ',' << report.split << ',' << m.name << ',' << m.value << ','
           << m.support << ',' << report.seed << '\n';
    }
    return os.str();
}

}  // namespace plm
