#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core/errors.hpp"
#include "core/tokenizer.hpp"

namespace plm {

enum class TaskKind { sequence_classification, token_classification, sequence_regression };
enum class MetricKind { accuracy, auc_roc, spearman };

const char* task_kind_name(TaskKind kind);
const char* metric_kind_name(MetricKind kind);
TaskKind task_kind_from_name(const std::string& name);

// Metric is pinned by kind: accuracy for sequence classification, AUC-ROC
// for token classification, Spearman rho for sequence regression.
MetricKind metric_for(TaskKind kind);

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::sequence_classification;
    int num_classes = 2;  // classification kinds only
    MetricKind metric = MetricKind::accuracy;

    static TaskSpec make(std::string name, TaskKind kind, int num_classes = 2);
};

// Label: class id, per-residue 0/1 string, or regression float.
using Label = std::variant<int, std::string, float>;

struct Record {
    std::string sequence;
    Label label;
};

struct Splits {
    std::vector<int> train;
    std::vector<int> valid;
    std::vector<int> test;

    const std::vector<int>& of(const std::string& name) const;
};

struct Dataset {
    TaskSpec spec;
    std::vector<Record> records;
    Splits splits;
};

// Reads `sequence,label[,split]` CSV. Errors carry 1-based row numbers
// (header is row 1). Without a split column a deterministic 80/10/10 split
// keyed by `seed` is applied.
Dataset load_task_csv(const std::string& path, const TaskSpec& spec, uint64_t seed);

// Deterministic shuffled split; sizes are floor(n*fraction) with the
// remainder going to train. Fractions must be positive and sum to 1.
Splits make_splits(size_t n, const std::array<double, 3>& fractions, uint64_t seed);

struct Batch {
    std::vector<TokenSequence> tokens;
    std::vector<Label> labels;
    std::vector<int> indices;  // dataset indices, for traceability
    int padded_len = 0;        // common padded length of this batch
};

// Iterates one epoch over a split in deterministic order. Sequences in a
// batch share a padded length (batch max, capped at max_len); the last
// partial batch is emitted. Without a shuffle seed, split order is kept.
class BatchIterator {
public:
    BatchIterator(const Dataset& dataset, const std::string& split, const Vocabulary& vocab,
                  int batch_size, int max_len, std::optional<uint64_t> shuffle_seed);

    bool next(Batch& out);
    void reset(std::optional<uint64_t> shuffle_seed);
    size_t size() const { return order_.size(); }

private:
    const Dataset& dataset_;
    const Vocabulary& vocab_;
    std::vector<int> order_;
    int batch_size_;
    int max_len_;
    size_t pos_ = 0;
};

}  // namespace plm
