#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "core/rng.hpp"

namespace plm {

const char* task_kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::sequence_classification: return "sequence-classification";
        case TaskKind::token_classification: return "token-classification";
        case TaskKind::sequence_regression: return "sequence-regression";
    }
    return "?";
}

const char* metric_kind_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::accuracy: return "accuracy";
        case MetricKind::auc_roc: return "auc_roc";
        case MetricKind::spearman: return "spearman";
    }
    return "?";
}

TaskKind task_kind_from_name(const std::string& name) {
    if (name == "sequence-classification") return TaskKind::sequence_classification;
    if (name == "token-classification") return TaskKind::token_classification;
    if (name == "sequence-regression") return TaskKind::sequence_regression;
    throw UsageError("unknown task kind '" + name +
                     "' (expected sequence-classification, token-classification or sequence-regression)");
}

MetricKind metric_for(TaskKind kind) {
    switch (kind) {
        case TaskKind::sequence_classification: return MetricKind::accuracy;
        case TaskKind::token_classification: return MetricKind::auc_roc;
        case TaskKind::sequence_regression: return MetricKind::spearman;
    }
    throw UsageError("metric_for: bad kind");
}

TaskSpec TaskSpec::make(std::string name, TaskKind kind, int num_classes) {
    if (kind != TaskKind::sequence_regression && num_classes < 2) {
        throw UsageError("task spec: classification needs at least 2 classes");
    }
    TaskSpec spec;
    spec.name = std::move(name);
    spec.kind = kind;
    spec.num_classes = num_classes;
    spec.metric = metric_for(kind);
    return spec;
}

const std::vector<int>& Splits::of(const std::string& name) const {
    if (name == "train") return train;
    if (name == "valid") return valid;
    if (name == "test") return test;
    throw UsageError("unknown split '" + name + "'");
}

Splits make_splits(size_t n, const std::array<double, 3>& fractions, uint64_t seed) {
    double total = 0.0;
    for (double f : fractions) {
        if (f <= 0.0) throw UsageError("make_splits: fractions must be positive");
        total += f;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw UsageError("make_splits: fractions must sum to 1");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    const size_t n_valid = static_cast<size_t>(std::floor(fractions[1] * static_cast<double>(n)));
    const size_t n_test = static_cast<size_t>(std::floor(fractions[2] * static_cast<double>(n)));
    const size_t n_train = n - n_valid - n_test;  // remainder goes to train

    Splits s;
    s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    s.valid.assign(order.begin() + static_cast<long>(n_train),
                   order.begin() + static_cast<long>(n_train + n_valid));
    s.test.assign(order.begin() + static_cast<long>(n_train + n_valid), order.end());
    return s;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

Label parse_label(const std::string& text, const std::string& sequence, const TaskSpec& spec, int row) {
    switch (spec.kind) {
        case TaskKind::sequence_classification: {
            size_t used = 0;
            int cls = 0;
            try {
                cls = std::stoi(text, &used);
            } catch (const std::exception&) {
                throw CsvError(CsvError::Kind::label_parse, row,
                               "csv row " + std::to_string(row) + ": label '" + text +
                                   "' is not an integer class id");
            }
            if (used != text.size() || cls < 0 || cls >= spec.num_classes) {
                throw CsvError(CsvError::Kind::label_parse, row,
                               "csv row " + std::to_string(row) + ": class id '" + text +
                                   "' out of range [0," + std::to_string(spec.num_classes) + ")");
            }
            return cls;
        }
        case TaskKind::token_classification: {
            if (text.size() != sequence.size()) {
                throw CsvError(CsvError::Kind::label_length, row,
                               "csv row " + std::to_string(row) + ": token label length " +
                                   std::to_string(text.size()) + " != sequence length " +
                                   std::to_string(sequence.size()));
            }
            for (char c : text) {
                if (c != '0' && c != '1') {
                    throw CsvError(CsvError::Kind::label_parse, row,
                                   "csv row " + std::to_string(row) +
                                       ": token labels must be a 0/1 string");
                }
            }
            return text;
        }
        case TaskKind::sequence_regression: {
            size_t used = 0;
            float v = 0.0f;
            try {
                v = std::stof(text, &used);
            } catch (const std::exception&) {
                throw CsvError(CsvError::Kind::label_parse, row,
                               "csv row " + std::to_string(row) + ": label '" + text +
                                   "' is not a float");
            }
            if (used != text.size() || !std::isfinite(v)) {
                throw CsvError(CsvError::Kind::label_parse, row,
                               "csv row " + std::to_string(row) + ": label '" + text +
                                   "' is not a finite float");
            }
            return v;
        }
    }
    throw CsvError(CsvError::Kind::label_parse, row, "csv: bad task kind");
}

}  // namespace

Dataset load_task_csv(const std::string& path, const TaskSpec& spec, uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw CsvError(CsvError::Kind::io, 0, "csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw CsvError(CsvError::Kind::bad_header, 1, "csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    bool has_split = false;
    if (line == "sequence,label") {
        has_split = false;
    } else if (line == "sequence,label,split") {
        has_split = true;
    } else {
        throw CsvError(CsvError::Kind::bad_header, 1,
                       "csv: header must be 'sequence,label[,split]', got '" + line + "'");
    }

    Dataset ds;
    ds.spec = spec;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_row(line);
        const size_t expected = has_split ? 3u : 2u;
        if (fields.size() != expected) {
            throw CsvError(CsvError::Kind::bad_row, row,
                           "csv row " + std::to_string(row) + ": expected " +
                               std::to_string(expected) + " fields, got " +
                               std::to_string(fields.size()));
        }
        const std::string& seq = fields[0];
        if (seq.empty()) {
            throw CsvError(CsvError::Kind::bad_row, row,
                           "csv row " + std::to_string(row) + ": empty sequence");
        }
        Record rec;
        rec.sequence = seq;
        rec.label = parse_label(fields[1], seq, spec, row);
        const int idx = static_cast<int>(ds.records.size());
        ds.records.push_back(std::move(rec));
        if (has_split) {
            const std::string& name = fields[2];
            if (name == "train") {
                ds.splits.train.push_back(idx);
            } else if (name == "valid") {
                ds.splits.valid.push_back(idx);
            } else if (name == "test") {
                ds.splits.test.push_back(idx);
            } else {
                throw CsvError(CsvError::Kind::unknown_split, row,
                               "csv row " + std::to_string(row) + ": unknown split '" + name +
                                   "' (expected train, valid or test)");
            }
        }
    }
    if (ds.records.empty()) {
        throw CsvError(CsvError::Kind::bad_row, row, "csv: no data rows in " + path);
    }
    if (!has_split) ds.splits = make_splits(ds.records.size(), {0.8, 0.1, 0.1}, seed);
    return ds;
}

BatchIterator::BatchIterator(const Dataset& dataset, const std::string& split,
                             const Vocabulary& vocab, int batch_size, int max_len,
                             std::optional<uint64_t> shuffle_seed)
    : dataset_(dataset), vocab_(vocab), batch_size_(batch_size), max_len_(max_len) {
    if (batch_size < 1) throw UsageError("batch_iter: batch_size must be positive");
    if (max_len < 3) throw UsageError("batch_iter: max_len must be at least 3");
    const auto& idx = dataset.splits.of(split);
    if (idx.empty()) throw DataError("batch_iter: split '" + split + "' is empty");
    order_ = idx;
    reset(shuffle_seed);
}

void BatchIterator::reset(std::optional<uint64_t> shuffle_seed) {
    pos_ = 0;
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(order_);
    }
}

bool BatchIterator::next(Batch& out) {
    if (pos_ >= order_.size()) return false;
    const size_t end = std::min(order_.size(), pos_ + static_cast<size_t>(batch_size_));

    // pad to the longest sequence in the batch, capped at max_len
    int pad_len = 3;
    for (size_t i = pos_; i < end; ++i) {
        const auto& seq = dataset_.records[static_cast<size_t>(order_[i])].sequence;
        pad_len = std::max(pad_len, std::min(static_cast<int>(seq.size()) + 2, max_len_));
    }

    out.tokens.clear();
    out.labels.clear();
    out.indices.clear();
    out.padded_len = pad_len;
    for (size_t i = pos_; i < end; ++i) {
        const auto& rec = dataset_.records[static_cast<size_t>(order_[i])];
        out.tokens.push_back(encode(vocab_, rec.sequence, pad_len));
        out.labels.push_back(rec.label);
        out.indices.push_back(order_[i]);
    }
    pos_ = end;
    return true;
}

}  // namespace plm
