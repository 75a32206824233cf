#include "core/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include "core/benchmark.hpp"

namespace plm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_finite_loss(float loss, const char* what) {
    if (!std::isfinite(loss)) {
        throw NumericError(std::string(what) + ": non-finite loss, training diverged");
    }
}

// Pads a slice of corpus indices to the slice max length (capped by model).
std::vector<TokenSequence> encode_slice(const Vocabulary& vocab,
                                        const std::vector<std::string>& corpus,
                                        const std::vector<int>& order, size_t begin, size_t end,
                                        int max_len) {
    int pad_len = 3;
    for (size_t i = begin; i < end; ++i) {
        const auto& s = corpus[static_cast<size_t>(order[i])];
        pad_len = std::max(pad_len, std::min(static_cast<int>(s.size()) + 2, max_len));
    }
    std::vector<TokenSequence> batch;
    batch.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) {
        batch.push_back(encode(vocab, corpus[static_cast<size_t>(order[i])], pad_len));
    }
    return batch;
}

struct MaskedBatch {
    std::vector<TokenSequence> corrupted;
    std::vector<int> labels;  // flattened (B*L), kIgnoreIndex where unselected
};

MaskedBatch corrupt_batch(const Vocabulary& vocab, const std::vector<TokenSequence>& batch,
                          const MaskingPolicy& policy, uint64_t stream) {
    MaskedBatch out;
    out.corrupted.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        MaskingPolicy item_policy = policy;
        item_policy.seed = mix_seed(policy.seed, stream * 0x10001ULL + i);
        auto masked = apply_mlm_mask(vocab, batch[i], item_policy);
        TokenSequence seq = batch[i];
        seq.ids = std::move(masked.corrupted);
        out.corrupted.push_back(std::move(seq));
        out.labels.insert(out.labels.end(), masked.labels.begin(), masked.labels.end());
    }
    return out;
}

}  // namespace

double masked_token_accuracy(const EncoderModel& model, const std::vector<std::string>& sequences,
                             const MaskingPolicy& policy, uint64_t eval_seed, int batch_size) {
    Vocabulary vocab;
    int64_t hits = 0, total = 0;
    std::vector<int> order(sequences.size());
    std::iota(order.begin(), order.end(), 0);
    NoGradGuard no_grad;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(order.size(), begin + static_cast<size_t>(batch_size));
        auto batch = encode_slice(vocab, sequences, order, begin, end, model.config.max_len);
        MaskingPolicy eval_policy = policy;
        eval_policy.seed = mix_seed(eval_seed, 0xE7A1ULL + begin);
        auto masked = corrupt_batch(vocab, batch, eval_policy, 0);
        Tensor hidden = encode_batch(model, masked.corrupted, false);
        Tensor logits = mlm_logits(model, hidden);
        const int l = static_cast<int>(batch.front().ids.size());
        const int v = model.config.vocab_size;
        const auto vals = logits.values();
        for (size_t pos = 0; pos < masked.labels.size(); ++pos) {
            const int label = masked.labels[pos];
            if (label == kIgnoreIndex) continue;
            const float* row = vals.data() + pos * static_cast<size_t>(v);
            int best = 0;
            for (int j = 1; j < v; ++j) {
                if (row[j] > row[best]) best = j;
            }
            hits += best == label ? 1 : 0;
            ++total;
        }
        (void)l;
    }
    if (total == 0) return 0.0;
    return static_cast<double>(hits) / static_cast<double>(total);
}

TrainRunReport pretrain(EncoderModel& model, const std::vector<std::string>& corpus,
                        const PretrainOptions& opts) {
    if (corpus.empty()) throw DataError("pretrain: empty corpus");
    for (const auto& s : corpus) {
        if (s.empty()) throw DataError("pretrain: corpus contains an empty sequence");
    }
    opts.policy.validate();
    if (opts.steps < 0 || opts.batch_size < 1) {
        throw UsageError("pretrain: steps must be >= 0 and batch_size >= 1");
    }

    const auto t0 = Clock::now();
    Vocabulary vocab;

    // trailing slice held out for reporting, never trained on
    size_t n_train = corpus.size();
    if (opts.heldout_fraction > 0.0 && corpus.size() >= 10) {
        const auto held = static_cast<size_t>(std::ceil(opts.heldout_fraction *
                                                        static_cast<double>(corpus.size())));
        if (held > 0 && held < corpus.size()) n_train = corpus.size() - held;
    }
    std::vector<std::string> train_slice(corpus.begin(), corpus.begin() + static_cast<long>(n_train));
    std::vector<std::string> heldout_slice(corpus.begin() + static_cast<long>(n_train), corpus.end());

    TrainRunReport report;
    report.seed = opts.seed;

    AdamState optimizer(model.parameters(), opts.optim);
    Rng dropout_rng = Rng::derive(opts.seed, 0xD0);

    std::vector<int> order(train_slice.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = 0;
    uint64_t epoch = 0;
    Rng::derive(opts.seed, epoch);  // documented stream layout; epoch 0 shuffle below
    {
        Rng shuffle_rng = Rng::derive(opts.seed, 0xE0 + epoch);
        shuffle_rng.shuffle(order);
    }

    for (int step = 0; step < opts.steps; ++step) {
        if (cursor >= order.size()) {
            cursor = 0;
            ++epoch;
            Rng shuffle_rng = Rng::derive(opts.seed, 0xE0 + epoch);
            shuffle_rng.shuffle(order);
        }
        const size_t end = std::min(order.size(), cursor + static_cast<size_t>(opts.batch_size));
        auto batch = encode_slice(vocab, train_slice, order, cursor, end, model.config.max_len);
        cursor = end;

        auto masked = corrupt_batch(vocab, batch, opts.policy, static_cast<uint64_t>(step));
        Tensor hidden = encode_batch(model, masked.corrupted, true, &dropout_rng);
        Tensor logits = mlm_logits(model, hidden);
        const int rows = logits.dim(0) * logits.dim(1);
        Tensor loss = cross_entropy(reshape(logits, {rows, logits.dim(2)}), masked.labels, kIgnoreIndex);

        const float loss_v = loss.item();
        check_finite_loss(loss_v, "pretrain");
        report.loss_trace.push_back(loss_v);

        optimizer.zero_grad();
        backward(loss);
        optimizer.step();
    }

    report.final_metrics["masked_accuracy_train"] =
        masked_token_accuracy(model, train_slice, opts.policy, mix_seed(opts.seed, 0xACC), opts.batch_size);
    if (!heldout_slice.empty()) {
        report.final_metrics["masked_accuracy_heldout"] = masked_token_accuracy(
            model, heldout_slice, opts.policy, mix_seed(opts.seed, 0xACC + 1), opts.batch_size);
    }
    report.wall_clock_seconds = seconds_since(t0);
    return report;
}

namespace {

// Flattened CE targets for a token-classification batch: residue positions
// carry their 0/1 label, specials/padding and truncated tails are ignored.
std::vector<int> token_targets(const Batch& batch) {
    const int l = batch.padded_len;
    std::vector<int> targets(batch.tokens.size() * static_cast<size_t>(l), kIgnoreIndex);
    for (size_t i = 0; i < batch.tokens.size(); ++i) {
        const auto& labels = std::get<std::string>(batch.labels[i]);
        const auto& tok = batch.tokens[i];
        for (int p = 1; p + 1 < tok.true_length; ++p) {
            targets[i * static_cast<size_t>(l) + static_cast<size_t>(p)] =
                labels[static_cast<size_t>(p - 1)] - '0';
        }
    }
    return targets;
}

}  // namespace

TrainRunReport finetune(EncoderModel& model, TaskHead& head, const Dataset& dataset,
                        const FinetuneOptions& opts) {
    if (dataset.spec.kind != head.kind) {
        throw UsageError("finetune: dataset kind " + std::string(task_kind_name(dataset.spec.kind)) +
                         " does not match head kind " + task_kind_name(head.kind));
    }
    if (dataset.splits.train.empty()) throw DataError("finetune: empty train split");
    if (opts.steps < 0 || opts.batch_size < 1) {
        throw UsageError("finetune: steps must be >= 0 and batch_size >= 1");
    }

    const auto t0 = Clock::now();
    Vocabulary vocab;
    TrainRunReport report;
    report.seed = opts.seed;

    AdamState head_optimizer(head.parameters(), opts.head_optim);
    std::unique_ptr<AdamState> encoder_optimizer;
    if (!opts.freeze_encoder) {
        // the MLM output head is not on any task-loss path; leave it out
        encoder_optimizer = std::make_unique<AdamState>(model.backbone_parameters(), opts.encoder_optim);
    }
    Rng dropout_rng = Rng::derive(opts.seed, 0xD1);

    int step = 0;
    uint64_t epoch = 0;
    BatchIterator iter(dataset, "train", vocab, opts.batch_size, model.config.max_len,
                       mix_seed(opts.seed, 0xE1));
    Batch batch;
    while (step < opts.steps) {
        if (!iter.next(batch)) {
            ++epoch;
            iter.reset(mix_seed(opts.seed, 0xE1 + epoch));
            continue;
        }

        Tensor hidden;
        if (opts.freeze_encoder) {
            NoGradGuard no_grad;
            hidden = encode_batch(model, batch.tokens, false);
        } else {
            hidden = encode_batch(model, batch.tokens, true, &dropout_rng);
        }

        Tensor loss;
        switch (head.kind) {
            case TaskKind::sequence_classification: {
                Tensor logits = head_forward(head, pool(hidden, flatten_attention_masks(batch.tokens)));
                std::vector<int> targets;
                targets.reserve(batch.labels.size());
                for (const auto& lab : batch.labels) targets.push_back(std::get<int>(lab));
                loss = cross_entropy(logits, targets, kIgnoreIndex);
                break;
            }
            case TaskKind::token_classification: {
                Tensor logits = head_forward(head, hidden);
                const int rows = logits.dim(0) * logits.dim(1);
                loss = cross_entropy(reshape(logits, {rows, logits.dim(2)}), token_targets(batch),
                                     kIgnoreIndex);
                break;
            }
            case TaskKind::sequence_regression: {
                Tensor pred = head_forward(head, pool(hidden, flatten_attention_masks(batch.tokens)));
                std::vector<float> targets;
                targets.reserve(batch.labels.size());
                for (const auto& lab : batch.labels) targets.push_back(std::get<float>(lab));
                loss = mse_loss(pred, targets);
                break;
            }
        }

        const float loss_v = loss.item();
        check_finite_loss(loss_v, "finetune");
        report.loss_trace.push_back(loss_v);

        head_optimizer.zero_grad();
        if (encoder_optimizer) encoder_optimizer->zero_grad();
        backward(loss);
        head_optimizer.step();
        if (encoder_optimizer) encoder_optimizer->step();
        ++step;
    }

    for (const char* split : {"valid", "test"}) {
        if (dataset.splits.of(split).empty()) continue;
        const MetricResult r = evaluate_split(model, head, dataset, split, opts.batch_size);
        report.final_metrics[std::string(split) + "_" + r.name] = r.value;
    }
    report.wall_clock_seconds = seconds_since(t0);
    return report;
}

}  // namespace plm
