#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/tensor.hpp"
#include "core/tokenizer.hpp"

namespace plm {

struct EncoderConfig {
    int num_layers = 2;
    int num_heads = 4;
    int hidden_dim = 64;
    int ffn_dim = 256;  // 4 * hidden_dim by convention
    int max_len = 128;
    int vocab_size = Vocabulary::kSize;
    float dropout_rate = 0.0f;
    uint64_t seed = 42;

    void validate() const;
};

// One post-norm transformer block: x = LN(x + MHA(x)); x = LN(x + FFN(x)).
struct EncoderLayer {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gamma, ln1_beta;
    Tensor w1, b1, w2, b2;
    Tensor ln2_gamma, ln2_beta;
};

struct EncoderModel {
    EncoderConfig config;
    Tensor token_embedding;     // (vocab, d)
    Tensor position_embedding;  // (max_len, d), learned
    Tensor emb_ln_gamma, emb_ln_beta;
    std::vector<EncoderLayer> layers;
    Tensor mlm_w, mlm_b;  // (d, vocab) output head

    // Stable order; checkpoint tensor names come from named_parameters().
    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    // Everything except the MLM output head (the set task losses touch).
    std::vector<Tensor> backbone_parameters() const;
    int64_t parameter_count() const;
};

// Parameter count implied by the architecture, verified in tests:
//   embeddings  vocab*d + max_len*d + 2d (embedding LayerNorm)
//   per layer   4*(d*d + d) attention + (d*f + f) + (f*d + d) FFN + 4d norms
//   MLM head    d*vocab + vocab
int64_t encoder_parameter_count(const EncoderConfig& cfg);

// Deterministic init from config.seed: truncated normal (std 0.02) weights,
// zero biases, unit LayerNorm gains.
EncoderModel init_encoder(const EncoderConfig& cfg);

// Attention probabilities captured for inspection (eval-mode tests).
struct AttentionTrace {
    std::vector<Tensor> per_layer;  // each (B*H, L, L)
};

// Transformer forward over a padded batch. Padded keys are masked out of
// attention; dropout only runs in train mode (rng required then).
Tensor encode_batch(const EncoderModel& model, const std::vector<TokenSequence>& batch,
                    bool train_mode, Rng* rng = nullptr, AttentionTrace* trace = nullptr);

// Per-position vocabulary logits (B,L,vocab) from hidden states.
Tensor mlm_logits(const EncoderModel& model, const Tensor& hidden);

// Masked mean over positions with attention_mask == 1 ([CLS]/[SEP] included).
Tensor pool(const Tensor& hidden, const std::vector<uint8_t>& attention_mask);

std::vector<uint8_t> flatten_attention_masks(const std::vector<TokenSequence>& batch);
std::vector<int> flatten_ids(const std::vector<TokenSequence>& batch);

// One-hidden-layer MLP head over pooled (sequence kinds) or per-token hidden
// states (token kind); regression output is a raw scalar per sequence.
struct TaskHead {
    TaskKind kind = TaskKind::sequence_classification;
    int num_classes = 2;  // ignored for regression
    Tensor w1, b1;        // (d, h)
    Tensor w2, b2;        // (h, C) or (h, 1)

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

TaskHead init_task_head(TaskKind kind, int input_dim, int hidden_dim, int num_classes, uint64_t seed);

// logits (B,C), (B,L,C) or predictions (B,1) depending on head kind
Tensor head_forward(const TaskHead& head, const Tensor& input);

}  // namespace plm
