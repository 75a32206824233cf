#include "core/encoder.hpp"

#include <cmath>

namespace plm {

namespace {
constexpr float kInitStd = 0.02f;
constexpr float kLnEps = 1e-5f;

Tensor init_weight(Rng& rng, int rows, int cols) {
    std::vector<float> v(static_cast<size_t>(rows) * cols);
    for (auto& x : v) x = rng.truncated_normal_f(kInitStd);
    return Tensor::from_values({rows, cols}, std::move(v), true);
}

Tensor init_zeros(int n) { return Tensor::zeros({n}, true); }
Tensor init_ones(int n) { return Tensor::full({n}, 1.0f, true); }

}  // namespace

void EncoderConfig::validate() const {
    if (num_layers < 1 || num_heads < 1 || hidden_dim < 1 || ffn_dim < 1 || max_len < 3) {
        throw UsageError("encoder config: dimensions must be positive (max_len >= 3)");
    }
    if (hidden_dim % num_heads != 0) {
        throw UsageError("encoder config: hidden_dim " + std::to_string(hidden_dim) +
                         " not divisible by num_heads " + std::to_string(num_heads));
    }
    if (vocab_size != Vocabulary::kSize) {
        throw UsageError("encoder config: vocab_size must be " + std::to_string(Vocabulary::kSize));
    }
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f) {
        throw UsageError("encoder config: dropout_rate must be in [0,1)");
    }
}

int64_t encoder_parameter_count(const EncoderConfig& cfg) {
    const int64_t d = cfg.hidden_dim, f = cfg.ffn_dim, v = cfg.vocab_size, p = cfg.max_len;
    const int64_t embeddings = v * d + p * d + 2 * d;
    const int64_t attention = 4 * (d * d + d);
    const int64_t ffn = (d * f + f) + (f * d + d);
    const int64_t norms = 4 * d;
    const int64_t head = d * v + v;
    return embeddings + cfg.num_layers * (attention + ffn + norms) + head;
}

EncoderModel init_encoder(const EncoderConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int d = cfg.hidden_dim, f = cfg.ffn_dim;

    EncoderModel m;
    m.config = cfg;
    m.token_embedding = init_weight(rng, cfg.vocab_size, d);
    m.position_embedding = init_weight(rng, cfg.max_len, d);
    m.emb_ln_gamma = init_ones(d);
    m.emb_ln_beta = init_zeros(d);
    for (int l = 0; l < cfg.num_layers; ++l) {
        EncoderLayer layer;
        layer.wq = init_weight(rng, d, d);
        layer.bq = init_zeros(d);
        layer.wk = init_weight(rng, d, d);
        layer.bk = init_zeros(d);
        layer.wv = init_weight(rng, d, d);
        layer.bv = init_zeros(d);
        layer.wo = init_weight(rng, d, d);
        layer.bo = init_zeros(d);
        layer.ln1_gamma = init_ones(d);
        layer.ln1_beta = init_zeros(d);
        layer.w1 = init_weight(rng, d, f);
        layer.b1 = init_zeros(f);
        layer.w2 = init_weight(rng, f, d);
        layer.b2 = init_zeros(d);
        layer.ln2_gamma = init_ones(d);
        layer.ln2_beta = init_zeros(d);
        m.layers.push_back(std::move(layer));
    }
    m.mlm_w = init_weight(rng, d, cfg.vocab_size);
    m.mlm_b = init_zeros(cfg.vocab_size);
    return m;
}

std::vector<std::pair<std::string, Tensor>> EncoderModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("token_embedding", token_embedding);
    out.emplace_back("position_embedding", position_embedding);
    out.emplace_back("emb_ln_gamma", emb_ln_gamma);
    out.emplace_back("emb_ln_beta", emb_ln_beta);
    for (size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        const auto& lay = layers[l];
        out.emplace_back(p + "wq", lay.wq);
        out.emplace_back(p + "bq", lay.bq);
        out.emplace_back(p + "wk", lay.wk);
        out.emplace_back(p + "bk", lay.bk);
        out.emplace_back(p + "wv", lay.wv);
        out.emplace_back(p + "bv", lay.bv);
        out.emplace_back(p + "wo", lay.wo);
        out.emplace_back(p + "bo", lay.bo);
        out.emplace_back(p + "ln1_gamma", lay.ln1_gamma);
        out.emplace_back(p + "ln1_beta", lay.ln1_beta);
        out.emplace_back(p + "w1", lay.w1);
        out.emplace_back(p + "b1", lay.b1);
        out.emplace_back(p + "w2", lay.w2);
        out.emplace_back(p + "b2", lay.b2);
        out.emplace_back(p + "ln2_gamma", lay.ln2_gamma);
        out.emplace_back(p + "ln2_beta", lay.ln2_beta);
    }
    out.emplace_back("mlm_w", mlm_w);
    out.emplace_back("mlm_b", mlm_b);
    return out;
}

std::vector<Tensor> EncoderModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::vector<Tensor> EncoderModel::backbone_parameters() const {
    auto out = parameters();
    out.pop_back();  // mlm_b
    out.pop_back();  // mlm_w
    return out;
}

int64_t EncoderModel::parameter_count() const {
    int64_t n = 0;
    for (const auto& t : parameters()) n += t.numel();
    return n;
}

std::vector<uint8_t> flatten_attention_masks(const std::vector<TokenSequence>& batch) {
    std::vector<uint8_t> mask;
    mask.reserve(batch.size() * batch.front().ids.size());
    for (const auto& t : batch) mask.insert(mask.end(), t.attention_mask.begin(), t.attention_mask.end());
    return mask;
}

std::vector<int> flatten_ids(const std::vector<TokenSequence>& batch) {
    std::vector<int> ids;
    ids.reserve(batch.size() * batch.front().ids.size());
    for (const auto& t : batch) ids.insert(ids.end(), t.ids.begin(), t.ids.end());
    return ids;
}

Tensor encode_batch(const EncoderModel& model, const std::vector<TokenSequence>& batch,
                    bool train_mode, Rng* rng, AttentionTrace* trace) {
    const auto& cfg = model.config;
    if (batch.empty()) throw UsageError("encode_batch: empty batch");
    const int b = static_cast<int>(batch.size());
    const int l = static_cast<int>(batch.front().ids.size());
    for (const auto& t : batch) {
        if (static_cast<int>(t.ids.size()) != l || static_cast<int>(t.attention_mask.size()) != l) {
            throw ShapeError("encode_batch: sequences in a batch must share max_len");
        }
    }
    if (l > cfg.max_len) {
        throw ShapeError("encode_batch: sequence length " + std::to_string(l) +
                         " exceeds model max_len " + std::to_string(cfg.max_len));
    }
    if (train_mode && cfg.dropout_rate > 0.0f && rng == nullptr) {
        throw UsageError("encode_batch: train mode with dropout needs an rng");
    }

    const auto ids = flatten_ids(batch);
    const auto mask = flatten_attention_masks(batch);
    const int heads = cfg.num_heads;
    const float inv_sqrt_dh =
        1.0f / std::sqrt(static_cast<float>(cfg.hidden_dim / cfg.num_heads));

    Tensor x = embedding_rows(model.token_embedding, ids, {b, l});
    x = add_positional(x, model.position_embedding);
    x = layer_norm(x, model.emb_ln_gamma, model.emb_ln_beta, kLnEps);
    if (train_mode && cfg.dropout_rate > 0.0f) x = dropout(x, cfg.dropout_rate, *rng, true);

    for (const auto& layer : model.layers) {
        Tensor q = split_heads(linear(x, layer.wq, layer.bq), heads);
        Tensor k = split_heads(linear(x, layer.wk, layer.bk), heads);
        Tensor v = split_heads(linear(x, layer.wv, layer.bv), heads);
        Tensor scores = scale(bmm_nt(q, k), inv_sqrt_dh);
        scores = apply_key_padding_mask(scores, mask, heads);
        Tensor attn = softmax(scores, 2);
        if (trace) trace->per_layer.push_back(attn);
        Tensor ctx = merge_heads(bmm(attn, v), heads);
        Tensor proj = linear(ctx, layer.wo, layer.bo);
        if (train_mode && cfg.dropout_rate > 0.0f) proj = dropout(proj, cfg.dropout_rate, *rng, true);
        x = layer_norm(add(x, proj), layer.ln1_gamma, layer.ln1_beta, kLnEps);

        Tensor h = gelu(linear(x, layer.w1, layer.b1));
        Tensor out = linear(h, layer.w2, layer.b2);
        if (train_mode && cfg.dropout_rate > 0.0f) out = dropout(out, cfg.dropout_rate, *rng, true);
        x = layer_norm(add(x, out), layer.ln2_gamma, layer.ln2_beta, kLnEps);
    }
    return x;
}

Tensor mlm_logits(const EncoderModel& model, const Tensor& hidden) {
    if (hidden.ndim() != 3 || hidden.dim(2) != model.config.hidden_dim) {
        throw ShapeError("mlm_logits: hidden must be (B,L," + std::to_string(model.config.hidden_dim) + ")");
    }
    return linear(hidden, model.mlm_w, model.mlm_b);
}

Tensor pool(const Tensor& hidden, const std::vector<uint8_t>& attention_mask) {
    return mean_pool_masked(hidden, attention_mask);
}

TaskHead init_task_head(TaskKind kind, int input_dim, int hidden_dim, int num_classes, uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1) throw UsageError("task head: dimensions must be positive");
    if (kind != TaskKind::sequence_regression && num_classes < 2) {
        throw UsageError("task head: classification needs at least 2 classes");
    }
    Rng rng(seed);
    TaskHead head;
    head.kind = kind;
    head.num_classes = num_classes;
    const int out_dim = kind == TaskKind::sequence_regression ? 1 : num_classes;
    head.w1 = init_weight(rng, input_dim, hidden_dim);
    head.b1 = init_zeros(hidden_dim);
    head.w2 = init_weight(rng, hidden_dim, out_dim);
    head.b2 = init_zeros(out_dim);
    return head;
}

std::vector<std::pair<std::string, Tensor>> TaskHead::named_parameters() const {
    return {{"head.w1", w1}, {"head.b1", b1}, {"head.w2", w2}, {"head.b2", b2}};
}

std::vector<Tensor> TaskHead::parameters() const { return {w1, b1, w2, b2}; }

Tensor head_forward(const TaskHead& head, const Tensor& input) {
    const bool token_kind = head.kind == TaskKind::token_classification;
    if (token_kind && input.ndim() != 3) {
        throw ShapeError("head_forward: token-classification head expects (B,L,d) hidden states");
    }
    if (!token_kind && input.ndim() != 2) {
        throw ShapeError("head_forward: sequence head expects pooled (B,d) input");
    }
    if (input.shape().back() != head.w1.dim(0)) {
        throw ShapeError("head_forward: input dim " + std::to_string(input.shape().back()) +
                         " != head input dim " + std::to_string(head.w1.dim(0)));
    }
    Tensor h = gelu(linear(input, head.w1, head.b1));
    return linear(h, head.w2, head.b2);
}

}  // namespace plm
