#include "core/vae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "core/adam.hpp"
#include "core/metrics.hpp"

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

using Clock = std::chrono::steady_clock;

}  // namespace

void DecoderConfig::validate() const {
    if (num_layers < 1 || num_heads < 1 || hidden_dim < 1 || ffn_dim < 1 || z_dim < 1 || max_len < 3) {
        throw UsageError("decoder config: dimensions must be positive (max_len >= 3)");
    }
    if (hidden_dim % num_heads != 0) {
        throw UsageError("decoder config: hidden_dim not divisible by num_heads");
    }
    if (vocab_size != Vocabulary::kSize) {
        throw UsageError("decoder config: vocab_size must be " + std::to_string(Vocabulary::kSize));
    }
}

void GenerationConfig::validate() const {
    if (sigma < 0.0f) throw UsageError("generation config: sigma must be >= 0");
    if (num_samples < 1) throw UsageError("generation config: num_samples must be >= 1");
    if (sampling == SamplingMode::temperature && !(temperature > 0.0f)) {
        throw UsageError("generation config: temperature must be > 0");
    }
    if (max_len < 1) throw UsageError("generation config: max_len must be >= 1");
}

int64_t decoder_parameter_count(const DecoderConfig& cfg, int encoder_hidden_dim) {
    const int64_t d = cfg.hidden_dim, f = cfg.ffn_dim, v = cfg.vocab_size, z = cfg.z_dim;
    const int64_t e = encoder_hidden_dim;
    const int64_t var_head = 2 * (e * z + z);
    const int64_t z_proj = z * d + d;
    const int64_t embeddings = v * d + (cfg.max_len + 1) * d + 2 * d;
    const int64_t attention = 4 * (d * d + d);
    const int64_t ffn = (d * f + f) + (f * d + d);
    const int64_t norms = 4 * d;
    const int64_t head = d * v + v;
    return var_head + z_proj + embeddings + cfg.num_layers * (attention + ffn + norms) + head;
}

DecoderModel init_decoder(const DecoderConfig& cfg, int encoder_hidden_dim) {
    cfg.validate();
    if (encoder_hidden_dim < 1) throw UsageError("init_decoder: encoder_hidden_dim must be positive");
    Rng rng(cfg.seed);
    const int d = cfg.hidden_dim, f = cfg.ffn_dim;

    DecoderModel m;
    m.config = cfg;
    m.var_head.w_mu = init_weight(rng, encoder_hidden_dim, cfg.z_dim);
    m.var_head.b_mu = init_zeros(cfg.z_dim);
    m.var_head.w_lv = init_weight(rng, encoder_hidden_dim, cfg.z_dim);
    m.var_head.b_lv = init_zeros(cfg.z_dim);
    m.z_proj_w = init_weight(rng, cfg.z_dim, d);
    m.z_proj_b = init_zeros(d);
    m.token_embedding = init_weight(rng, cfg.vocab_size, d);
    m.position_embedding = init_weight(rng, cfg.max_len + 1, d);
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
    m.out_w = init_weight(rng, d, cfg.vocab_size);
    m.out_b = init_zeros(cfg.vocab_size);
    return m;
}

std::vector<std::pair<std::string, Tensor>> VariationalHead::named_parameters() const {
    return {{"var_head.w_mu", w_mu}, {"var_head.b_mu", b_mu}, {"var_head.w_lv", w_lv},
            {"var_head.b_lv", b_lv}};
}

std::vector<Tensor> VariationalHead::parameters() const { return {w_mu, b_mu, w_lv, b_lv}; }

std::vector<std::pair<std::string, Tensor>> DecoderModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out = var_head.named_parameters();
    out.emplace_back("z_proj_w", z_proj_w);
    out.emplace_back("z_proj_b", z_proj_b);
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
    out.emplace_back("out_w", out_w);
    out.emplace_back("out_b", out_b);
    return out;
}

std::vector<Tensor> DecoderModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

int64_t DecoderModel::parameter_count() const {
    int64_t n = 0;
    for (const auto& t : parameters()) n += t.numel();
    return n;
}

Tensor decoder_forward(const DecoderModel& m, const std::vector<int>& ids, int b, int lin,
                       const Tensor& z) {
    const auto& cfg = m.config;
    if (lin + 1 > cfg.max_len + 1) {
        throw ShapeError("decoder_forward: sequence length " + std::to_string(lin) +
                         " exceeds decoder max_len " + std::to_string(cfg.max_len));
    }
    const int heads = cfg.num_heads;
    const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(cfg.hidden_dim / cfg.num_heads));

    Tensor prefix = linear(z, m.z_proj_w, m.z_proj_b);
    Tensor x = concat_prefix(prefix, embedding_rows(m.token_embedding, ids, {b, lin}));
    x = add_positional(x, m.position_embedding);
    x = layer_norm(x, m.emb_ln_gamma, m.emb_ln_beta, kLnEps);

    for (const auto& layer : m.layers) {
        Tensor q = split_heads(linear(x, layer.wq, layer.bq), heads);
        Tensor k = split_heads(linear(x, layer.wk, layer.bk), heads);
        Tensor v = split_heads(linear(x, layer.wv, layer.bv), heads);
        Tensor scores = apply_causal_mask(scale(bmm_nt(q, k), inv_sqrt_dh));
        Tensor ctx = merge_heads(bmm(softmax(scores, 2), v), heads);
        x = layer_norm(add(x, linear(ctx, layer.wo, layer.bo)), layer.ln1_gamma, layer.ln1_beta, kLnEps);
        Tensor h = gelu(linear(x, layer.w1, layer.b1));
        x = layer_norm(add(x, linear(h, layer.w2, layer.b2)), layer.ln2_gamma, layer.ln2_beta, kLnEps);
    }
    return linear(x, m.out_w, m.out_b);
}

namespace {

// Latent distribution for a padded batch through the frozen encoder.
// Returns (mu, clamped logvar) with graph edges only into the var head.
std::pair<Tensor, Tensor> latent_params(const EncoderModel& encoder, const DecoderModel& decoder,
                                        const std::vector<TokenSequence>& batch) {
    Tensor pooled;
    {
        NoGradGuard no_grad;
        Tensor hidden = encode_batch(encoder, batch, false);
        pooled = pool(hidden, flatten_attention_masks(batch));
    }
    Tensor mu = linear(pooled, decoder.var_head.w_mu, decoder.var_head.b_mu);
    Tensor logvar = clamp(linear(pooled, decoder.var_head.w_lv, decoder.var_head.b_lv),
                          kLogvarMin, kLogvarMax);
    return {mu, logvar};
}

}  // namespace

LatentVector encode_latent(const EncoderModel& encoder, const DecoderModel& decoder,
                           const std::string& sequence, bool noise_on, uint64_t seed) {
    if (sequence.empty()) throw DataError("encode_latent: empty sequence");
    Vocabulary vocab;
    const int pad_len = std::min(static_cast<int>(sequence.size()) + 2, encoder.config.max_len);
    const auto tokens = encode(vocab, sequence, pad_len);

    NoGradGuard no_grad;
    const auto [mu, logvar] = latent_params(encoder, decoder, {tokens});

    LatentVector out;
    out.mu.assign(mu.values().begin(), mu.values().end());
    out.logvar.assign(logvar.values().begin(), logvar.values().end());
    out.sample.resize(out.mu.size());
    Rng rng(seed);
    for (size_t i = 0; i < out.mu.size(); ++i) {
        const float eps = noise_on ? rng.normal_f() : 0.0f;
        out.sample[i] = out.mu[i] + std::exp(0.5f * out.logvar[i]) * eps;
    }
    return out;
}

LatentVector perturb(const LatentVector& z, float sigma, uint64_t seed) {
    if (sigma < 0.0f) throw UsageError("perturb: sigma must be >= 0");
    LatentVector out = z;
    if (sigma == 0.0f) return out;
    Rng rng(seed);
    for (auto& v : out.sample) v += sigma * rng.normal_f();
    return out;
}

std::string generate(const DecoderModel& decoder, const LatentVector& z, const GenerationConfig& gen) {
    gen.validate();
    if (!decoder.trained && !gen.allow_untrained) {
        throw UsageError("generate: decoder is untrained (pass allow_untrained to override)");
    }
    if (static_cast<int>(z.sample.size()) != decoder.config.z_dim) {
        throw ShapeError("generate: latent dim " + std::to_string(z.sample.size()) +
                         " != decoder z_dim " + std::to_string(decoder.config.z_dim));
    }

    const int cap = std::min(gen.max_len, decoder.config.max_len) - 2;
    NoGradGuard no_grad;
    Tensor zt = Tensor::from_values({1, decoder.config.z_dim}, z.sample);
    Rng rng(gen.seed);

    std::vector<int> ids = {Vocabulary::kCls};
    std::string out;
    for (int emitted = 0; emitted < cap; ++emitted) {
        Tensor logits = decoder_forward(decoder, ids, 1, static_cast<int>(ids.size()), zt);
        const int v = decoder.config.vocab_size;
        const float* row =
            logits.values().data() + (static_cast<size_t>(logits.dim(1)) - 1) * static_cast<size_t>(v);

        // only residue tokens and [SEP] may be emitted
        int chosen;
        if (gen.sampling == SamplingMode::greedy) {
            chosen = Vocabulary::kSep;
            float best = row[Vocabulary::kSep];
            for (int j = Vocabulary::kFirstResidue; j < v; ++j) {
                if (row[j] > best) {
                    best = row[j];
                    chosen = j;
                }
            }
        } else {
            float mx = row[Vocabulary::kSep];
            for (int j = Vocabulary::kFirstResidue; j < v; ++j) mx = std::max(mx, row[j]);
            std::vector<float> probs(static_cast<size_t>(v), 0.0f);
            float zsum = 0.0f;
            const float inv_t = 1.0f / gen.temperature;
            probs[Vocabulary::kSep] = std::exp((row[Vocabulary::kSep] - mx) * inv_t);
            zsum += probs[Vocabulary::kSep];
            for (int j = Vocabulary::kFirstResidue; j < v; ++j) {
                probs[static_cast<size_t>(j)] = std::exp((row[j] - mx) * inv_t);
                zsum += probs[static_cast<size_t>(j)];
            }
            const double r = rng.uniform() * zsum;
            double acc = probs[Vocabulary::kSep];
            chosen = Vocabulary::kSep;
            for (int j = Vocabulary::kFirstResidue; j < v && r >= acc; ++j) {
                acc += probs[static_cast<size_t>(j)];
                chosen = j;
            }
        }
        if (chosen == Vocabulary::kSep) break;
        ids.push_back(chosen);
        out.push_back(Vocabulary().residue_letter(chosen));
    }
    return out;
}

TrainRunReport train_vae(const EncoderModel& encoder, DecoderModel& decoder,
                         const std::vector<std::string>& corpus, const VaeTrainConfig& cfg) {
    if (corpus.empty()) throw DataError("train_vae: empty corpus");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.corpus_cap < 1) {
        throw UsageError("train_vae: epochs, batch_size and corpus_cap must be positive");
    }
    if (cfg.kl_weight < 0.0f) throw UsageError("train_vae: kl_weight must be >= 0");

    std::vector<std::string> train(corpus.begin(),
                                   corpus.begin() + std::min<size_t>(corpus.size(),
                                                                     static_cast<size_t>(cfg.corpus_cap)));
    const int dec_cap = decoder.config.max_len;
    for (const auto& s : train) {
        if (static_cast<int>(s.size()) + 2 > dec_cap) {
            throw DataError("train_vae: corpus sequence of length " + std::to_string(s.size()) +
                            " exceeds decoder max_len " + std::to_string(dec_cap) +
                            "; filter the corpus first");
        }
        if (s.empty()) throw DataError("train_vae: corpus contains an empty sequence");
    }

    const auto t0 = Clock::now();
    Vocabulary vocab;
    TrainRunReport report;
    report.seed = cfg.seed;

    AdamState optimizer(decoder.parameters(), AdamHyper{.lr = cfg.lr});
    Rng eps_rng = Rng::derive(cfg.seed, 0xEF);

    const auto steps_per_epoch = (train.size() + static_cast<size_t>(cfg.batch_size) - 1) /
                                 static_cast<size_t>(cfg.batch_size);
    const int64_t total_steps = static_cast<int64_t>(cfg.epochs) * static_cast<int64_t>(steps_per_epoch);
    const int64_t warmup_steps = std::max<int64_t>(1, total_steps / 5);

    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(cfg.seed, 0xE2 + static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
            int pad_len = 3;
            for (size_t i = begin; i < end; ++i) {
                pad_len = std::max(pad_len,
                                   static_cast<int>(train[static_cast<size_t>(order[i])].size()) + 2);
            }
            std::vector<TokenSequence> batch;
            std::vector<int> input_ids;
            std::vector<int> targets;
            const int b = static_cast<int>(end - begin);
            batch.reserve(static_cast<size_t>(b));
            for (size_t i = begin; i < end; ++i) {
                batch.push_back(encode(vocab, train[static_cast<size_t>(order[i])], pad_len));
            }
            // teacher forcing: position 0 is the latent prefix (no target);
            // the token at input position j-1 predicts ids[j]
            const int lin = pad_len - 1;  // drop the trailing slot, prefix restores length
            for (const auto& tok : batch) {
                input_ids.insert(input_ids.end(), tok.ids.begin(), tok.ids.begin() + lin);
                targets.push_back(kIgnoreIndex);
                for (int j = 1; j < pad_len; ++j) {
                    targets.push_back(j < tok.true_length ? tok.ids[static_cast<size_t>(j)]
                                                          : kIgnoreIndex);
                }
            }

            auto [mu, logvar] = latent_params(encoder, decoder, batch);
            std::vector<float> eps(static_cast<size_t>(b) * decoder.config.z_dim);
            for (auto& e : eps) e = eps_rng.normal_f();
            Tensor zsample = reparameterize(mu, logvar, eps);

            Tensor logits = decoder_forward(decoder, input_ids, b, lin, zsample);
            const int rows = logits.dim(0) * logits.dim(1);
            Tensor recon = cross_entropy(reshape(logits, {rows, logits.dim(2)}), targets, kIgnoreIndex);
            Tensor kl = kl_standard_normal(mu, logvar);

            const float beta = cfg.kl_weight *
                               static_cast<float>(std::min<int64_t>(step + 1, warmup_steps)) /
                               static_cast<float>(warmup_steps);
            Tensor loss = add(recon, scale(kl, beta));

            const float recon_v = recon.item();
            const float kl_v = kl.item();
            if (!std::isfinite(recon_v) || !std::isfinite(kl_v)) {
                throw NumericError("train_vae: non-finite loss, training diverged");
            }
            report.loss_trace.push_back(recon_v);
            report.aux_trace.push_back(kl_v);

            optimizer.zero_grad();
            backward(loss);
            optimizer.step();
            ++step;
        }
    }

    decoder.trained = true;
    report.final_metrics["final_reconstruction_nats_per_token"] =
        report.loss_trace.empty() ? 0.0 : report.loss_trace.back();
    report.final_metrics["final_kl"] = report.aux_trace.empty() ? 0.0 : report.aux_trace.back();
    report.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return report;
}

GenerationReport seed_generation_campaign(const EncoderModel& encoder, const DecoderModel& decoder,
                                          const std::vector<FastaRecord>& seeds,
                                          const std::vector<float>& sigma_grid, int n_per_sigma,
                                          const GenerationConfig& gen) {
    if (seeds.empty()) throw DataError("seed_generation_campaign: no seed sequences");
    if (sigma_grid.empty()) throw UsageError("seed_generation_campaign: empty sigma grid");
    if (n_per_sigma < 1) throw UsageError("seed_generation_campaign: n_per_sigma must be >= 1");

    GenerationReport report;
    for (size_t si = 0; si < seeds.size(); ++si) {
        const auto& seed_rec = seeds[si];
        const std::string seed_id =
            seed_rec.header.empty() ? "seed" + std::to_string(si) : seed_rec.header;
        const LatentVector z0 = encode_latent(encoder, decoder, seed_rec.sequence, false, 0);
        for (size_t gi = 0; gi < sigma_grid.size(); ++gi) {
            const float sigma = sigma_grid[gi];
            for (int k = 0; k < n_per_sigma; ++k) {
                const uint64_t stream =
                    (si * 1000003ULL + gi) * 1009ULL + static_cast<uint64_t>(k);
                const LatentVector z = perturb(z0, sigma, mix_seed(gen.seed, stream));
                GenerationConfig sample_gen = gen;
                sample_gen.sigma = sigma;
                sample_gen.seed = mix_seed(gen.seed, stream ^ 0x5A5A5A5AULL);
                const std::string seq = generate(decoder, z, sample_gen);

                GenerationRow row;
                row.seed_id = seed_id;
                row.sigma = sigma;
                row.sample_idx = k;
                row.length = static_cast<int>(seq.size());
                // an empty decode counts as zero identity rather than an error
                row.identity = seq.empty() ? 0.0 : sequence_identity(seq, seed_rec.sequence);
                row.sequence = seq;
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

namespace {

std::string format_sigma(float sigma) {
    std::ostringstream os;
    os << sigma;
    return os.str();
}

}  // namespace

void write_generation_fasta(const GenerationReport& report, const std::string& path) {
    std::vector<FastaRecord> records;
    records.reserve(report.rows.size());
    for (const auto& row : report.rows) {
        if (row.sequence.empty()) continue;  // FASTA records need a non-empty sequence
        records.push_back({"seed=" + row.seed_id + " sigma=" + format_sigma(row.sigma) +
                               " idx=" + std::to_string(row.sample_idx),
                           row.sequence});
    }
    write_fasta_file(records, path);
}

void write_generation_csv(const GenerationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("generation csv: cannot open " + path + " for writing");
    out << "seed_id,sigma,sample_idx,length,identity\n";
    for (const auto& row : report.rows) {
        out << row.seed_id << ',' << format_sigma(row.sigma) << ',' << row.sample_idx << ','
            << row.length << ',' << row.identity << '\n';
    }
    if (!out) throw DataError("generation csv: write failed for " + path);
}

}  // namespace plm
