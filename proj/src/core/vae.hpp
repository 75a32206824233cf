#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/encoder.hpp"
#include "core/fasta.hpp"
#include "core/train.hpp"

namespace plm {

struct LatentVector {
    std::vector<float> mu;
    std::vector<float> logvar;
    std::vector<float> sample;  // mu + exp(logvar/2) * eps for the recorded eps
};

struct DecoderConfig {
    int num_layers = 2;
    int num_heads = 4;
    int hidden_dim = 64;
    int ffn_dim = 256;
    int z_dim = 32;
    int max_len = 128;
    int vocab_size = Vocabulary::kSize;
    uint64_t seed = 43;

    void validate() const;
};

// Two linear maps from the pooled encoder embedding to (mu, logvar).
struct VariationalHead {
    Tensor w_mu, b_mu;  // (d, z)
    Tensor w_lv, b_lv;

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

// Causal transformer decoder conditioned on the latent through a projected
// prefix embedding prepended to the token stream.
struct DecoderModel {
    DecoderConfig config;
    VariationalHead var_head;  // trained jointly, stored with the decoder
    Tensor z_proj_w, z_proj_b;  // (z, d)
    Tensor token_embedding;     // (vocab, d)
    Tensor position_embedding;  // (max_len + 1, d); slot 0 is the prefix
    Tensor emb_ln_gamma, emb_ln_beta;
    std::vector<EncoderLayer> layers;  // same block shape, causal attention
    Tensor out_w, out_b;  // (d, vocab)
    bool trained = false;

    std::vector<Tensor> parameters() const;  // includes the variational head
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    int64_t parameter_count() const;
    int encoder_dim() const { return var_head.w_mu.dim(0); }
};

int64_t decoder_parameter_count(const DecoderConfig& cfg, int encoder_hidden_dim);

DecoderModel init_decoder(const DecoderConfig& cfg, int encoder_hidden_dim);

// logvar is clamped to this range before sampling or the KL term.
constexpr float kLogvarMin = -20.0f;
constexpr float kLogvarMax = 4.0f;

// Pooled frozen-encoder embedding -> (mu, logvar); sample by
// reparameterization when noise_on, else sample == mu.
LatentVector encode_latent(const EncoderModel& encoder, const DecoderModel& decoder,
                           const std::string& sequence, bool noise_on, uint64_t seed);

// sample' = sample + sigma * eps with eps ~ N(0, I); mu/logvar carried
// through unchanged for provenance.
LatentVector perturb(const LatentVector& z, float sigma, uint64_t seed);

enum class SamplingMode { greedy, temperature };

struct GenerationConfig {
    float sigma = 0.0f;  // noise scale applied by campaigns
    int num_samples = 1;
    SamplingMode sampling = SamplingMode::greedy;
    float temperature = 1.0f;
    int max_len = 128;
    uint64_t seed = 0;
    bool allow_untrained = false;

    void validate() const;
};

// Autoregressive decode from the latent-conditioned prefix + [CLS]; stops at
// [SEP] or max_len. Only residue tokens can be emitted. Greedy decoding is
// deterministic given z.
std::string generate(const DecoderModel& decoder, const LatentVector& z, const GenerationConfig& gen);

// Causal forward shared by training and generation: token ids (flattened
// B x lin) with the projected latent prepended -> logits (B, lin+1, vocab).
Tensor decoder_forward(const DecoderModel& decoder, const std::vector<int>& ids, int batch, int lin,
                       const Tensor& z);

struct VaeTrainConfig {
    int epochs = 5;
    int corpus_cap = 2000;
    float kl_weight = 0.1f;  // beta, linear warm-up over the first 20% of steps
    float lr = 1e-3f;
    int batch_size = 16;
    uint64_t seed = 44;
};

// Reconstruction cross-entropy (teacher forcing) + beta * KL versus N(0,I).
// The encoder stays frozen: bit-identical parameters before and after.
// loss_trace carries reconstruction, aux_trace the (unweighted) KL.
TrainRunReport train_vae(const EncoderModel& encoder, DecoderModel& decoder,
                         const std::vector<std::string>& corpus, const VaeTrainConfig& cfg);

struct GenerationRow {
    std::string seed_id;
    float sigma = 0.0f;
    int sample_idx = 0;
    int length = 0;
    double identity = 0.0;
    std::string sequence;
};

struct GenerationReport {
    std::vector<GenerationRow> rows;
};

// For each seed x sigma, draws n_per_sigma samples around the seed's
// deterministic latent and scores identity-to-seed.
GenerationReport seed_generation_campaign(const EncoderModel& encoder, const DecoderModel& decoder,
                                          const std::vector<FastaRecord>& seeds,
                                          const std::vector<float>& sigma_grid, int n_per_sigma,
                                          const GenerationConfig& gen);

// FASTA headers carry `seed=<id> sigma=<val> idx=<n>`; the CSV columns are
// seed_id,sigma,sample_idx,length,identity.
void write_generation_fasta(const GenerationReport& report, const std::string& path);
void write_generation_csv(const GenerationReport& report, const std::string& path);

}  // namespace plm
