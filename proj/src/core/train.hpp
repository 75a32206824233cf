#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/dataset.hpp"
#include "core/encoder.hpp"
#include "core/tokenizer.hpp"

namespace plm {

struct TrainRunReport {
    std::vector<float> loss_trace;  // one entry per executed optimizer step
    std::vector<float> aux_trace;   // secondary per-step component (e.g. VAE KL)
    std::map<std::string, double> final_metrics;
    double wall_clock_seconds = 0.0;
    uint64_t seed = 0;
    std::map<std::string, std::string> config;  // resolved run config, filled by the caller
};

struct PretrainOptions {
    MaskingPolicy policy;
    AdamHyper optim{.lr = 1e-3f};
    int steps = 500;
    int batch_size = 16;
    double heldout_fraction = 0.1;  // trailing slice kept out of training
    uint64_t seed = 42;             // batch order and evaluation masks
};

// Masked-LM training. Fresh corruption every step (seed-derived), batches
// padded to the batch max. Reports masked-token accuracy on the training
// slice and, when held out, on the held-out slice.
TrainRunReport pretrain(EncoderModel& model, const std::vector<std::string>& corpus,
                        const PretrainOptions& opts);

struct FinetuneOptions {
    AdamHyper head_optim{.lr = 1e-3f};
    AdamHyper encoder_optim{.lr = 1e-4f};
    bool freeze_encoder = false;
    int steps = 300;
    int batch_size = 16;
    uint64_t seed = 42;
};

// Task-loss fine-tuning: cross-entropy for classification kinds (per valid
// residue position for token classification), mean-squared error for
// regression. The encoder trains at its own lr unless frozen.
TrainRunReport finetune(EncoderModel& model, TaskHead& head, const Dataset& dataset,
                        const FinetuneOptions& opts);

// Masked-token accuracy of the model on `sequences` under a fixed-seed mask,
// in eval mode. Shared by pretrain reporting and the acceptance suite.
double masked_token_accuracy(const EncoderModel& model, const std::vector<std::string>& sequences,
                             const MaskingPolicy& policy, uint64_t eval_seed, int batch_size = 16);

}  // namespace plm
