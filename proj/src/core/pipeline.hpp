#pragma once

#include <map>
#include <string>

#include "core/config.hpp"

namespace plm {

// Subcommand backends shared by the C API and (through it) the CLI. Each run
// writes its artifacts plus `<primary output>.manifest.json` recording the
// command, resolved config, seed and artifact fingerprints; `run_rerun`
// re-executes a manifest and verifies the outputs reproduce bit-identically.

struct PretrainArgs {
    std::string corpus;
    std::string out_ckpt;
};
void run_pretrain(const RunConfig& cfg, const PretrainArgs& args);

struct FinetuneArgs {
    std::string ckpt;
    std::string task_csv;
    std::string task_kind;
    bool freeze_encoder = false;  // ORed with finetune.freeze_encoder
    std::string out_ckpt;
};
void run_finetune(const RunConfig& cfg, const FinetuneArgs& args);

struct EvaluateArgs {
    std::string ckpt;
    std::string task_csv;
    std::string report_path;
};
void run_evaluate(const RunConfig& cfg, const EvaluateArgs& args);

struct TrainVaeArgs {
    std::string encoder_ckpt;
    std::string corpus;
    std::string out_ckpt;
};
void run_train_vae(const RunConfig& cfg, const TrainVaeArgs& args);

struct GenerateArgs {
    std::string encoder_ckpt;
    std::string decoder_ckpt;
    std::string seed_fasta;
    std::string sigma_grid = "0,0.5,1,2";
    int n_per_sigma = 20;
    std::string out_prefix;
};
void run_generate(const RunConfig& cfg, const GenerateArgs& args);

struct MakeSyntheticArgs {
    std::string kind;
    int n = 100;
    std::string out_path;
};
void run_make_synthetic(const RunConfig& cfg, const MakeSyntheticArgs& args);

// Re-executes the run recorded in a manifest and verifies that every hashed
// output reproduces exactly.
void run_rerun(const std::string& manifest_path);

// FNV-1a 64-bit file fingerprint (hex), used in manifests.
std::string file_fingerprint(const std::string& path);

std::vector<float> parse_sigma_grid(const std::string& text);

}  // namespace plm
