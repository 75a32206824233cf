#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/fasta.hpp"

namespace plm {

// Desk-scale synthetic data: a pretraining corpus plus one generator per
// benchmark task kind, all deterministic in the seed.
//   corpus                  random residue sequences (FASTA)
//   motif-classification    class 1 iff the sequence contains "WWW"
//   residue-window          token label 1 within +/-2 of each 'C'
//   composition-regression  label = fraction of 'A' residues

struct SyntheticConfig {
    int min_len = 20;
    int max_len = 60;
    uint64_t seed = 7;
};

std::vector<FastaRecord> make_synthetic_corpus(int n, const SyntheticConfig& cfg);
Dataset make_motif_classification(int n, const SyntheticConfig& cfg);
Dataset make_residue_window(int n, const SyntheticConfig& cfg);
Dataset make_composition_regression(int n, const SyntheticConfig& cfg);

// Dispatch by kind name used by the CLI (`corpus` writes FASTA, the task
// kinds write `sequence,label` CSV).
void write_synthetic(const std::string& kind, int n, const SyntheticConfig& cfg,
                     const std::string& out_path);

void write_task_csv(const Dataset& ds, const std::string& path, bool with_split);

}  // namespace plm
