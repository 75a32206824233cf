#include "core/synthetic.hpp"

#include <algorithm>
#include <fstream>

#include "core/rng.hpp"
#include "core/tokenizer.hpp"

namespace plm {

namespace {

// the 20 standard residues; rare letters are left out of random sequences
constexpr char kStandard[] = "ACDEFGHIKLMNPQRSTVWY";
constexpr int kNumStandard = 20;

std::string random_sequence(Rng& rng, int len) {
    std::string s(static_cast<size_t>(len), 'A');
    for (auto& c : s) c = kStandard[rng.below(kNumStandard)];
    return s;
}

int random_len(Rng& rng, const SyntheticConfig& cfg) {
    if (cfg.min_len < 3 || cfg.max_len < cfg.min_len) {
        throw UsageError("synthetic: need 3 <= min_len <= max_len");
    }
    return cfg.min_len + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.max_len - cfg.min_len + 1)));
}

}  // namespace

std::vector<FastaRecord> make_synthetic_corpus(int n, const SyntheticConfig& cfg) {
    if (n < 1) throw UsageError("synthetic corpus: n must be positive");
    Rng rng(cfg.seed);
    std::vector<FastaRecord> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back({"synthetic_" + std::to_string(i), random_sequence(rng, random_len(rng, cfg))});
    }
    return out;
}

Dataset make_motif_classification(int n, const SyntheticConfig& cfg) {
    if (n < 2) throw UsageError("synthetic motif task: n must be at least 2");
    Rng rng(cfg.seed);
    Dataset ds;
    ds.spec = TaskSpec::make("motif-classification", TaskKind::sequence_classification, 2);
    for (int i = 0; i < n; ++i) {
        std::string seq = random_sequence(rng, random_len(rng, cfg));
        // strip accidental motifs, then plant one in the positive half
        size_t at;
        while ((at = seq.find("WWW")) != std::string::npos) seq[at + 1] = 'G';
        const int label = i % 2;
        if (label == 1) {
            const size_t pos = rng.below(seq.size() - 2);
            seq[pos] = seq[pos + 1] = seq[pos + 2] = 'W';
        }
        ds.records.push_back({std::move(seq), label});
    }
    ds.splits = make_splits(ds.records.size(), {0.8, 0.1, 0.1}, mix_seed(cfg.seed, 1));
    return ds;
}

Dataset make_residue_window(int n, const SyntheticConfig& cfg) {
    if (n < 2) throw UsageError("synthetic residue-window task: n must be at least 2");
    Rng rng(cfg.seed);
    Dataset ds;
    ds.spec = TaskSpec::make("residue-window", TaskKind::token_classification, 2);
    for (int i = 0; i < n; ++i) {
        const int len = random_len(rng, cfg);
        std::string seq(static_cast<size_t>(len), 'A');
        // draw from an alphabet without 'C', then plant a couple of C anchors
        for (auto& c : seq) {
            c = kStandard[rng.below(kNumStandard)];
            if (c == 'C') c = 'G';
        }
        const int anchors = 1 + static_cast<int>(rng.below(2));
        for (int a = 0; a < anchors; ++a) seq[rng.below(seq.size())] = 'C';

        std::string labels(static_cast<size_t>(len), '0');
        for (int p = 0; p < len; ++p) {
            if (seq[static_cast<size_t>(p)] != 'C') continue;
            for (int w = std::max(0, p - 2); w <= std::min(len - 1, p + 2); ++w) {
                labels[static_cast<size_t>(w)] = '1';
            }
        }
        ds.records.push_back({std::move(seq), std::move(labels)});
    }
    ds.splits = make_splits(ds.records.size(), {0.8, 0.1, 0.1}, mix_seed(cfg.seed, 1));
    return ds;
}

Dataset make_composition_regression(int n, const SyntheticConfig& cfg) {
    if (n < 2) throw UsageError("synthetic composition task: n must be at least 2");
    Rng rng(cfg.seed);
    Dataset ds;
    ds.spec = TaskSpec::make("composition-regression", TaskKind::sequence_regression, 2);
    for (int i = 0; i < n; ++i) {
        const int len = random_len(rng, cfg);
        // per-sequence alanine richness so labels spread over (0,1)
        const double p_a = 0.05 + 0.55 * rng.uniform();
        std::string seq(static_cast<size_t>(len), 'A');
        int count_a = 0;
        for (auto& c : seq) {
            if (rng.uniform() < p_a) {
                c = 'A';
                ++count_a;
            } else {
                c = kStandard[1 + rng.below(kNumStandard - 1)];  // anything but 'A'
            }
        }
        ds.records.push_back({std::move(seq), static_cast<float>(count_a) / static_cast<float>(len)});
    }
    ds.splits = make_splits(ds.records.size(), {0.8, 0.1, 0.1}, mix_seed(cfg.seed, 1));
    return ds;
}

void write_task_csv(const Dataset& ds, const std::string& path, bool with_split) {
    std::ofstream out(path);
    if (!out) throw CsvError(CsvError::Kind::io, 0, "csv: cannot open " + path + " for writing");
    out << "sequence,label" << (with_split ? ",split" : "") << "\n";

    std::vector<std::string> split_of(ds.records.size());
    if (with_split) {
        for (int i : ds.splits.train) split_of[static_cast<size_t>(i)] = "train";
        for (int i : ds.splits.valid) split_of[static_cast<size_t>(i)] = "valid";
        for (int i : ds.splits.test) split_of[static_cast<size_t>(i)] = "test";
    }
    for (size_t i = 0; i < ds.records.size(); ++i) {
        const auto& rec = ds.records[i];
        out << rec.sequence << ',';
        if (const int* cls = std::get_if<int>(&rec.label)) {
            out << *cls;
        } else if (const std::string* tok = std::get_if<std::string>(&rec.label)) {
            out << *tok;
        } else {
            out << std::get<float>(rec.label);
        }
        if (with_split) out << ',' << split_of[i];
        out << '\n';
    }
    if (!out) throw CsvError(CsvError::Kind::io, 0, "csv: write failed for " + path);
}

void write_synthetic(const std::string& kind, int n, const SyntheticConfig& cfg,
                     const std::string& out_path) {
    if (kind == "corpus") {
        write_fasta_file(make_synthetic_corpus(n, cfg), out_path);
    } else if (kind == "motif-classification") {
        write_task_csv(make_motif_classification(n, cfg), out_path, true);
    } else if (kind == "residue-window") {
        write_task_csv(make_residue_window(n, cfg), out_path, true);
    } else if (kind == "composition-regression") {
        write_task_csv(make_composition_regression(n, cfg), out_path, true);
    } else {
        throw UsageError("make-synthetic: unknown kind '" + kind +
                         "' (expected corpus, motif-classification, residue-window or "
                         "composition-regression)");
    }
}

}  // namespace plm
