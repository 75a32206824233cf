#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace plm {

// Fixed 30-token protein vocabulary in the ProtBERT convention:
// specials [PAD]=0 [UNK]=1 [CLS]=2 [SEP]=3 [MASK]=4, then the residue
// letters A C D E F G H I K L M N P Q R S T V W Y X U B Z O at ids 5..29.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kFirstResidue = 5;
    static constexpr int kSize = 30;
    static constexpr int kNumResidues = kSize - kFirstResidue;

    Vocabulary();

    int size() const { return kSize; }
    // Residue letter -> id; characters outside the residue set map to 'X'.
    int residue_id(char c) const;
    bool is_residue_id(int id) const { return id >= kFirstResidue && id < kSize; }
    bool is_special_id(int id) const { return id >= 0 && id < kFirstResidue; }
    char residue_letter(int id) const;      // only valid for residue ids
    const std::string& token(int id) const; // printable token name for any id
    // Token table, one entry per id, in id order (embedded in checkpoints).
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::array<int, 256> char_to_id_{};
};

struct TokenSequence {
    std::vector<int> ids;             // length max_len
    std::vector<uint8_t> attention_mask;  // 1 at real tokens, 0 at padding
    int true_length = 0;              // residues + [CLS] + [SEP], before padding
};

struct MaskingPolicy {
    float select_rate = 0.15f;
    float mask_rate = 0.8f;
    float random_rate = 0.1f;
    float keep_rate = 0.1f;
    uint64_t seed = 0;

    void validate() const;
};

constexpr int kIgnoreIndex = -100;

// Uppercases, maps unknown characters to X, truncates to max_len-2 residues,
// frames with [CLS]/[SEP] and pads to max_len. Empty input is an error.
TokenSequence encode(const Vocabulary& vocab, const std::string& sequence, int max_len);

// Drops specials and padding; inverse of encode for in-range sequences.
std::string decode(const Vocabulary& vocab, const std::vector<int>& ids);

struct MaskedTokens {
    std::vector<int> corrupted;  // input ids after corruption
    std::vector<int> labels;     // original ids at selected positions, kIgnoreIndex elsewhere
};

// BERT-style corruption over residue positions only. Each residue position is
// selected independently with select_rate; selected positions become [MASK]
// with mask_rate, a uniform random residue id with random_rate, or stay
// unchanged with keep_rate. Deterministic for a fixed policy seed.
MaskedTokens apply_mlm_mask(const Vocabulary& vocab, const TokenSequence& tokens,
                            const MaskingPolicy& policy);

}  // namespace plm
