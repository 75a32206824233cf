#include "core/tokenizer.hpp"

#include <cctype>
#include <cmath>

namespace plm {

namespace {
constexpr char kResidueLetters[] = "ACDEFGHIKLMNPQRSTVWYXUBZO";
}

Vocabulary::Vocabulary() {
    tokens_ = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    for (const char* p = kResidueLetters; *p; ++p) tokens_.emplace_back(1, *p);

    const int x_id = kFirstResidue + 20;  // 'X' is the 21st residue letter
    char_to_id_.fill(x_id);
    for (int i = 0; i < kNumResidues; ++i) {
        const char c = kResidueLetters[i];
        char_to_id_[static_cast<unsigned char>(c)] = kFirstResidue + i;
        char_to_id_[static_cast<unsigned char>(std::tolower(c))] = kFirstResidue + i;
    }
    // lowercase of any unknown letter also lands on X via the fill above
}

int Vocabulary::residue_id(char c) const { return char_to_id_[static_cast<unsigned char>(c)]; }

char Vocabulary::residue_letter(int id) const {
    if (!is_residue_id(id)) throw DataError("residue_letter: id " + std::to_string(id) + " is not a residue");
    return kResidueLetters[id - kFirstResidue];
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= kSize) throw DataError("token: id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
}

void MaskingPolicy::validate() const {
    if (!(select_rate >= 0.0f) || !(select_rate < 1.0f)) {
        throw UsageError("masking policy: select_rate must be in [0,1)");
    }
    const float s = mask_rate + random_rate + keep_rate;
    if (std::fabs(s - 1.0f) > 1e-6f || mask_rate < 0 || random_rate < 0 || keep_rate < 0) {
        throw UsageError("masking policy: mask/random/keep rates must be non-negative and sum to 1");
    }
}

TokenSequence encode(const Vocabulary& vocab, const std::string& sequence, int max_len) {
    if (max_len < 3) throw UsageError("encode: max_len must be at least 3");
    if (sequence.empty()) throw DataError("encode: empty sequence");

    const int max_residues = max_len - 2;
    const int n = std::min<int>(static_cast<int>(sequence.size()), max_residues);

    TokenSequence out;
    out.ids.assign(static_cast<size_t>(max_len), Vocabulary::kPad);
    out.attention_mask.assign(static_cast<size_t>(max_len), 0);
    out.ids[0] = Vocabulary::kCls;
    for (int i = 0; i < n; ++i) out.ids[static_cast<size_t>(i) + 1] = vocab.residue_id(sequence[static_cast<size_t>(i)]);
    out.ids[static_cast<size_t>(n) + 1] = Vocabulary::kSep;
    out.true_length = n + 2;
    for (int i = 0; i < out.true_length; ++i) out.attention_mask[static_cast<size_t>(i)] = 1;
    return out;
}

std::string decode(const Vocabulary& vocab, const std::vector<int>& ids) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= Vocabulary::kSize) {
            throw DataError("decode: id " + std::to_string(id) + " out of range");
        }
        if (vocab.is_residue_id(id)) out.push_back(vocab.residue_letter(id));
    }
    return out;
}

MaskedTokens apply_mlm_mask(const Vocabulary& vocab, const TokenSequence& tokens,
                            const MaskingPolicy& policy) {
    policy.validate();
    Rng rng(policy.seed);

    MaskedTokens out;
    out.corrupted = tokens.ids;
    out.labels.assign(tokens.ids.size(), kIgnoreIndex);

    // residue positions live strictly between [CLS] and [SEP]
    for (int i = 1; i + 1 < tokens.true_length; ++i) {
        const auto idx = static_cast<size_t>(i);
        if (rng.uniform() >= policy.select_rate) continue;
        out.labels[idx] = tokens.ids[idx];
        const double roll = rng.uniform();
        if (roll < policy.mask_rate) {
            out.corrupted[idx] = Vocabulary::kMask;
        } else if (roll < policy.mask_rate + policy.random_rate) {
            out.corrupted[idx] =
                Vocabulary::kFirstResidue + static_cast<int>(rng.below(Vocabulary::kNumResidues));
        }
        // else: keep the original token
    }
    return out;
}

}  // namespace plm
