#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "core/encoder.hpp"
#include "core/synthetic.hpp"
#include "core/train.hpp"
#include "core/vae.hpp"

namespace plm {

// Flat, documented key/value run configuration. Every key has a default;
// unknown keys are rejected. The resolved map is serialized into every
// checkpoint, report and manifest. Files use `key = value` lines with '#'
// comments; CLI flags override file values.
class RunConfig {
public:
    RunConfig();

    static const std::map<std::string, std::string>& defaults();

    void set(const std::string& key, const std::string& value);
    void load_file(const std::string& path);
    void load_map(const std::map<std::string, std::string>& values);

    const std::map<std::string, std::string>& values() const { return values_; }
    const std::string& get(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    uint64_t seed() const { return static_cast<uint64_t>(get_int("seed")); }
    int max_len() const { return static_cast<int>(get_int("max_len")); }

    EncoderConfig encoder_config() const;
    DecoderConfig decoder_config() const;
    MaskingPolicy masking_policy() const;
    PretrainOptions pretrain_options() const;
    FinetuneOptions finetune_options() const;
    VaeTrainConfig vae_config() const;
    GenerationConfig generation_config() const;
    SyntheticConfig synthetic_config() const;
    int head_hidden_dim() const;  // 0 means "encoder hidden_dim"
    int task_num_classes() const { return static_cast<int>(get_int("task.num_classes")); }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace plm
