#include "core/config.hpp"

#include <fstream>

namespace plm {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::map<std::string, std::string>& default_table() {
    static const std::map<std::string, std::string> table = {
        {"seed", "42"},
        {"max_len", "128"},

        {"encoder.num_layers", "2"},
        {"encoder.num_heads", "4"},
        {"encoder.hidden_dim", "64"},
        {"encoder.ffn_dim", "256"},
        {"encoder.dropout", "0"},

        {"mask.select_rate", "0.15"},
        {"mask.mask_rate", "0.8"},
        {"mask.random_rate", "0.1"},
        {"mask.keep_rate", "0.1"},

        {"optim.lr", "0.001"},
        {"optim.beta1", "0.9"},
        {"optim.beta2", "0.999"},
        {"optim.eps", "1e-8"},

        {"pretrain.steps", "500"},
        {"pretrain.batch_size", "16"},
        {"pretrain.heldout_fraction", "0.1"},

        {"finetune.steps", "300"},
        {"finetune.batch_size", "16"},
        {"finetune.head_lr", "0.001"},
        {"finetune.encoder_lr", "0.0001"},
        {"finetune.freeze_encoder", "false"},
        {"head.hidden_dim", "0"},
        {"task.num_classes", "2"},

        {"decoder.num_layers", "2"},
        {"decoder.num_heads", "4"},
        {"decoder.hidden_dim", "64"},
        {"decoder.ffn_dim", "256"},
        {"decoder.z_dim", "32"},

        {"vae.epochs", "5"},
        {"vae.batch_size", "16"},
        {"vae.kl_weight", "0.1"},
        {"vae.lr", "0.001"},
        {"vae.corpus_cap", "2000"},

        {"gen.sampling", "temperature"},
        {"gen.temperature", "1.0"},
        {"gen.allow_untrained", "false"},

        {"synth.min_len", "20"},
        {"synth.max_len", "60"},
    };
    return table;
}

}  // namespace

RunConfig::RunConfig() : values_(default_table()) {}

const std::map<std::string, std::string>& RunConfig::defaults() { return default_table(); }

void RunConfig::set(const std::string& key, const std::string& value) {
    if (default_table().find(key) == default_table().end()) {
        throw ConfigError("config: unknown key '" + key + "'");
    }
    if (value.empty()) throw ConfigError("config: empty value for '" + key + "'");
    values_[key] = value;
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + path + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        try {
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config: " + path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void RunConfig::load_map(const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values) set(k, v);
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
    return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        size_t used = 0;
        const int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' = '" + v + "' is not an integer");
    }
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' = '" + v + "' is not a number");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: '" + key + "' = '" + v + "' is not a boolean (true/false)");
}

EncoderConfig RunConfig::encoder_config() const {
    EncoderConfig cfg;
    cfg.num_layers = static_cast<int>(get_int("encoder.num_layers"));
    cfg.num_heads = static_cast<int>(get_int("encoder.num_heads"));
    cfg.hidden_dim = static_cast<int>(get_int("encoder.hidden_dim"));
    cfg.ffn_dim = static_cast<int>(get_int("encoder.ffn_dim"));
    cfg.dropout_rate = static_cast<float>(get_double("encoder.dropout"));
    cfg.max_len = max_len();
    cfg.seed = seed();
    cfg.validate();
    return cfg;
}

DecoderConfig RunConfig::decoder_config() const {
    DecoderConfig cfg;
    cfg.num_layers = static_cast<int>(get_int("decoder.num_layers"));
    cfg.num_heads = static_cast<int>(get_int("decoder.num_heads"));
    cfg.hidden_dim = static_cast<int>(get_int("decoder.hidden_dim"));
    cfg.ffn_dim = static_cast<int>(get_int("decoder.ffn_dim"));
    cfg.z_dim = static_cast<int>(get_int("decoder.z_dim"));
    cfg.max_len = max_len();
    cfg.seed = mix_seed(seed(), 0xDEC);
    cfg.validate();
    return cfg;
}

MaskingPolicy RunConfig::masking_policy() const {
    MaskingPolicy policy;
    policy.select_rate = static_cast<float>(get_double("mask.select_rate"));
    policy.mask_rate = static_cast<float>(get_double("mask.mask_rate"));
    policy.random_rate = static_cast<float>(get_double("mask.random_rate"));
    policy.keep_rate = static_cast<float>(get_double("mask.keep_rate"));
    policy.seed = mix_seed(seed(), 0x3A5);
    policy.validate();
    return policy;
}

PretrainOptions RunConfig::pretrain_options() const {
    PretrainOptions opts;
    opts.policy = masking_policy();
    opts.optim.lr = static_cast<float>(get_double("optim.lr"));
    opts.optim.beta1 = static_cast<float>(get_double("optim.beta1"));
    opts.optim.beta2 = static_cast<float>(get_double("optim.beta2"));
    opts.optim.eps = static_cast<float>(get_double("optim.eps"));
    opts.steps = static_cast<int>(get_int("pretrain.steps"));
    opts.batch_size = static_cast<int>(get_int("pretrain.batch_size"));
    opts.heldout_fraction = get_double("pretrain.heldout_fraction");
    opts.seed = seed();
    return opts;
}

FinetuneOptions RunConfig::finetune_options() const {
    FinetuneOptions opts;
    opts.head_optim.lr = static_cast<float>(get_double("finetune.head_lr"));
    opts.encoder_optim.lr = static_cast<float>(get_double("finetune.encoder_lr"));
    opts.freeze_encoder = get_bool("finetune.freeze_encoder");
    opts.steps = static_cast<int>(get_int("finetune.steps"));
    opts.batch_size = static_cast<int>(get_int("finetune.batch_size"));
    opts.seed = seed();
    return opts;
}

VaeTrainConfig RunConfig::vae_config() const {
    VaeTrainConfig cfg;
    cfg.epochs = static_cast<int>(get_int("vae.epochs"));
    cfg.batch_size = static_cast<int>(get_int("vae.batch_size"));
    cfg.kl_weight = static_cast<float>(get_double("vae.kl_weight"));
    cfg.lr = static_cast<float>(get_double("vae.lr"));
    cfg.corpus_cap = static_cast<int>(get_int("vae.corpus_cap"));
    cfg.seed = seed();
    return cfg;
}

GenerationConfig RunConfig::generation_config() const {
    GenerationConfig gen;
    const std::string& mode = get("gen.sampling");
    if (mode == "greedy") {
        gen.sampling = SamplingMode::greedy;
    } else if (mode == "temperature") {
        gen.sampling = SamplingMode::temperature;
    } else {
        throw ConfigError("config: gen.sampling must be 'greedy' or 'temperature'");
    }
    gen.temperature = static_cast<float>(get_double("gen.temperature"));
    gen.allow_untrained = get_bool("gen.allow_untrained");
    gen.max_len = max_len();
    gen.seed = seed();
    return gen;
}

SyntheticConfig RunConfig::synthetic_config() const {
    SyntheticConfig cfg;
    cfg.min_len = static_cast<int>(get_int("synth.min_len"));
    cfg.max_len = static_cast<int>(get_int("synth.max_len"));
    cfg.seed = seed();
    return cfg;
}

int RunConfig::head_hidden_dim() const {
    const int h = static_cast<int>(get_int("head.hidden_dim"));
    return h > 0 ? h : static_cast<int>(get_int("encoder.hidden_dim"));
}

}  // namespace plm
