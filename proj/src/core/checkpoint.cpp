#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace plm {

namespace {

void put_u32_le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u64_le(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint64_t get_u64_le(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

uint32_t get_u32_le(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

int64_t require_int(const std::map<std::string, std::string>& config, const std::string& key) {
    auto it = config.find(key);
    if (it == config.end()) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              "checkpoint: config key '" + key + "' missing");
    }
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              "checkpoint: config key '" + key + "' is not an integer");
    }
}

void fill_model_tensors(const LoadedCheckpoint& ckpt,
                        const std::vector<std::pair<std::string, Tensor>>& named) {
    for (const auto& [name, tensor] : named) {
        const auto& entry = ckpt.find(name);
        if (entry.shape != tensor.shape()) {
            throw CheckpointError(CheckpointError::Kind::bad_header,
                                  "checkpoint: tensor '" + name + "' has shape " +
                                      shape_str(entry.shape) + ", model expects " +
                                      shape_str(tensor.shape()));
        }
        Tensor t = tensor;
        std::copy(entry.data.begin(), entry.data.end(), t.values_mut().begin());
    }
}

}  // namespace

const LoadedTensorEntry& LoadedCheckpoint::find(const std::string& name) const {
    for (const auto& e : tensors) {
        if (e.name == name) return e;
    }
    throw CheckpointError(CheckpointError::Kind::bad_header,
                          "checkpoint: tensor '" + name + "' not found");
}

void write_checkpoint(const std::string& path, const std::string& model_kind,
                      const std::map<std::string, std::string>& config,
                      const nlohmann::json& extra,
                      const std::vector<std::pair<std::string, Tensor>>& tensors) {
    nlohmann::json header = extra;
    header["format_version"] = kCheckpointVersion;
    header["model_kind"] = model_kind;
    header["config"] = config;
    header["vocabulary"] = Vocabulary().tokens();

    nlohmann::json index = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        index.push_back({{"name", name}, {"offset", offset}, {"shape", tensor.shape()}});
        offset += static_cast<uint64_t>(tensor.numel()) * 4;
    }
    header["tensors"] = index;

    const std::string header_bytes = header.dump();
    std::string out;
    out.reserve(16 + header_bytes.size() + offset);
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u64_le(out, header_bytes.size());
    out.append(header_bytes);
    for (const auto& [name, tensor] : tensors) {
        for (float f : tensor.values()) put_u32_le(out, std::bit_cast<uint32_t>(f));
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot open " + path + " for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: write failed for " + path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw CheckpointError(CheckpointError::Kind::bad_magic,
                              "checkpoint: bad magic in " + path);
    }
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
    const uint64_t header_len = get_u64_le(base + 8);
    if (16 + header_len > bytes.size()) {
        throw CheckpointError(CheckpointError::Kind::truncated_payload,
                              "checkpoint: header extends past end of file");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              std::string("checkpoint: header is not valid JSON: ") + e.what());
    }

    if (!header.contains("format_version") || !header["format_version"].is_number_unsigned() ||
        header["format_version"].get<uint64_t>() != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::unsupported_version,
                              "checkpoint: unsupported format version");
    }

    LoadedCheckpoint out;
    try {
        out.model_kind = header.at("model_kind").get<std::string>();
        out.config = header.at("config").get<std::map<std::string, std::string>>();
        out.vocabulary = header.at("vocabulary").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              std::string("checkpoint: malformed header: ") + e.what());
    }
    if (out.vocabulary != Vocabulary().tokens()) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              "checkpoint: vocabulary table does not match this build");
    }
    out.extra = header;
    for (const char* k : {"format_version", "model_kind", "config", "vocabulary", "tensors"}) {
        out.extra.erase(k);
    }

    const size_t payload_start = 16 + header_len;
    const uint64_t payload_size = bytes.size() - payload_start;
    const unsigned char* payload = base + payload_start;

    if (!header.contains("tensors") || !header["tensors"].is_array()) {
        throw CheckpointError(CheckpointError::Kind::bad_header, "checkpoint: missing tensor index");
    }
    uint64_t prev_offset_end = 0;
    bool first = true;
    for (const auto& item : header["tensors"]) {
        LoadedTensorEntry entry;
        uint64_t offset = 0;
        try {
            entry.name = item.at("name").get<std::string>();
            offset = item.at("offset").get<uint64_t>();
            entry.shape = item.at("shape").get<Shape>();
        } catch (const nlohmann::json::exception& e) {
            throw CheckpointError(CheckpointError::Kind::bad_header,
                                  std::string("checkpoint: malformed tensor index: ") + e.what());
        }
        if (!first && offset < prev_offset_end) {
            throw CheckpointError(CheckpointError::Kind::index_out_of_bounds,
                                  "checkpoint: tensor offsets not strictly increasing at '" +
                                      entry.name + "'");
        }
        int64_t numel = 1;
        for (int dim : entry.shape) {
            if (dim <= 0) {
                throw CheckpointError(CheckpointError::Kind::bad_header,
                                      "checkpoint: non-positive dimension for '" + entry.name + "'");
            }
            numel *= dim;
        }
        const uint64_t nbytes = static_cast<uint64_t>(numel) * 4;
        if (offset + nbytes < offset || offset + nbytes > payload_size) {
            if (offset + nbytes > payload_size && offset <= payload_size) {
                throw CheckpointError(CheckpointError::Kind::truncated_payload,
                                      "checkpoint: payload truncated at tensor '" + entry.name + "'");
            }
            throw CheckpointError(CheckpointError::Kind::index_out_of_bounds,
                                  "checkpoint: tensor '" + entry.name + "' lies outside the payload");
        }
        entry.data.resize(static_cast<size_t>(numel));
        for (int64_t i = 0; i < numel; ++i) {
            entry.data[static_cast<size_t>(i)] =
                std::bit_cast<float>(get_u32_le(payload + offset + static_cast<uint64_t>(i) * 4));
        }
        prev_offset_end = offset + nbytes;
        first = false;
        out.tensors.push_back(std::move(entry));
    }
    return out;
}

// ---- config maps ----

EncoderConfig encoder_config_from_map(const std::map<std::string, std::string>& config) {
    EncoderConfig cfg;
    cfg.num_layers = static_cast<int>(require_int(config, "encoder.num_layers"));
    cfg.num_heads = static_cast<int>(require_int(config, "encoder.num_heads"));
    cfg.hidden_dim = static_cast<int>(require_int(config, "encoder.hidden_dim"));
    cfg.ffn_dim = static_cast<int>(require_int(config, "encoder.ffn_dim"));
    cfg.max_len = static_cast<int>(require_int(config, "max_len"));
    cfg.seed = static_cast<uint64_t>(require_int(config, "seed"));
    auto it = config.find("encoder.dropout");
    if (it != config.end()) cfg.dropout_rate = std::stof(it->second);
    return cfg;
}

DecoderConfig decoder_config_from_map(const std::map<std::string, std::string>& config) {
    DecoderConfig cfg;
    cfg.num_layers = static_cast<int>(require_int(config, "decoder.num_layers"));
    cfg.num_heads = static_cast<int>(require_int(config, "decoder.num_heads"));
    cfg.hidden_dim = static_cast<int>(require_int(config, "decoder.hidden_dim"));
    cfg.ffn_dim = static_cast<int>(require_int(config, "decoder.ffn_dim"));
    cfg.z_dim = static_cast<int>(require_int(config, "decoder.z_dim"));
    cfg.max_len = static_cast<int>(require_int(config, "max_len"));
    cfg.seed = mix_seed(static_cast<uint64_t>(require_int(config, "seed")), 0xDEC);
    return cfg;
}

// ---- model-level wrappers ----

void save_encoder_checkpoint(const std::string& path, const EncoderModel& model,
                             const std::map<std::string, std::string>& config) {
    write_checkpoint(path, "encoder", config, nlohmann::json::object(), model.named_parameters());
}

EncoderModel load_encoder_checkpoint(const std::string& path) {
    const auto ckpt = read_checkpoint(path);
    if (ckpt.model_kind != "encoder") {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              "checkpoint: expected an encoder checkpoint, found '" +
                                  ckpt.model_kind + "'");
    }
    EncoderModel model = init_encoder(encoder_config_from_map(ckpt.config));
    fill_model_tensors(ckpt, model.named_parameters());
    return model;
}

void save_finetuned_checkpoint(const std::string& path, const EncoderModel& model,
                               const TaskHead& head, const TaskSpec& spec,
                               const std::map<std::string, std::string>& config) {
    nlohmann::json extra;
    extra["task"] = {{"name", spec.name},
                     {"kind", task_kind_name(spec.kind)},
                     {"num_classes", spec.num_classes},
                     {"metric", metric_kind_name(spec.metric)}};
    auto tensors = model.named_parameters();
    for (auto& nt : head.named_parameters()) tensors.push_back(nt);
    write_checkpoint(path, "finetuned", config, extra, tensors);
}

FinetunedModel load_finetuned_checkpoint(const std::string& path) {
    const auto ckpt = read_checkpoint(path);
    if (ckpt.model_kind != "finetuned") {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              "checkpoint: expected a finetuned checkpoint, found '" +
                                  ckpt.model_kind + "'");
    }
    FinetunedModel out;
    out.config = ckpt.config;
    try {
        const auto& task = ckpt.extra.at("task");
        out.spec = TaskSpec::make(task.at("name").get<std::string>(),
                                  task_kind_from_name(task.at("kind").get<std::string>()),
                                  task.at("num_classes").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              std::string("checkpoint: malformed task header: ") + e.what());
    }
    out.encoder = init_encoder(encoder_config_from_map(ckpt.config));

    const auto& w1 = ckpt.find("head.w1");
    if (w1.shape.size() != 2) {
        throw CheckpointError(CheckpointError::Kind::bad_header, "checkpoint: bad head.w1 shape");
    }
    out.head = init_task_head(out.spec.kind, w1.shape[0], w1.shape[1], out.spec.num_classes,
                              out.encoder.config.seed);
    auto tensors = out.encoder.named_parameters();
    for (auto& nt : out.head.named_parameters()) tensors.push_back(nt);
    fill_model_tensors(ckpt, tensors);
    return out;
}

void save_decoder_checkpoint(const std::string& path, const DecoderModel& model,
                             const std::map<std::string, std::string>& config) {
    nlohmann::json extra;
    extra["trained"] = model.trained;
    extra["encoder_dim"] = model.encoder_dim();
    write_checkpoint(path, "decoder", config, extra, model.named_parameters());
}

DecoderModel load_decoder_checkpoint(const std::string& path) {
    const auto ckpt = read_checkpoint(path);
    if (ckpt.model_kind != "decoder") {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              "checkpoint: expected a decoder checkpoint, found '" +
                                  ckpt.model_kind + "'");
    }
    int encoder_dim = 0;
    bool trained = false;
    try {
        encoder_dim = ckpt.extra.at("encoder_dim").get<int>();
        trained = ckpt.extra.at("trained").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              std::string("checkpoint: malformed decoder header: ") + e.what());
    }
    DecoderModel model = init_decoder(decoder_config_from_map(ckpt.config), encoder_dim);
    model.trained = trained;
    fill_model_tensors(ckpt, model.named_parameters());
    return model;
}

}  // namespace plm
