#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/encoder.hpp"
#include "core/vae.hpp"

namespace plm {

// Checkpoint container, identical for every model kind:
//
//   bytes 0..7    magic "PLMCKPT1"
//   bytes 8..15   uint64 little-endian header length H
//   bytes 16..    header: JSON document of H bytes
//   then          payload: concatenated float32 little-endian row-major tensors
//
// Header fields: format_version (1), model_kind ("encoder" | "finetuned" |
// "decoder"), config (flat string map), vocabulary (30 tokens in id order),
// tensors (ordered [{name, offset, shape}] with byte offsets into the
// payload, strictly increasing), plus model-kind extras (task spec, trained
// flag, encoder_dim). Saving the same model twice yields identical bytes.

constexpr char kCheckpointMagic[8] = {'P', 'L', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr uint64_t kCheckpointVersion = 1;

struct LoadedTensorEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct LoadedCheckpoint {
    std::string model_kind;
    std::map<std::string, std::string> config;
    std::vector<std::string> vocabulary;
    nlohmann::json extra;  // model-kind specific header fields
    std::vector<LoadedTensorEntry> tensors;

    const LoadedTensorEntry& find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const std::string& model_kind,
                      const std::map<std::string, std::string>& config,
                      const nlohmann::json& extra,
                      const std::vector<std::pair<std::string, Tensor>>& tensors);

LoadedCheckpoint read_checkpoint(const std::string& path);

// ---- model-level save/load ----

void save_encoder_checkpoint(const std::string& path, const EncoderModel& model,
                             const std::map<std::string, std::string>& config);
EncoderModel load_encoder_checkpoint(const std::string& path);

struct FinetunedModel {
    EncoderModel encoder;
    TaskHead head;
    TaskSpec spec;
    std::map<std::string, std::string> config;
};

void save_finetuned_checkpoint(const std::string& path, const EncoderModel& model,
                               const TaskHead& head, const TaskSpec& spec,
                               const std::map<std::string, std::string>& config);
FinetunedModel load_finetuned_checkpoint(const std::string& path);

void save_decoder_checkpoint(const std::string& path, const DecoderModel& model,
                             const std::map<std::string, std::string>& config);
DecoderModel load_decoder_checkpoint(const std::string& path);

// Config-map round trips for the model configs embedded in checkpoints.
EncoderConfig encoder_config_from_map(const std::map<std::string, std::string>& config);
DecoderConfig decoder_config_from_map(const std::map<std::string, std::string>& config);

}  // namespace plm
