#ifndef GEOLM_CHECKPOINT_HPP_
#define GEOLM_CHECKPOINT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "geolm/neural.hpp"

namespace geolm {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string config_hash;
  /// Free-form references the CLI stores alongside (vocabulary and catalog
  /// file names, training settings).
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  nn::NetworkParams<float> params;
  CheckpointMeta meta;
};

nlohmann::json model_config_to_json(const nn::ModelConfig& config);
/// Throws ValidationError naming the missing or invalid field.
nn::ModelConfig model_config_from_json(const nlohmann::json& doc);

/// Writes `manifest` (JSON: config, array names and shapes, seed, epoch)
/// and a sibling `<stem>.bin` holding every array as little-endian float32,
/// row-major, in manifest order.
void save_checkpoint(const std::filesystem::path& manifest, const nn::NetworkParams<float>& params,
                     const CheckpointMeta& meta);

/// Throws InputError for unreadable or truncated files and ValidationError
/// when the manifest's shapes disagree with its config.
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

}  // namespace geolm

#endif  // GEOLM_CHECKPOINT_HPP_
