#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mmgnn/model/model.hpp"

namespace mmgnn::model {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "mmgnn-checkpoint";

struct Checkpoint {
  MultimodalModel model;
  nlohmann::json manifest;
};

/// Writes <dir>/manifest.json and <dir>/params.bin. `extra` is merged into
/// the manifest (training config, history, seeds). No wall-clock data is
/// written, so equal inputs give byte-identical files.
void save_checkpoint(const MultimodalModel& m, const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());

/// Throws FormatError on malformed files and DimensionError when a stored
/// tensor does not match the architecture in the manifest.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// params.bin body: per tensor, u64 name length, UTF-8 name, u64 rank,
/// rank x u64 dims, float64 payload; all little-endian.
std::string serialize_params(const NamedTensors& params);
NamedTensors parse_params(const std::string& bytes, const std::string& origin = "<memory>");

}  // namespace mmgnn::model
