#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmgnn/types.hpp"

namespace mmgnn::data {

/// How node features are synthesized from a connectome.
///  identity: one-hot node index (V x V identity)
///  profile:  the node's adjacency row
enum class FeatureMode { kIdentity, kProfile };

FeatureMode parse_feature_mode(const std::string& name);
std::string to_string(FeatureMode mode);

struct Connectome {
  std::string subject_id;
  Matrix adjacency;  // V x V, symmetric, zero diagonal, nonnegative
  int label = 0;
  std::string group;

  Index num_nodes() const { return adjacency.rows(); }
};

struct ConnectomeDataset {
  Index num_nodes = 0;
  int num_classes = 0;
  std::vector<std::string> groups;
  std::vector<std::string> atlas;  // optional ROI names
  FeatureMode feature_mode = FeatureMode::kIdentity;
  std::vector<Connectome> subjects;

  std::size_t size() const { return subjects.size(); }

  /// Position of `group` in `groups`, or -1.
  int group_index(const std::string& group) const;
};

inline constexpr const char* kDatasetFormat = "cnx-v1";

/// Parses and validates a cnx-v1 JSON Lines file.
ConnectomeDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const ConnectomeDataset& ds, const std::filesystem::path& path);

/// Throws ValidationError naming the subject and reason on the first
/// violated invariant.
void validate(const ConnectomeDataset& ds);

/// V x d_in feature matrix for a connectome under the given mode.
Matrix node_features(const Matrix& adjacency, FeatureMode mode);

}  // namespace mmgnn::data
