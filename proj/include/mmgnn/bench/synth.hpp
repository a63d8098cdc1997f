#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmgnn/data/dataset.hpp"
#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/explain/masks.hpp"

namespace mmgnn::bench {

/// Planted-structure benchmark. Class-1 subjects get +signal_strength on
/// their group's planted edges; planted knowledge rows are a shared
/// prototype direction plus noise, the remaining rows pure noise.
struct SynthSpec {
  int subjects_per_class = 40;
  Index num_nodes = 16;
  Index num_knowledge = 64;
  Index knowledge_dim = 32;
  Index planted_edges = 8;      // per group
  Index shared_edges = 4;       // planted edges common to every group
  Index planted_knowledge = 8;
  double signal_strength = 0.4;  // delta
  double noise_scale = 0.1;
  double knowledge_noise = 0.5;  // norm of the noise added to each row
  std::vector<std::string> groups{"female", "male"};
  // Written to the dataset header. Under symmetric GCN normalization one-hot
  // features leave almost none of the planted weight shift, so the
  // benchmark uses adjacency rows.
  data::FeatureMode feature_mode = data::FeatureMode::kProfile;
  std::uint64_t seed = 7;
};

nlohmann::json to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

struct GroundTruth {
  std::map<std::string, std::vector<std::pair<Index, Index>>> edges;  // i < j
  std::vector<Index> knowledge;
};

nlohmann::json to_json(const GroundTruth& t);
GroundTruth ground_truth_from_json(const nlohmann::json& j);
void save_truth(const GroundTruth& t, const std::filesystem::path& path);
GroundTruth load_truth(const std::filesystem::path& path);

struct SynthData {
  data::ConnectomeDataset dataset;
  data::KnowledgeBase knowledge;
  GroundTruth truth;
};

/// Pure function of the spec. Throws RangeError for inconsistent counts.
SynthData generate(const SynthSpec& spec);

/// Row-major upper-triangle position of edge (i, j), i < j.
Index edge_index(Index i, Index j, Index num_nodes);

struct Recovery {
  double edge_auc = 0.0;
  double knowledge_auc = 0.0;
};

/// AUC of sigma(alpha) for planted versus other edges and of sigma(beta) for
/// planted versus other knowledge rows, per group.
std::map<std::string, Recovery> mask_recovery(const explain::MaskSet& masks, const GroundTruth& truth);

}  // namespace mmgnn::bench
