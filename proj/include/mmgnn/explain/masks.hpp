#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmgnn/data/dataset.hpp"
#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/model/model.hpp"
#include "mmgnn/rng.hpp"

namespace mmgnn::explain {

/// Population-level masks for one group: alpha over the V(V-1)/2 upper
/// triangle (row-major, mirrored to V x V) gates graph edges, beta gates the
/// N fusion edges.
struct MaskPair {
  std::string group;
  Tensor alpha;  // 1 x V(V-1)/2 logits
  Tensor beta;   // N x 1 logits
  double tau = 0.5;

  static MaskPair zeros(const std::string& group, Index num_nodes, Index num_knowledge, double tau);
  Index num_nodes() const;
  Index num_knowledge() const { return beta.rows(); }
};

/// Number of upper-triangular entries of a V x V matrix.
Index num_edges(Index num_nodes);

/// Weights (mask, clf, sparsity, discreteness) of the explanation loss.
struct Lambdas {
  double mask = 1.0;
  double clf = 1.0;
  double sparsity = 0.5;
  double discreteness = 0.1;
};

struct ExplainConfig {
  Lambdas lambdas;
  double tau = 0.5;
  int epochs = 100;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
  int batch_size = 1;  // subjects per Adam step
};

nlohmann::json to_json(const ExplainConfig& c);

struct LossComponents {
  double mask = 0.0;
  double clf = 0.0;
  double sparsity = 0.0;
  double discreteness = 0.0;
  double total = 0.0;
};

nlohmann::json to_json(const LossComponents& c);

struct MaskSet {
  std::map<std::string, MaskPair> pairs;
  Lambdas lambdas;
  double threshold = 0.5;  // hint for augmentation
  double tau = 0.5;
  std::uint64_t seed = 0;
  Index num_nodes = 0;
  Index num_knowledge = 0;
  std::map<std::string, std::vector<LossComponents>> history;  // per epoch

  const MaskPair& pair_for(const std::string& group) const;
};

/// Binary-concrete relaxation: sigma((phi + g - g') / tau) with g, g' drawn
/// from Gumbel(0, 1). Throws RangeError for tau <= 0.
double gumbel_sample(double phi, double tau, Rng& rng);

/// Frozen noise for one masked forward pass: g - g' per mask entry.
struct MaskNoise {
  Matrix edge;       // 1 x V(V-1)/2
  Matrix knowledge;  // N x 1
};

MaskNoise draw_noise(const MaskPair& pair, Rng& rng);
MaskNoise zero_noise(const MaskPair& pair);

/// sigma((logits + noise) / tau), differentiable in the logits.
Tensor relaxed_mask(const Tensor& logits, const Matrix& noise, double tau);

/// W' = M' (mirrored) elementwise-times W. Diagonal stays zero.
Tensor sample_masked_graph(const Matrix& adjacency, const MaskPair& pair, const MaskNoise& noise);
data::Connectome sample_masked_graph(const data::Connectome& g, const MaskPair& pair, Rng& rng);

/// A_f' = M_k' elementwise-times A_f.
model::FusionGraph sample_masked_fusion(const model::FusionGraph& gf, const MaskPair& pair,
                                        const MaskNoise& noise);
model::FusionGraph sample_masked_fusion(const model::FusionGraph& gf, const MaskPair& pair,
                                        Rng& rng);

struct ExplainLoss {
  Tensor total;  // 1 x 1, differentiable in alpha and beta
  LossComponents parts;
};

/// Weighted explanation objective for one subject. `predicted` is the
/// model's class on the unmasked inputs and `e_k` the knowledge embeddings
/// from the frozen model.
ExplainLoss loss_exp(const model::MultimodalModel& frozen, const Matrix& adjacency,
                     const Tensor& e_k, int predicted, int label, const MaskPair& pair,
                     const Lambdas& lambdas, const MaskNoise& noise);

/// Same, computing the unmasked prediction first and drawing fresh noise.
ExplainLoss loss_exp(const model::MultimodalModel& frozen, const data::Connectome& g,
                     const data::KnowledgeBase& kb, const MaskPair& pair, int label,
                     const Lambdas& lambdas, Rng& rng);

/// Optimizes one MaskPair per dataset group over that group's training
/// subjects. The model is never updated. Throws GroupingError when a group
/// has no training subjects.
MaskSet learn_masks(const model::MultimodalModel& frozen, const data::ConnectomeDataset& ds,
                    const data::KnowledgeBase& kb, const std::vector<std::size_t>& train,
                    const ExplainConfig& cfg);

struct RoiScore {
  Index node = 0;
  std::string name;
  double score = 0.0;
  int rank = 0;  // 1-based
};

/// score(v) = sum over u != v of sigma(alpha) on the mirrored matrix,
/// sorted descending with ties by node index. top_k = 0 keeps every node.
std::vector<RoiScore> roi_importance(const MaskPair& pair, const std::vector<std::string>& atlas = {},
                                     std::size_t top_k = 0);

inline constexpr int kHistogramBins = 20;

struct KnowledgeImportance {
  std::vector<double> scores;  // sigma(beta_i)
  std::vector<std::size_t> histogram;  // kHistogramBins bins over [0, 1]
};

KnowledgeImportance knowledge_importance(const MaskPair& pair);

/// Mask file I/O.
nlohmann::json to_json(const MaskSet& set);
MaskSet mask_set_from_json(const nlohmann::json& j);
void save_masks(const MaskSet& set, const std::filesystem::path& path);
MaskSet load_masks(const std::filesystem::path& path);

/// Plot-ready exports.
void export_saliency(const std::vector<RoiScore>& scores, const std::string& group,
                     const std::filesystem::path& json_path, const std::filesystem::path& csv_path);
void export_histogram(const KnowledgeImportance& ki, const std::string& group,
                      const std::filesystem::path& json_path, const std::filesystem::path& csv_path);

}  // namespace mmgnn::explain
