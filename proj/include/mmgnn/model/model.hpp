#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmgnn/data/dataset.hpp"
#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/gnn/layers.hpp"
#include "mmgnn/types.hpp"

namespace mmgnn::model {

struct ModelConfig {
  gnn::Arch arch = gnn::Arch::kGcn;
  data::FeatureMode feature_mode = data::FeatureMode::kIdentity;
  Index num_nodes = 0;      // V; d_in follows from the feature mode
  Index knowledge_dim = 0;  // width of h(k_i)
  int num_classes = 2;
  Index hidden = 64;      // d_hidden
  Index fusion_dim = 64;  // d_f
  int backbone_layers = 2;
  int fusion_layers = 2;
  int adapter_layers = 2;
  int projection_layers = 1;
  int classifier_layers = 2;
  int gat_heads = 1;
  int gine_mlp_layers = 2;
  // Backbone-only baseline: the fusion star is built with all edges absent,
  // so knowledge never reaches the center.
  bool sever_fusion = false;
  std::uint64_t seed = 0;

  Index input_dim() const { return num_nodes; }
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

class MultimodalModel {
 public:
  ModelConfig config;
  std::vector<gnn::LayerParams> backbone;
  gnn::MLPParams knowledge_adapter;
  gnn::MLPParams graph_projection;
  std::vector<gnn::LayerParams> fusion;
  gnn::MLPParams classifier;

  /// Seeded Glorot initialization of every parameter group.
  static MultimodalModel init(const ModelConfig& config);

  /// Pointers to every parameter, in checkpoint order.
  gnn::ParamRefs parameter_refs();
  NamedTensors parameters() const;

  /// Deep copy; parameters of the copy are fresh leaves.
  MultimodalModel clone() const;
  void set_requires_grad(bool on);
  void zero_grad();

  /// SHA-256 over parameter names, shapes and values.
  std::string checksum() const;
  std::size_t num_parameters() const;
};

struct FusionGraph {
  Tensor center_feature;      // 1 x d_f
  Tensor knowledge_features;  // N x d_f
  Tensor edge_indicator;      // N x 1, entries in [0, 1]

  Index num_knowledge() const { return knowledge_features.rows(); }
};

/// V x d_in node features under the model's feature mode.
Matrix input_features(const MultimodalModel& m, const Matrix& adjacency);

/// Backbone node embeddings. Node features come from the observed
/// connectome; `adjacency` (possibly masked or augmented) carries messages.
Tensor embed_graph(const MultimodalModel& m, const Tensor& adjacency, const Matrix& observed);
Tensor embed_graph(const MultimodalModel& m, const Tensor& adjacency);
Tensor embed_graph(const MultimodalModel& m, const data::Connectome& g);

Tensor embed_knowledge(const MultimodalModel& m, const Matrix& embeddings);
Tensor embed_knowledge(const MultimodalModel& m, const data::KnowledgeBase& kb);

/// Star graph with center graph_projection(mean_pool(e_g)) and all N edges
/// present.
FusionGraph build_fusion_graph(const Tensor& e_g, const Tensor& e_k, const MultimodalModel& m);

/// Runs the fusion layers on the star and classifies the center. Returns
/// 1 x C logits.
Tensor fusion_forward(const MultimodalModel& m, const FusionGraph& gf);

/// Full forward on a (possibly masked) adjacency with precomputed knowledge
/// embeddings and an explicit edge indicator.
Tensor forward(const MultimodalModel& m, const Tensor& adjacency, const Matrix& observed,
               const Tensor& e_k, const Tensor& indicator);
Tensor forward(const MultimodalModel& m, const Tensor& adjacency, const Tensor& e_k,
               const Tensor& indicator);
/// Same with the default all-ones indicator.
Tensor forward(const MultimodalModel& m, const Tensor& adjacency, const Tensor& e_k);
Tensor forward(const MultimodalModel& m, const data::Connectome& g, const data::KnowledgeBase& kb);

/// Checks that the dataset and knowledge base match the model's dims.
void check_compatible(const MultimodalModel& m, const data::ConnectomeDataset& ds);
void check_compatible(const MultimodalModel& m, const data::KnowledgeBase& kb);

}  // namespace mmgnn::model
