#include <sstream>

#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"
#include "mmgnn/model/model.hpp"
#include "mmgnn/rng.hpp"

namespace mmgnn::model {

using nlohmann::json;

json to_json(const ModelConfig& c) {
  return {{"arch", gnn::to_string(c.arch)},
          {"feature_mode", data::to_string(c.feature_mode)},
          {"num_nodes", c.num_nodes},
          {"knowledge_dim", c.knowledge_dim},
          {"num_classes", c.num_classes},
          {"hidden", c.hidden},
          {"fusion_dim", c.fusion_dim},
          {"backbone_layers", c.backbone_layers},
          {"fusion_layers", c.fusion_layers},
          {"adapter_layers", c.adapter_layers},
          {"projection_layers", c.projection_layers},
          {"classifier_layers", c.classifier_layers},
          {"gat_heads", c.gat_heads},
          {"gine_mlp_layers", c.gine_mlp_layers},
          {"sever_fusion", c.sever_fusion},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.arch = gnn::parse_arch(j.at("arch").get<std::string>());
  c.feature_mode = data::parse_feature_mode(j.at("feature_mode").get<std::string>());
  c.num_nodes = j.at("num_nodes").get<Index>();
  c.knowledge_dim = j.at("knowledge_dim").get<Index>();
  c.num_classes = j.at("num_classes").get<int>();
  c.hidden = j.at("hidden").get<Index>();
  c.fusion_dim = j.at("fusion_dim").get<Index>();
  c.backbone_layers = j.at("backbone_layers").get<int>();
  c.fusion_layers = j.at("fusion_layers").get<int>();
  c.adapter_layers = j.at("adapter_layers").get<int>();
  c.projection_layers = j.at("projection_layers").get<int>();
  c.classifier_layers = j.at("classifier_layers").get<int>();
  c.gat_heads = j.at("gat_heads").get<int>();
  c.gine_mlp_layers = j.at("gine_mlp_layers").get<int>();
  c.sever_fusion = j.at("sever_fusion").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

// {d_in, d_out, ..., d_out} with `layers` affine maps; hidden widths are d_out.
std::vector<Index> mlp_dims(Index d_in, Index d_out, int layers) {
  std::vector<Index> dims{d_in};
  for (int i = 1; i < layers; ++i) dims.push_back(d_out);
  dims.push_back(d_out);
  return dims;
}

void check_config(const ModelConfig& c) {
  if (c.num_nodes < 1) throw ValidationError("model needs num_nodes >= 1");
  if (c.knowledge_dim < 1) throw ValidationError("model needs knowledge_dim >= 1");
  if (c.num_classes < 2) throw ValidationError("model needs at least 2 classes");
  if (c.hidden < 1 || c.fusion_dim < 1) throw ValidationError("model widths must be positive");
  if (c.backbone_layers < 1 || c.fusion_layers < 1 || c.adapter_layers < 1 ||
      c.projection_layers < 1 || c.classifier_layers < 1) {
    throw ValidationError("every parameter group needs at least one layer");
  }
}

}  // namespace

MultimodalModel MultimodalModel::init(const ModelConfig& config) {
  check_config(config);
  MultimodalModel m;
  m.config = config;
  Rng rng(config.seed);
  const gnn::LayerOptions opts{config.gat_heads, config.gine_mlp_layers};
  Index width = config.input_dim();
  for (int l = 0; l < config.backbone_layers; ++l) {
    m.backbone.push_back(gnn::init_layer(config.arch, width, config.hidden, rng, opts));
    width = config.hidden;
  }
  m.knowledge_adapter = gnn::MLPParams::init(
      mlp_dims(config.knowledge_dim, config.fusion_dim, config.adapter_layers), rng);
  m.graph_projection = gnn::MLPParams::init(
      mlp_dims(config.hidden, config.fusion_dim, config.projection_layers), rng);
  for (int l = 0; l < config.fusion_layers; ++l) {
    m.fusion.push_back(
        gnn::init_layer(config.arch, config.fusion_dim, config.fusion_dim, rng, opts));
  }
  std::vector<Index> head{config.fusion_dim};
  for (int i = 1; i < config.classifier_layers; ++i) head.push_back(config.fusion_dim);
  head.push_back(config.num_classes);
  m.classifier = gnn::MLPParams::init(head, rng);
  return m;
}

gnn::ParamRefs MultimodalModel::parameter_refs() {
  gnn::ParamRefs refs;
  for (std::size_t l = 0; l < backbone.size(); ++l)
    gnn::parameter_refs(backbone[l], "backbone." + std::to_string(l), refs);
  gnn::parameter_refs(knowledge_adapter, "adapter", refs);
  gnn::parameter_refs(graph_projection, "projection", refs);
  for (std::size_t l = 0; l < fusion.size(); ++l)
    gnn::parameter_refs(fusion[l], "fusion." + std::to_string(l), refs);
  gnn::parameter_refs(classifier, "classifier", refs);
  return refs;
}

NamedTensors MultimodalModel::parameters() const {
  NamedTensors out;
  for (auto& [name, t] : const_cast<MultimodalModel*>(this)->parameter_refs())
    out.emplace_back(name, *t);
  return out;
}

MultimodalModel MultimodalModel::clone() const {
  MultimodalModel copy = *this;
  for (auto& [name, t] : copy.parameter_refs()) *t = t->clone();
  return copy;
}

void MultimodalModel::set_requires_grad(bool on) {
  for (auto& [name, t] : parameter_refs()) t->set_requires_grad(on);
}

void MultimodalModel::zero_grad() {
  for (auto& [name, t] : parameter_refs()) t->zero_grad();
}

std::string MultimodalModel::checksum() const {
  std::string buf;
  for (const auto& [name, t] : parameters()) {
    buf += name;
    buf += '\0';
    buf += t.shape_string();
    buf.append(reinterpret_cast<const char*>(t.value().data()),
               static_cast<std::size_t>(t.size()) * sizeof(double));
  }
  return io::sha256_hex(buf);
}

std::size_t MultimodalModel::num_parameters() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += static_cast<std::size_t>(t.size());
  return n;
}

Matrix input_features(const MultimodalModel& m, const Matrix& adjacency) {
  if (adjacency.rows() != m.config.num_nodes) {
    throw DimensionError("graph has " + std::to_string(adjacency.rows()) +
                         " nodes, model expects " + std::to_string(m.config.num_nodes));
  }
  return data::node_features(adjacency, m.config.feature_mode);
}

Tensor embed_graph(const MultimodalModel& m, const Tensor& adjacency, const Matrix& observed) {
  if (adjacency.rows() != observed.rows() || adjacency.cols() != observed.cols()) {
    throw DimensionError("adjacency " + adjacency.shape_string() + " does not match observed graph");
  }
  Tensor x(input_features(m, observed));
  for (std::size_t l = 0; l < m.backbone.size(); ++l) {
    x = gnn::layer_forward(x, adjacency, m.backbone[l], l + 1 < m.backbone.size());
  }
  return x;
}

Tensor embed_graph(const MultimodalModel& m, const Tensor& adjacency) {
  return embed_graph(m, adjacency, adjacency.value());
}

Tensor embed_graph(const MultimodalModel& m, const data::Connectome& g) {
  return embed_graph(m, Tensor(g.adjacency));
}

Tensor embed_knowledge(const MultimodalModel& m, const Matrix& embeddings) {
  if (embeddings.cols() != m.config.knowledge_dim) {
    throw DimensionError("knowledge embeddings have width " + std::to_string(embeddings.cols()) +
                         ", adapter expects " + std::to_string(m.config.knowledge_dim));
  }
  return gnn::mlp_forward(Tensor(embeddings), m.knowledge_adapter);
}

Tensor embed_knowledge(const MultimodalModel& m, const data::KnowledgeBase& kb) {
  return embed_knowledge(m, kb.embeddings);
}

FusionGraph build_fusion_graph(const Tensor& e_g, const Tensor& e_k, const MultimodalModel& m) {
  if (e_k.cols() != m.config.fusion_dim) {
    throw DimensionError("knowledge features " + e_k.shape_string() + " do not have width d_f=" +
                         std::to_string(m.config.fusion_dim));
  }
  if (e_k.rows() < 1) throw DimensionError("fusion graph needs at least one knowledge node");
  FusionGraph gf;
  gf.center_feature = gnn::mlp_forward(gnn::mean_pool(e_g), m.graph_projection);
  gf.knowledge_features = e_k;
  gf.edge_indicator = Tensor::constant(e_k.rows(), 1, 1.0);
  return gf;
}

Tensor fusion_forward(const MultimodalModel& m, const FusionGraph& gf) {
  Tensor indicator = gf.edge_indicator;
  if (m.config.sever_fusion) indicator = Tensor::zeros(gf.num_knowledge(), 1);
  gnn::StarState state{gf.center_feature, gf.knowledge_features};
  for (const auto& layer : m.fusion) state = gnn::star_layer(state, indicator, layer, true);
  return gnn::mlp_forward(state.center, m.classifier);
}

Tensor forward(const MultimodalModel& m, const Tensor& adjacency, const Matrix& observed,
               const Tensor& e_k, const Tensor& indicator) {
  FusionGraph gf = build_fusion_graph(embed_graph(m, adjacency, observed), e_k, m);
  if (indicator.rows() != gf.num_knowledge() || indicator.cols() != 1) {
    throw DimensionError("edge indicator " + indicator.shape_string() + " does not match N=" +
                         std::to_string(gf.num_knowledge()));
  }
  gf.edge_indicator = indicator;
  return fusion_forward(m, gf);
}

Tensor forward(const MultimodalModel& m, const Tensor& adjacency, const Tensor& e_k,
               const Tensor& indicator) {
  return forward(m, adjacency, adjacency.value(), e_k, indicator);
}

Tensor forward(const MultimodalModel& m, const Tensor& adjacency, const Tensor& e_k) {
  return fusion_forward(m, build_fusion_graph(embed_graph(m, adjacency), e_k, m));
}

Tensor forward(const MultimodalModel& m, const data::Connectome& g, const data::KnowledgeBase& kb) {
  return forward(m, Tensor(g.adjacency), embed_knowledge(m, kb));
}

void check_compatible(const MultimodalModel& m, const data::ConnectomeDataset& ds) {
  if (ds.num_nodes != m.config.num_nodes) {
    throw DimensionError("dataset has V=" + std::to_string(ds.num_nodes) + ", checkpoint expects V=" +
                         std::to_string(m.config.num_nodes));
  }
  if (ds.num_classes != m.config.num_classes) {
    throw DimensionError("dataset has C=" + std::to_string(ds.num_classes) +
                         ", checkpoint expects C=" + std::to_string(m.config.num_classes));
  }
  if (ds.feature_mode != m.config.feature_mode) {
    throw ValidationError("dataset feature mode " + data::to_string(ds.feature_mode) +
                          " differs from checkpoint's " + data::to_string(m.config.feature_mode));
  }
}

void check_compatible(const MultimodalModel& m, const data::KnowledgeBase& kb) {
  if (kb.dim() != m.config.knowledge_dim) {
    throw DimensionError("knowledge base has d=" + std::to_string(kb.dim()) +
                         ", checkpoint expects d=" + std::to_string(m.config.knowledge_dim));
  }
}

}  // namespace mmgnn::model
