#include <cmath>

#include "mmgnn/augment/augment.hpp"
#include "mmgnn/errors.hpp"

namespace mmgnn::augment {

using nlohmann::json;

json to_json(const AugmentConfig& c) {
  return {{"threshold", c.threshold},
          {"keep_probability", c.keep_probability},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"weight_decay", c.weight_decay},
          {"optimizer", model::to_string(c.optimizer)}};
}

namespace {

void check_threshold(const AugmentConfig& cfg) {
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
    throw RangeError("threshold must lie in (0, 1), got " + std::to_string(cfg.threshold));
  }
}

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Matrix augment_graph(const Matrix& adjacency, const explain::MaskPair& pair, const AugmentConfig& cfg,
                     Rng& rng) {
  check_threshold(cfg);
  const Index v = adjacency.rows();
  if (adjacency.cols() != v || explain::num_edges(v) != pair.alpha.cols()) {
    throw DimensionError("graph with " + std::to_string(v) + " nodes does not match a mask over " +
                         std::to_string(pair.alpha.cols()) + " edges");
  }
  Matrix out = adjacency;
  const Matrix& a = pair.alpha.value();
  Index e = 0;
  for (Index i = 0; i < v; ++i) {
    for (Index j = i + 1; j < v; ++j, ++e) {
      const bool keep_coin = rng.bernoulli(cfg.keep_probability);
      if (sigma(a(0, e)) >= cfg.threshold || keep_coin) continue;
      out(i, j) = 0.0;
      out(j, i) = 0.0;
    }
  }
  return out;
}

data::Connectome augment_graph(const data::Connectome& g, const explain::MaskPair& pair,
                               const AugmentConfig& cfg, Rng& rng) {
  data::Connectome out = g;
  out.adjacency = augment_graph(g.adjacency, pair, cfg, rng);
  return out;
}

Matrix augment_fusion(const Tensor& beta, const AugmentConfig& cfg, Rng& rng) {
  check_threshold(cfg);
  if (beta.rows() < 1 || beta.cols() != 1) {
    throw DimensionError("knowledge mask must be N x 1 with N >= 1, got " + beta.shape_string());
  }
  Matrix out(beta.rows(), 1);
  for (Index i = 0; i < beta.rows(); ++i) {
    const bool keep_coin = rng.bernoulli(cfg.keep_probability);
    out(i, 0) = sigma(beta.value()(i, 0)) >= cfg.threshold || keep_coin ? 1.0 : 0.0;
  }
  return out;
}

model::TrainResult finetune(const model::MultimodalModel& m, const explain::MaskSet& masks,
                            const data::ConnectomeDataset& ds, const data::KnowledgeBase& kb,
                            const data::Split& split, const AugmentConfig& cfg) {
  check_threshold(cfg);
  if (masks.num_nodes != ds.num_nodes || masks.num_knowledge != kb.count()) {
    throw DimensionError("masks cover V=" + std::to_string(masks.num_nodes) + ", N=" +
                         std::to_string(masks.num_knowledge) + " but data has V=" +
                         std::to_string(ds.num_nodes) + ", N=" + std::to_string(kb.count()));
  }
  for (std::size_t s : split.train) masks.pair_for(ds.subjects.at(s).group);

  model::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  tc.weight_decay = cfg.weight_decay;
  tc.optimizer = cfg.optimizer;
  tc.threads = cfg.threads;
  tc.on_epoch = cfg.on_epoch;

  auto sampler = [&](int epoch, std::size_t s) {
    const auto& subject = ds.subjects[s];
    const auto& pair = masks.pair_for(subject.group);
    Rng rng = Rng::keyed(cfg.seed, {0xa06e47ULL, static_cast<std::uint64_t>(epoch), s});
    model::TrainInputs in;
    in.adjacency = augment_graph(subject.adjacency, pair, cfg, rng);
    in.indicator = augment_fusion(pair.beta, cfg, rng);
    return in;
  };
  return model::train(m, ds, kb, split, tc, sampler);
}

}  // namespace mmgnn::augment
