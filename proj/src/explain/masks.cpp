#include <algorithm>
#include <cmath>

#include "mmgnn/errors.hpp"
#include "mmgnn/explain/masks.hpp"
#include "mmgnn/model/optim.hpp"

namespace mmgnn::explain {

using nlohmann::json;

Index num_edges(Index num_nodes) { return num_nodes * (num_nodes - 1) / 2; }

MaskPair MaskPair::zeros(const std::string& group, Index num_nodes, Index num_knowledge, double tau) {
  if (!(tau > 0.0)) throw RangeError("temperature must be positive");
  if (num_nodes < 2) throw DimensionError("masks need at least two nodes");
  if (num_knowledge < 1) throw DimensionError("masks need at least one knowledge item");
  MaskPair p;
  p.group = group;
  p.alpha = Tensor::zeros(1, num_edges(num_nodes), true);
  p.beta = Tensor::zeros(num_knowledge, 1, true);
  p.tau = tau;
  return p;
}

Index MaskPair::num_nodes() const {
  // Inverse of V(V-1)/2.
  const auto e = static_cast<double>(alpha.cols());
  return static_cast<Index>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * e)) / 2.0));
}

const MaskPair& MaskSet::pair_for(const std::string& group) const {
  auto it = pairs.find(group);
  if (it == pairs.end()) throw GroupingError("no mask pair for group '" + group + "'");
  return it->second;
}

json to_json(const ExplainConfig& c) {
  return {{"lambdas", {c.lambdas.mask, c.lambdas.clf, c.lambdas.sparsity, c.lambdas.discreteness}},
          {"tau", c.tau},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"batch_size", c.batch_size}};
}

json to_json(const LossComponents& c) {
  return {{"mask", c.mask},
          {"clf", c.clf},
          {"sparsity", c.sparsity},
          {"discreteness", c.discreteness},
          {"total", c.total}};
}

double gumbel_sample(double phi, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw RangeError("temperature must be positive, got " + std::to_string(tau));
  const double g1 = rng.gumbel();
  const double g2 = rng.gumbel();
  const double z = (phi + g1 - g2) / tau;
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

MaskNoise draw_noise(const MaskPair& pair, Rng& rng) {
  MaskNoise n;
  n.edge.resize(1, pair.alpha.cols());
  for (Index i = 0; i < n.edge.size(); ++i) n.edge.data()[i] = rng.gumbel() - rng.gumbel();
  n.knowledge.resize(pair.beta.rows(), 1);
  for (Index i = 0; i < n.knowledge.size(); ++i) n.knowledge.data()[i] = rng.gumbel() - rng.gumbel();
  return n;
}

MaskNoise zero_noise(const MaskPair& pair) {
  return {Matrix::Zero(1, pair.alpha.cols()), Matrix::Zero(pair.beta.rows(), 1)};
}

Tensor relaxed_mask(const Tensor& logits, const Matrix& noise, double tau) {
  if (!(tau > 0.0)) throw RangeError("temperature must be positive");
  if (noise.rows() != logits.rows() || noise.cols() != logits.cols()) {
    throw DimensionError("mask noise does not match logits " + logits.shape_string());
  }
  return sigmoid((logits + Tensor(noise)) * (1.0 / tau));
}

Tensor sample_masked_graph(const Matrix& adjacency, const MaskPair& pair, const MaskNoise& noise) {
  const Index v = adjacency.rows();
  if (adjacency.cols() != v || num_edges(v) != pair.alpha.cols()) {
    throw DimensionError("graph with " + std::to_string(v) + " nodes does not match a mask over " +
                         std::to_string(pair.alpha.cols()) + " edges");
  }
  Tensor m = mirror_upper(relaxed_mask(pair.alpha, noise.edge, pair.tau), v);
  return mul(m, Tensor(adjacency));
}

data::Connectome sample_masked_graph(const data::Connectome& g, const MaskPair& pair, Rng& rng) {
  data::Connectome out = g;
  out.adjacency = sample_masked_graph(g.adjacency, pair, draw_noise(pair, rng)).value();
  return out;
}

model::FusionGraph sample_masked_fusion(const model::FusionGraph& gf, const MaskPair& pair,
                                        const MaskNoise& noise) {
  if (gf.num_knowledge() != pair.beta.rows()) {
    throw DimensionError("fusion graph has N=" + std::to_string(gf.num_knowledge()) +
                         ", knowledge mask has " + std::to_string(pair.beta.rows()) + " entries");
  }
  model::FusionGraph out = gf;
  out.edge_indicator = mul(relaxed_mask(pair.beta, noise.knowledge, pair.tau), gf.edge_indicator);
  return out;
}

model::FusionGraph sample_masked_fusion(const model::FusionGraph& gf, const MaskPair& pair,
                                        Rng& rng) {
  return sample_masked_fusion(gf, pair, draw_noise(pair, rng));
}

ExplainLoss loss_exp(const model::MultimodalModel& frozen, const Matrix& adjacency,
                     const Tensor& e_k, int predicted, int label, const MaskPair& pair,
                     const Lambdas& lambdas, const MaskNoise& noise) {
  Tensor w = sample_masked_graph(adjacency, pair, noise);
  model::FusionGraph gf =
      model::build_fusion_graph(model::embed_graph(frozen, w, adjacency), e_k, frozen);
  gf = sample_masked_fusion(gf, pair, noise);
  Tensor logits = model::fusion_forward(frozen, gf);

  Tensor l_mask = cross_entropy(logits, predicted);
  Tensor l_clf = cross_entropy(logits, label);
  Tensor l_spas = mean(sigmoid(pair.alpha)) + mean(sigmoid(pair.beta));
  Tensor l_disc = mean(binary_entropy_logits(pair.alpha)) + mean(binary_entropy_logits(pair.beta));

  ExplainLoss out;
  out.total = l_mask * lambdas.mask + l_clf * lambdas.clf + l_spas * lambdas.sparsity +
              l_disc * lambdas.discreteness;
  out.parts = {l_mask.item(), l_clf.item(), l_spas.item(), l_disc.item(), out.total.item()};
  if (!std::isfinite(out.parts.total)) throw NumericError("explanation loss is not finite");
  return out;
}

namespace {

int argmax_row(const Matrix& logits) {
  Index best = 0;
  for (Index c = 1; c < logits.cols(); ++c)
    if (logits(0, c) > logits(0, best)) best = c;
  return static_cast<int>(best);
}

}  // namespace

ExplainLoss loss_exp(const model::MultimodalModel& frozen, const data::Connectome& g,
                     const data::KnowledgeBase& kb, const MaskPair& pair, int label,
                     const Lambdas& lambdas, Rng& rng) {
  Tensor e_k;
  int predicted = 0;
  {
    NoGrad guard;
    e_k = model::embed_knowledge(frozen, kb).detach();
    predicted = argmax_row(model::forward(frozen, Tensor(g.adjacency), e_k).value());
  }
  return loss_exp(frozen, g.adjacency, e_k, predicted, label, pair, lambdas, draw_noise(pair, rng));
}

MaskSet learn_masks(const model::MultimodalModel& frozen_in, const data::ConnectomeDataset& ds,
                    const data::KnowledgeBase& kb, const std::vector<std::size_t>& train,
                    const ExplainConfig& cfg) {
  const auto& l = cfg.lambdas;
  if (!(l.mask >= 0 && l.clf >= 0 && l.sparsity >= 0 && l.discreteness >= 0)) {
    throw RangeError("loss weights must be nonnegative");
  }
  if (!(cfg.tau > 0.0)) throw RangeError("temperature must be positive");
  if (cfg.epochs < 0) throw RangeError("epochs must be nonnegative");
  if (!(cfg.learning_rate > 0.0)) throw RangeError("learning rate must be positive");
  if (cfg.batch_size < 1) throw RangeError("batch size must be at least 1");
  model::check_compatible(frozen_in, ds);
  model::check_compatible(frozen_in, kb);

  model::MultimodalModel frozen = frozen_in.clone();
  frozen.set_requires_grad(false);

  MaskSet set;
  set.lambdas = l;
  set.tau = cfg.tau;
  set.seed = cfg.seed;
  set.num_nodes = ds.num_nodes;
  set.num_knowledge = kb.count();

  Tensor e_k;
  {
    NoGrad guard;
    e_k = model::embed_knowledge(frozen, kb).detach();
  }

  for (std::size_t gi = 0; gi < ds.groups.size(); ++gi) {
    const std::string& group = ds.groups[gi];
    std::vector<std::size_t> members;
    for (std::size_t s : train) {
      if (s >= ds.size()) throw ValidationError("training index " + std::to_string(s) + " out of range");
      if (ds.subjects[s].group == group) members.push_back(s);
    }
    if (members.empty()) {
      throw GroupingError("group '" + group + "' has no training subjects");
    }
    std::map<std::size_t, int> predicted;
    {
      NoGrad guard;
      for (std::size_t s : members)
        predicted[s] = argmax_row(model::forward(frozen, Tensor(ds.subjects[s].adjacency), e_k).value());
    }

    MaskPair pair = MaskPair::zeros(group, ds.num_nodes, kb.count(), cfg.tau);
    model::OptimizerConfig oc;
    oc.learning_rate = cfg.learning_rate;
    auto opt = model::make_optimizer({{"alpha", pair.alpha}, {"beta", pair.beta}}, oc);
    auto& history = set.history[group];

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::vector<std::size_t> order = members;
      Rng::keyed(cfg.seed, {0x5ca1ab1eULL, gi, static_cast<std::uint64_t>(epoch)}).shuffle(order);
      LossComponents acc;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        opt->zero_grad();
        Tensor batch;
        for (std::size_t k = start; k < stop; ++k) {
          const std::size_t s = order[k];
          Rng noise_rng = Rng::keyed(cfg.seed, {static_cast<std::uint64_t>(epoch), s});
          ExplainLoss le = loss_exp(frozen, ds.subjects[s].adjacency, e_k, predicted[s],
                                    ds.subjects[s].label, pair, l, draw_noise(pair, noise_rng));
          batch = k == start ? le.total : batch + le.total;
          acc.mask += le.parts.mask;
          acc.clf += le.parts.clf;
          acc.sparsity += le.parts.sparsity;
          acc.discreteness += le.parts.discreteness;
          acc.total += le.parts.total;
        }
        backward(batch * (1.0 / static_cast<double>(stop - start)));
        opt->step();
      }
      const double n = static_cast<double>(order.size());
      history.push_back({acc.mask / n, acc.clf / n, acc.sparsity / n, acc.discreteness / n, acc.total / n});
    }
    pair.alpha.zero_grad();
    pair.beta.zero_grad();
    set.pairs.emplace(group, pair);
  }
  return set;
}

std::vector<RoiScore> roi_importance(const MaskPair& pair, const std::vector<std::string>& atlas,
                                     std::size_t top_k) {
  const Index v = pair.num_nodes();
  if (!atlas.empty() && static_cast<Index>(atlas.size()) != v) {
    throw DimensionError("atlas has " + std::to_string(atlas.size()) + " names for " +
                         std::to_string(v) + " nodes");
  }
  std::vector<double> score(static_cast<std::size_t>(v), 0.0);
  const Matrix& a = pair.alpha.value();
  Index e = 0;
  for (Index i = 0; i < v; ++i) {
    for (Index j = i + 1; j < v; ++j, ++e) {
      const double s = 1.0 / (1.0 + std::exp(-a(0, e)));
      score[static_cast<std::size_t>(i)] += s;
      score[static_cast<std::size_t>(j)] += s;
    }
  }
  std::vector<RoiScore> out;
  for (Index i = 0; i < v; ++i) {
    out.push_back({i, atlas.empty() ? "" : atlas[static_cast<std::size_t>(i)],
                   score[static_cast<std::size_t>(i)], 0});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RoiScore& x, const RoiScore& y) { return x.score > y.score; });
  for (std::size_t r = 0; r < out.size(); ++r) out[r].rank = static_cast<int>(r + 1);
  if (top_k > 0 && top_k < out.size()) out.resize(top_k);
  return out;
}

KnowledgeImportance knowledge_importance(const MaskPair& pair) {
  KnowledgeImportance ki;
  ki.histogram.assign(kHistogramBins, 0);
  const Matrix& b = pair.beta.value();
  for (Index i = 0; i < b.rows(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-b(i, 0)));
    ki.scores.push_back(s);
    const int bin = std::clamp(static_cast<int>(std::floor(s * kHistogramBins)), 0, kHistogramBins - 1);
    ++ki.histogram[static_cast<std::size_t>(bin)];
  }
  return ki;
}

}  // namespace mmgnn::explain
