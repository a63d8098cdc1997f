#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mmgnn/bench/evaluate.hpp"
#include "mmgnn/bench/metrics.hpp"
#include "mmgnn/bench/synth.hpp"
#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"
#include "test_util.hpp"

namespace mmgnn::bench {
namespace {

using testing::TempDir;

// Asymptotic two-sample Kolmogorov-Smirnov p-value.
double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) q += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(q, 0.0, 1.0);
}

TEST(KsOracle, SanityOnShiftedSamples) {
  Rng rng(1);
  std::vector<double> a, b, c;
  for (int i = 0; i < 2000; ++i) {
    a.push_back(rng.normal());
    b.push_back(rng.normal());
    c.push_back(rng.normal() + 0.3);
  }
  EXPECT_GT(ks_two_sample_p(a, b), 0.01);
  EXPECT_LT(ks_two_sample_p(a, c), 1e-6);
}

TEST(Synth, DefaultSpecIsDeterministic) {
  TempDir dir;
  const SynthSpec spec;
  const auto a = generate(spec);
  const auto b = generate(spec);
  save_dataset(a.dataset, dir / "a.jsonl");
  save_dataset(b.dataset, dir / "b.jsonl");
  EXPECT_EQ(io::read_file(dir / "a.jsonl"), io::read_file(dir / "b.jsonl"));
  EXPECT_EQ(data::serialize_knowledge(a.knowledge), data::serialize_knowledge(b.knowledge));
  EXPECT_EQ(to_json(a.truth), to_json(b.truth));
  auto other = spec;
  other.seed += 1;
  EXPECT_NE(data::serialize_knowledge(generate(other).knowledge), data::serialize_knowledge(a.knowledge));
}

TEST(Synth, ShapesAndLabelCounts) {
  const SynthSpec spec;
  const auto d = generate(spec);
  EXPECT_EQ(d.dataset.num_nodes, 16);
  EXPECT_EQ(d.knowledge.count(), 64);
  EXPECT_EQ(d.knowledge.dim(), 32);
  std::map<int, int> per_class;
  for (const auto& s : d.dataset.subjects) ++per_class[s.label];
  EXPECT_EQ(per_class[0], 40);
  EXPECT_EQ(per_class[1], 40);
  EXPECT_EQ(d.truth.knowledge.size(), 8u);
  for (const auto& g : spec.groups) {
    const auto& edges = d.truth.edges.at(g);
    EXPECT_EQ(edges.size(), 8u);
    for (auto [i, j] : edges) EXPECT_LT(i, j);
  }
  std::set<std::pair<Index, Index>> f(d.truth.edges.at("female").begin(), d.truth.edges.at("female").end());
  std::size_t shared = 0;
  for (auto e : d.truth.edges.at("male")) shared += f.count(e);
  EXPECT_EQ(shared, 4u);
  data::validate(d.dataset);
}

TEST(Synth, ZeroSignalLeavesPlantedEdgesIndistinguishable) {
  SynthSpec spec;
  spec.signal_strength = 0.0;
  spec.subjects_per_class = 100;
  const auto d = generate(spec);
  std::vector<double> planted, other;
  for (const auto& s : d.dataset.subjects) {
    const auto& edges = d.truth.edges.at(s.group);
    std::set<std::pair<Index, Index>> set(edges.begin(), edges.end());
    for (Index i = 0; i < spec.num_nodes; ++i)
      for (Index j = i + 1; j < spec.num_nodes; ++j)
        (set.count({i, j}) ? planted : other).push_back(s.adjacency(i, j));
  }
  EXPECT_GT(ks_two_sample_p(planted, other), 0.01);

  spec.signal_strength = 0.4;
  const auto shifted = generate(spec);
  std::vector<double> p1, o1;
  for (const auto& s : shifted.dataset.subjects) {
    if (s.label != 1) continue;
    const auto& edges = shifted.truth.edges.at(s.group);
    std::set<std::pair<Index, Index>> set(edges.begin(), edges.end());
    for (Index i = 0; i < spec.num_nodes; ++i)
      for (Index j = i + 1; j < spec.num_nodes; ++j)
        (set.count({i, j}) ? p1 : o1).push_back(s.adjacency(i, j));
  }
  EXPECT_LT(ks_two_sample_p(p1, o1), 1e-6);
}

TEST(Synth, InconsistentSpecIsRangeError) {
  SynthSpec spec;
  spec.planted_edges = 200;
  EXPECT_THROW(generate(spec), RangeError);
  spec = SynthSpec{};
  spec.planted_knowledge = 65;
  EXPECT_THROW(generate(spec), RangeError);
  spec = SynthSpec{};
  spec.shared_edges = 9;
  EXPECT_THROW(generate(spec), RangeError);
}

TEST(Synth, SpecAndTruthRoundTrip) {
  TempDir dir;
  SynthSpec spec;
  spec.groups = {"a", "b", "c"};
  spec.signal_strength = 0.25;
  EXPECT_EQ(to_json(synth_spec_from_json(to_json(spec))), to_json(spec));
  const auto d = generate(spec);
  save_truth(d.truth, dir / "truth.json");
  EXPECT_EQ(to_json(load_truth(dir / "truth.json")), to_json(d.truth));
  const auto raw = nlohmann::json::parse(io::read_file(dir / "truth.json"));
  EXPECT_TRUE(raw.at("groups").at("a").at(0).is_array());
}

TEST(Metrics, HandExamples) {
  EXPECT_NEAR(accuracy({1, 0, 1}, {1, 0, 0}), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(binary_auc({0.9, 0.8, 0.1, 0.2}, {true, true, false, false}), 1.0);
  EXPECT_NEAR(macro_f1({1, 1, 0, 0}, {1, 0, 1, 0}, 2), 0.5, 1e-15);
  EXPECT_EQ(binary_auc({0.3, 0.3, 0.3}, {true, false, true}), 0.5);
  EXPECT_THROW(binary_auc({0.1, 0.2}, {true, true}), RangeError);
}

TEST(Metrics, AucInvariantUnderMonotoneTransform) {
  Rng rng(2);
  std::vector<double> s, t;
  std::vector<bool> pos;
  for (int i = 0; i < 300; ++i) {
    const double x = std::round(rng.normal() * 4.0) / 4.0;  // includes ties
    s.push_back(x);
    t.push_back(std::exp(3.0 * x) - 7.0);
    pos.push_back(rng.uniform() < 0.4 + 0.1 * x);
  }
  EXPECT_EQ(binary_auc(s, pos), binary_auc(t, pos));
}

TEST(Metrics, PerfectClassifier) {
  Predictions p;
  p.labels = {0, 1, 1, 0, 1};
  p.predicted = p.labels;
  p.probabilities.resize(5, 2);
  for (Index i = 0; i < 5; ++i) {
    const double q = p.labels[static_cast<std::size_t>(i)] ? 0.8 + 0.01 * i : 0.1 + 0.01 * i;
    p.probabilities(i, 1) = q;
    p.probabilities(i, 0) = 1.0 - q;
  }
  const Metrics m = compute_metrics(p);
  EXPECT_EQ(m.acc, 1.0);
  EXPECT_EQ(m.auc, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  p.labels = {1, 1, 1, 1, 1};
  EXPECT_THROW(compute_metrics(p), RangeError);
}

TEST(Evaluate, ModelOnBenchmark) {
  const auto d = generate(testing::small_spec());
  const auto m = model::MultimodalModel::init(testing::small_config(
      gnn::Arch::kGcn, d.dataset.num_nodes, d.knowledge.dim(), d.dataset.feature_mode));
  std::vector<std::size_t> all(d.dataset.size());
  std::iota(all.begin(), all.end(), 0);
  const Metrics a = evaluate(m, d.dataset, d.knowledge, all, 1);
  const Metrics b = evaluate(m, d.dataset, d.knowledge, all, 2);
  EXPECT_EQ(to_json(a), to_json(b));
  for (double v : {a.acc, a.auc, a.f1}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  std::vector<std::size_t> one_class;
  for (std::size_t i : all)
    if (d.dataset.subjects[i].label == 0) one_class.push_back(i);
  EXPECT_THROW(evaluate(m, d.dataset, d.knowledge, one_class), RangeError);
  EXPECT_THROW(evaluate(m, d.dataset, d.knowledge, {}), RangeError);
}

explain::MaskSet masks_for(const GroundTruth& truth, Index v, Index n) {
  explain::MaskSet set;
  set.num_nodes = v;
  set.num_knowledge = n;
  for (const auto& [g, edges] : truth.edges) set.pairs.emplace(g, explain::MaskPair::zeros(g, v, n, 0.5));
  return set;
}

TEST(Recovery, PerfectAndConstantMasks) {
  const SynthSpec spec;
  const auto d = generate(spec);
  auto set = masks_for(d.truth, spec.num_nodes, spec.num_knowledge);
  for (const auto& [g, r] : mask_recovery(set, d.truth)) {
    EXPECT_EQ(r.edge_auc, 0.5);
    EXPECT_EQ(r.knowledge_auc, 0.5);
  }
  for (auto& [g, pair] : set.pairs) {
    pair.alpha = Tensor(Matrix::Constant(1, pair.alpha.cols(), -50.0));
    for (auto [i, j] : d.truth.edges.at(g)) pair.alpha.mutable_value()(0, edge_index(i, j, spec.num_nodes)) = 50.0;
    pair.beta = Tensor(Matrix::Constant(spec.num_knowledge, 1, -50.0));
    for (Index k : d.truth.knowledge) pair.beta.mutable_value()(k, 0) = 50.0;
  }
  for (const auto& [g, r] : mask_recovery(set, d.truth)) {
    EXPECT_EQ(r.edge_auc, 1.0);
    EXPECT_EQ(r.knowledge_auc, 1.0);
  }
}

TEST(Recovery, RandomMasksAverageOneHalf) {
  const SynthSpec spec;
  const auto d = generate(spec);
  auto set = masks_for(d.truth, spec.num_nodes, spec.num_knowledge);
  Rng rng(3);
  double edge = 0.0, know = 0.0;
  int count = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    for (auto& [g, pair] : set.pairs) {
      pair.alpha = Tensor(testing::random_matrix(1, pair.alpha.cols(), rng));
      pair.beta = Tensor(testing::random_matrix(spec.num_knowledge, 1, rng));
    }
    for (const auto& [g, r] : mask_recovery(set, d.truth)) {
      edge += r.edge_auc;
      know += r.knowledge_auc;
      ++count;
    }
  }
  EXPECT_NEAR(edge / count, 0.5, 0.03);
  EXPECT_NEAR(know / count, 0.5, 0.03);
}

TEST(Recovery, EdgeIndexIsRowMajorUpperTriangle) {
  EXPECT_EQ(edge_index(0, 1, 4), 0);
  EXPECT_EQ(edge_index(0, 3, 4), 2);
  EXPECT_EQ(edge_index(1, 2, 4), 3);
  EXPECT_EQ(edge_index(2, 3, 4), 5);
}

}  // namespace
}  // namespace mmgnn::bench
