#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mmgnn/bench/metrics.hpp"
#include "mmgnn/bench/synth.hpp"
#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"
#include "mmgnn/rng.hpp"

namespace mmgnn::bench {

using nlohmann::json;

json to_json(const SynthSpec& s) {
  return {{"subjects_per_class", s.subjects_per_class},
          {"num_nodes", s.num_nodes},
          {"num_knowledge", s.num_knowledge},
          {"knowledge_dim", s.knowledge_dim},
          {"planted_edges", s.planted_edges},
          {"shared_edges", s.shared_edges},
          {"planted_knowledge", s.planted_knowledge},
          {"signal_strength", s.signal_strength},
          {"noise_scale", s.noise_scale},
          {"knowledge_noise", s.knowledge_noise},
          {"groups", s.groups},
          {"feature_mode", data::to_string(s.feature_mode)},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  s.subjects_per_class = j.value("subjects_per_class", s.subjects_per_class);
  s.num_nodes = j.value("num_nodes", s.num_nodes);
  s.num_knowledge = j.value("num_knowledge", s.num_knowledge);
  s.knowledge_dim = j.value("knowledge_dim", s.knowledge_dim);
  s.planted_edges = j.value("planted_edges", s.planted_edges);
  s.shared_edges = j.value("shared_edges", s.shared_edges);
  s.planted_knowledge = j.value("planted_knowledge", s.planted_knowledge);
  s.signal_strength = j.value("signal_strength", s.signal_strength);
  s.noise_scale = j.value("noise_scale", s.noise_scale);
  s.knowledge_noise = j.value("knowledge_noise", s.knowledge_noise);
  s.groups = j.value("groups", s.groups);
  s.feature_mode = data::parse_feature_mode(j.value("feature_mode", data::to_string(s.feature_mode)));
  s.seed = j.value("seed", s.seed);
  return s;
}

json to_json(const GroundTruth& t) {
  json groups = json::object();
  for (const auto& [tag, edges] : t.edges) {
    json list = json::array();
    for (const auto& [i, j] : edges) list.push_back({i, j});
    groups[tag] = list;
  }
  return {{"groups", groups}, {"knowledge", t.knowledge}};
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth t;
  try {
    for (const auto& [tag, list] : j.at("groups").items()) {
      auto& edges = t.edges[tag];
      for (const auto& e : list) {
        auto a = e.at(0).get<Index>();
        auto b = e.at(1).get<Index>();
        edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
    t.knowledge = j.at("knowledge").get<std::vector<Index>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("truth: ") + e.what());
  }
  return t;
}

void save_truth(const GroundTruth& t, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_json(t).dump(2) + "\n");
}

GroundTruth load_truth(const std::filesystem::path& path) {
  try {
    return ground_truth_from_json(json::parse(io::read_file(path)));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Index edge_index(Index i, Index j, Index v) {
  if (i > j) std::swap(i, j);
  if (i == j || i < 0 || j >= v) throw RangeError("edge index out of range");
  return i * v - i * (i + 1) / 2 + (j - i - 1);
}

namespace {

void check_spec(const SynthSpec& s) {
  const Index total_edges = explain::num_edges(s.num_nodes);
  const auto groups = static_cast<Index>(s.groups.size());
  if (s.subjects_per_class < 1) throw RangeError("subjects_per_class must be positive");
  if (s.num_nodes < 2) throw RangeError("num_nodes must be at least 2");
  if (s.num_knowledge < 1 || s.knowledge_dim < 1) throw RangeError("knowledge sizes must be positive");
  if (groups < 1) throw RangeError("at least one group is needed");
  if (std::set<std::string>(s.groups.begin(), s.groups.end()).size() != s.groups.size()) {
    throw RangeError("group names must be distinct");
  }
  if (s.planted_edges < 1 || s.shared_edges < 0 || s.shared_edges > s.planted_edges) {
    throw RangeError("need 1 <= planted_edges and 0 <= shared_edges <= planted_edges");
  }
  if (s.shared_edges + groups * (s.planted_edges - s.shared_edges) > total_edges) {
    throw RangeError("planted edges exceed the " + std::to_string(total_edges) + " available edges");
  }
  if (s.planted_knowledge < 1 || s.planted_knowledge > s.num_knowledge) {
    throw RangeError("planted_knowledge must lie in [1, num_knowledge]");
  }
  if (!(s.signal_strength >= 0.0) || !(s.noise_scale >= 0.0) || !(s.knowledge_noise >= 0.0)) {
    throw RangeError("signal and noise scales must be nonnegative");
  }
}

std::vector<Index> sample_without_replacement(Index n, Index k, Rng& rng) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(k));
  return all;
}

std::pair<Index, Index> edge_pair(Index e, Index v) {
  Index i = 0;
  while (e >= v - i - 1) {
    e -= v - i - 1;
    ++i;
  }
  return {i, i + 1 + e};
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  check_spec(spec);
  const Index v = spec.num_nodes;
  const auto groups = static_cast<Index>(spec.groups.size());
  Rng layout = Rng::keyed(spec.seed, {1});

  // Shared edges first, then each group's distinct extras.
  const Index extras = spec.planted_edges - spec.shared_edges;
  auto chosen = sample_without_replacement(explain::num_edges(v), spec.shared_edges + groups * extras, layout);
  SynthData out;
  std::vector<std::vector<Index>> planted(static_cast<std::size_t>(groups));
  for (Index g = 0; g < groups; ++g) {
    auto& list = planted[static_cast<std::size_t>(g)];
    list.assign(chosen.begin(), chosen.begin() + spec.shared_edges);
    const auto from = chosen.begin() + spec.shared_edges + g * extras;
    list.insert(list.end(), from, from + extras);
    std::sort(list.begin(), list.end());
    auto& truth = out.truth.edges[spec.groups[static_cast<std::size_t>(g)]];
    for (Index e : list) truth.push_back(edge_pair(e, v));
  }

  auto& ds = out.dataset;
  ds.num_nodes = v;
  ds.num_classes = 2;
  ds.groups = spec.groups;
  ds.feature_mode = spec.feature_mode;
  for (Index i = 0; i < v; ++i) {
    ds.atlas.push_back("ROI_" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  }
  Rng weights = Rng::keyed(spec.seed, {2});
  const int per_class = spec.subjects_per_class;
  for (int k = 0; k < 2 * per_class; ++k) {
    data::Connectome s;
    const int label = k < per_class ? 0 : 1;
    const int within = k % per_class;
    const auto g = static_cast<std::size_t>(within % groups);
    s.subject_id = "sub-" + std::string(k < 10 ? "00" : k < 100 ? "0" : "") + std::to_string(k);
    s.label = label;
    s.group = spec.groups[g];
    s.adjacency = Matrix::Zero(v, v);
    Index e = 0;
    for (Index i = 0; i < v; ++i) {
      for (Index j = i + 1; j < v; ++j, ++e) {
        double w = std::abs(weights.normal(0.5, spec.noise_scale));
        if (label == 1 && std::binary_search(planted[g].begin(), planted[g].end(), e)) {
          w += spec.signal_strength;
        }
        s.adjacency(i, j) = w;
        s.adjacency(j, i) = w;
      }
    }
    ds.subjects.push_back(std::move(s));
  }

  Rng know = Rng::keyed(spec.seed, {3});
  const Index d = spec.knowledge_dim;
  Matrix proto(1, d);
  for (Index c = 0; c < d; ++c) proto(0, c) = know.normal();
  proto /= proto.norm();
  auto rows = sample_without_replacement(spec.num_knowledge, spec.planted_knowledge, know);
  std::sort(rows.begin(), rows.end());
  out.truth.knowledge = rows;
  auto& kb = out.knowledge;
  kb.embeddings.resize(spec.num_knowledge, d);
  const double per_coord = spec.knowledge_noise / std::sqrt(static_cast<double>(d));
  for (Index r = 0; r < spec.num_knowledge; ++r) {
    const bool is_planted = std::binary_search(rows.begin(), rows.end(), r);
    for (Index c = 0; c < d; ++c) {
      const double x = (is_planted ? proto(0, c) : 0.0) + know.normal(0.0, per_coord);
      kb.embeddings(r, c) = static_cast<double>(static_cast<float>(x));  // KEMB stores float32
    }
    kb.item_ids.push_back("k" + std::to_string(r));
  }
  kb.trailer_extra = {{"source", "synthetic"}, {"seed", spec.seed}};
  return out;
}

std::map<std::string, Recovery> mask_recovery(const explain::MaskSet& masks, const GroundTruth& truth) {
  if (truth.knowledge.empty()) throw RangeError("ground truth has no planted knowledge rows");
  std::map<std::string, Recovery> out;
  for (const auto& [tag, pair] : masks.pairs) {
    auto it = truth.edges.find(tag);
    if (it == truth.edges.end() || it->second.empty()) {
      throw RangeError("ground truth has no planted edges for group '" + tag + "'");
    }
    const Index v = pair.num_nodes();
    std::vector<bool> edge_pos(static_cast<std::size_t>(pair.alpha.cols()), false);
    for (const auto& [i, j] : it->second) edge_pos[static_cast<std::size_t>(edge_index(i, j, v))] = true;
    std::vector<double> edge_scores;
    for (Index e = 0; e < pair.alpha.cols(); ++e)
      edge_scores.push_back(1.0 / (1.0 + std::exp(-pair.alpha.value()(0, e))));

    std::vector<bool> know_pos(static_cast<std::size_t>(pair.beta.rows()), false);
    for (Index r : truth.knowledge) {
      if (r < 0 || r >= pair.beta.rows()) throw RangeError("planted knowledge row out of range");
      know_pos[static_cast<std::size_t>(r)] = true;
    }
    const auto ki = explain::knowledge_importance(pair);
    out[tag] = {binary_auc(edge_scores, edge_pos), binary_auc(ki.scores, know_pos)};
  }
  return out;
}

}  // namespace mmgnn::bench
