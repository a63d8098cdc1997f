#include <iomanip>
#include <sstream>

#include "mmgnn/errors.hpp"
#include "mmgnn/explain/masks.hpp"
#include "mmgnn/io.hpp"

namespace mmgnn::explain {

using nlohmann::json;

namespace {

std::vector<double> values(const Tensor& t) {
  return std::vector<double>(t.value().data(), t.value().data() + t.size());
}

Tensor from_values(const std::vector<double>& v, Index rows, Index cols) {
  if (static_cast<Index>(v.size()) != rows * cols) {
    throw DimensionError("mask has " + std::to_string(v.size()) + " logits, expected " +
                         std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = v[static_cast<std::size_t>(i)];
  return Tensor(std::move(m));
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt(double x) {
  std::ostringstream o;
  o << std::setprecision(17) << x;
  return o.str();
}

}  // namespace

json to_json(const MaskSet& set) {
  json groups = json::object();
  for (const auto& [tag, pair] : set.pairs) {
    groups[tag] = {{"alpha_logits", values(pair.alpha)}, {"beta_logits", values(pair.beta)}};
  }
  json history = json::object();
  for (const auto& [tag, rows] : set.history) {
    json h = json::array();
    for (const auto& r : rows) h.push_back(to_json(r));
    history[tag] = h;
  }
  return {{"groups", groups},
          {"tau", set.tau},
          {"lambdas", {set.lambdas.mask, set.lambdas.clf, set.lambdas.sparsity, set.lambdas.discreteness}},
          {"threshold", set.threshold},
          {"num_nodes", set.num_nodes},
          {"num_knowledge", set.num_knowledge},
          {"seed", set.seed},
          {"history", history}};
}

MaskSet mask_set_from_json(const json& j) {
  MaskSet set;
  try {
    set.tau = j.at("tau").get<double>();
    const auto l = j.at("lambdas").get<std::vector<double>>();
    if (l.size() != 4) throw FormatError("masks: lambdas must have 4 entries");
    set.lambdas = {l[0], l[1], l[2], l[3]};
    set.threshold = j.value("threshold", 0.5);
    set.num_nodes = j.at("num_nodes").get<Index>();
    set.num_knowledge = j.at("num_knowledge").get<Index>();
    set.seed = j.at("seed").get<std::uint64_t>();
    if (!(set.tau > 0.0)) throw RangeError("masks: tau must be positive");
    for (const auto& [tag, g] : j.at("groups").items()) {
      MaskPair p;
      p.group = tag;
      p.tau = set.tau;
      p.alpha = from_values(g.at("alpha_logits").get<std::vector<double>>(), 1, num_edges(set.num_nodes));
      p.beta = from_values(g.at("beta_logits").get<std::vector<double>>(), set.num_knowledge, 1);
      set.pairs.emplace(tag, std::move(p));
    }
    if (j.contains("history")) {
      for (const auto& [tag, rows] : j.at("history").items()) {
        auto& h = set.history[tag];
        for (const auto& r : rows) {
          h.push_back({r.at("mask").get<double>(), r.at("clf").get<double>(),
                       r.at("sparsity").get<double>(), r.at("discreteness").get<double>(),
                       r.at("total").get<double>()});
        }
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("masks: ") + e.what());
  }
  return set;
}

void save_masks(const MaskSet& set, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_json(set).dump(2) + "\n");
}

MaskSet load_masks(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return mask_set_from_json(j);
}

void export_saliency(const std::vector<RoiScore>& scores, const std::string& group,
                     const std::filesystem::path& json_path, const std::filesystem::path& csv_path) {
  json rows = json::array();
  std::string csv = "node,name,score,rank\n";
  for (const auto& s : scores) {
    rows.push_back({{"node", s.node}, {"name", s.name}, {"score", s.score}, {"rank", s.rank}});
    csv += std::to_string(s.node) + "," + csv_escape(s.name) + "," + fmt(s.score) + "," +
           std::to_string(s.rank) + "\n";
  }
  json doc = {{"group", group}, {"score", "sum of incident sigmoid(alpha)"}, {"rois", rows}};
  io::write_file_atomic(json_path, doc.dump(2) + "\n");
  io::write_file_atomic(csv_path, csv);
}

void export_histogram(const KnowledgeImportance& ki, const std::string& group,
                      const std::filesystem::path& json_path, const std::filesystem::path& csv_path) {
  json bins = json::array();
  std::string csv = "bin_left,bin_right,count\n";
  const auto n = static_cast<double>(ki.histogram.size());
  for (std::size_t b = 0; b < ki.histogram.size(); ++b) {
    const double left = static_cast<double>(b) / n;
    const double right = static_cast<double>(b + 1) / n;
    bins.push_back({{"bin_left", left}, {"bin_right", right}, {"count", ki.histogram[b]}});
    csv += fmt(left) + "," + fmt(right) + "," + std::to_string(ki.histogram[b]) + "\n";
  }
  json doc = {{"group", group}, {"num_items", ki.scores.size()}, {"bins", bins}, {"scores", ki.scores}};
  io::write_file_atomic(json_path, doc.dump(2) + "\n");
  io::write_file_atomic(csv_path, csv);
}

}  // namespace mmgnn::explain
