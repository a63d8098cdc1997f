#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmgnn/data/dataset.hpp"
#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"

namespace mmgnn::data {

using nlohmann::json;

FeatureMode parse_feature_mode(const std::string& name) {
  if (name == "identity") return FeatureMode::kIdentity;
  if (name == "profile") return FeatureMode::kProfile;
  throw ValidationError("unknown feature mode '" + name + "' (expected identity or profile)");
}

std::string to_string(FeatureMode mode) {
  return mode == FeatureMode::kIdentity ? "identity" : "profile";
}

int ConnectomeDataset::group_index(const std::string& group) const {
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i] == group) return static_cast<int>(i);
  return -1;
}

namespace {

[[noreturn]] void fail(const std::string& subject, const std::string& reason) {
  throw ValidationError("subject '" + subject + "': " + reason);
}

void validate_subject(const ConnectomeDataset& ds, const Connectome& s) {
  const Matrix& w = s.adjacency;
  if (w.rows() != ds.num_nodes || w.cols() != ds.num_nodes) {
    fail(s.subject_id, "has " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                           " adjacency, dataset declares " + std::to_string(ds.num_nodes) +
                           " nodes");
  }
  for (Index i = 0; i < w.rows(); ++i) {
    if (w(i, i) != 0.0) fail(s.subject_id, "nonzero diagonal at node " + std::to_string(i));
    for (Index j = 0; j < w.cols(); ++j) {
      const double x = w(i, j);
      if (!std::isfinite(x)) {
        fail(s.subject_id, "non-finite weight at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (x < 0.0) {
        fail(s.subject_id, "negative weight at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (j > i && std::abs(x - w(j, i)) > 1e-12 * std::max(1.0, std::abs(x))) {
        fail(s.subject_id, "asymmetric adjacency: W[" + std::to_string(i) + "][" +
                               std::to_string(j) + "] != W[" + std::to_string(j) + "][" +
                               std::to_string(i) + "]");
      }
    }
  }
  if (s.label < 0 || s.label >= ds.num_classes) {
    fail(s.subject_id, "label " + std::to_string(s.label) + " outside [0," +
                           std::to_string(ds.num_classes) + ")");
  }
  if (ds.group_index(s.group) < 0) fail(s.subject_id, "unknown group '" + s.group + "'");
}

}  // namespace

void validate(const ConnectomeDataset& ds) {
  if (ds.num_nodes < 1) throw ValidationError("dataset declares no nodes");
  if (ds.num_classes < 2) throw ValidationError("dataset needs at least 2 classes");
  if (ds.groups.empty()) throw ValidationError("dataset declares no groups");
  if (!ds.atlas.empty() && static_cast<Index>(ds.atlas.size()) != ds.num_nodes) {
    throw ValidationError("atlas has " + std::to_string(ds.atlas.size()) + " names for " +
                          std::to_string(ds.num_nodes) + " nodes");
  }
  std::set<std::string> seen;
  for (const auto& s : ds.subjects) {
    if (!seen.insert(s.subject_id).second) fail(s.subject_id, "duplicate subject_id");
    validate_subject(ds, s);
  }
}

ConnectomeDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  ConnectomeDataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", std::string()) != kDatasetFormat) {
          throw FormatError(path.string() + ": header format must be \"" + kDatasetFormat + "\"");
        }
        ds.num_nodes = j.at("num_nodes").get<Index>();
        ds.num_classes = j.at("num_classes").get<int>();
        ds.groups = j.at("groups").get<std::vector<std::string>>();
        if (j.contains("atlas")) ds.atlas = j.at("atlas").get<std::vector<std::string>>();
        if (j.contains("feature_mode"))
          ds.feature_mode = parse_feature_mode(j.at("feature_mode").get<std::string>());
        have_header = true;
        continue;
      }
      Connectome s;
      s.subject_id = j.at("subject_id").get<std::string>();
      s.label = j.at("label").get<int>();
      s.group = j.at("group").get<std::string>();
      const auto& adj = j.at("adjacency");
      const auto expected = static_cast<std::size_t>(ds.num_nodes * ds.num_nodes);
      if (!adj.is_array() || adj.size() != expected) {
        fail(s.subject_id, "adjacency has " + std::to_string(adj.size()) + " entries, expected " +
                               std::to_string(expected));
      }
      s.adjacency.resize(ds.num_nodes, ds.num_nodes);
      for (std::size_t k = 0; k < expected; ++k) s.adjacency.data()[k] = adj[k].get<double>();
      ds.subjects.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError(path.string() + ": missing header line");
  validate(ds);
  return ds;
}

void save_dataset(const ConnectomeDataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  json header = {{"format", kDatasetFormat},
                 {"num_nodes", ds.num_nodes},
                 {"num_classes", ds.num_classes},
                 {"groups", ds.groups},
                 {"feature_mode", to_string(ds.feature_mode)}};
  if (!ds.atlas.empty()) header["atlas"] = ds.atlas;
  out << header.dump() << '\n';
  for (const auto& s : ds.subjects) {
    json rec = {{"subject_id", s.subject_id}, {"label", s.label}, {"group", s.group}};
    rec["adjacency"] = std::vector<double>(s.adjacency.data(), s.adjacency.data() + s.adjacency.size());
    out << rec.dump() << '\n';
  }
  io::write_file_atomic(path, out.str());
}

Matrix node_features(const Matrix& adjacency, FeatureMode mode) {
  if (mode == FeatureMode::kIdentity) return Matrix::Identity(adjacency.rows(), adjacency.rows());
  return adjacency;
}

}  // namespace mmgnn::data
