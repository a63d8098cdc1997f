#include <bit>
#include <cstring>
#include <map>

#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"
#include "mmgnn/model/checkpoint.hpp"

namespace mmgnn::model {

using nlohmann::json;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos, const std::string& origin) {
  if (in.size() < pos + 8) throw FormatError(origin + ": truncated params file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace

std::string serialize_params(const NamedTensors& params) {
  std::string out;
  for (const auto& [name, t] : params) {
    put_u64(out, name.size());
    out += name;
    put_u64(out, 2);
    put_u64(out, static_cast<std::uint64_t>(t.rows()));
    put_u64(out, static_cast<std::uint64_t>(t.cols()));
    for (Index i = 0; i < t.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(t.value().data()[i]));
  }
  return out;
}

NamedTensors parse_params(const std::string& bytes, const std::string& origin) {
  NamedTensors out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto len = get_u64(bytes, pos, origin);
    if (bytes.size() - pos < len) throw FormatError(origin + ": truncated tensor name");
    std::string name = bytes.substr(pos, len);
    pos += len;
    const auto rank = get_u64(bytes, pos, origin);
    if (rank < 1 || rank > 2) {
      throw FormatError(origin + ": tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    }
    std::uint64_t rows = get_u64(bytes, pos, origin);
    std::uint64_t cols = 1;
    if (rank == 2) cols = get_u64(bytes, pos, origin);
    if (rows != 0 && cols > (bytes.size() - pos) / 8 / rows) {
      throw FormatError(origin + ": tensor '" + name + "' payload is truncated");
    }
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_u64(bytes, pos, origin));
    out.emplace_back(std::move(name), Tensor(std::move(m)));
  }
  return out;
}

void save_checkpoint(const MultimodalModel& m, const std::filesystem::path& dir,
                     const json& extra) {
  std::filesystem::create_directories(dir);
  const std::string params = serialize_params(m.parameters());
  json manifest = extra.is_object() ? extra : json::object();
  manifest["format"] = kCheckpointFormat;
  manifest["format_version"] = kCheckpointVersion;
  manifest["arch"] = gnn::to_string(m.config.arch);
  manifest["dims"] = {{"d_in", m.config.input_dim()},
                      {"d_hidden", m.config.hidden},
                      {"d_f", m.config.fusion_dim},
                      {"num_classes", m.config.num_classes},
                      {"knowledge_dim", m.config.knowledge_dim},
                      {"num_nodes", m.config.num_nodes}};
  manifest["model"] = to_json(m.config);
  manifest["seed"] = m.config.seed;
  manifest["params_sha256"] = io::sha256_hex(params);
  manifest["num_parameters"] = m.num_parameters();
  io::write_file_atomic(dir / "params.bin", params);
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw ValidationError("no checkpoint manifest at " + manifest_path.string());
  }
  Checkpoint ck;
  ModelConfig config;
  try {
    ck.manifest = json::parse(io::read_file(manifest_path));
    if (ck.manifest.value("format", std::string()) != kCheckpointFormat) {
      throw FormatError(manifest_path.string() + ": not an mmgnn checkpoint");
    }
    if (ck.manifest.at("format_version").get<int>() != kCheckpointVersion) {
      throw FormatError(manifest_path.string() + ": unsupported checkpoint version");
    }
    config = model_config_from_json(ck.manifest.at("model"));
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  ck.model = MultimodalModel::init(config);
  const auto params_path = dir / "params.bin";
  const std::string bytes = io::read_file(params_path);
  if (ck.manifest.contains("params_sha256") &&
      ck.manifest["params_sha256"].get<std::string>() != io::sha256_hex(bytes)) {
    throw FormatError(params_path.string() + ": content hash does not match manifest");
  }
  std::map<std::string, Tensor> stored;
  for (auto& [name, t] : parse_params(bytes, params_path.string())) stored.emplace(name, t);
  auto refs = ck.model.parameter_refs();
  if (refs.size() != stored.size()) {
    throw DimensionError(params_path.string() + ": holds " + std::to_string(stored.size()) +
                         " tensors, architecture needs " + std::to_string(refs.size()));
  }
  for (auto& [name, t] : refs) {
    auto it = stored.find(name);
    if (it == stored.end()) throw DimensionError(params_path.string() + ": missing tensor '" + name + "'");
    if (it->second.rows() != t->rows() || it->second.cols() != t->cols()) {
      throw DimensionError(params_path.string() + ": tensor '" + name + "' is " +
                           it->second.shape_string() + ", expected " + t->shape_string());
    }
    *t = Tensor(it->second.value());
  }
  return ck;
}

}  // namespace mmgnn::model
