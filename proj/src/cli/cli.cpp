#include "mmgnn/cli/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>

#include "mmgnn/augment/augment.hpp"
#include "mmgnn/bench/evaluate.hpp"
#include "mmgnn/bench/synth.hpp"
#include "mmgnn/errors.hpp"
#include "mmgnn/explain/masks.hpp"
#include "mmgnn/io.hpp"
#include "mmgnn/model/checkpoint.hpp"
#include "mmgnn/model/train.hpp"

namespace mmgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRunManifestFormat = "mmgnn-run-v1";

// ---------------------------------------------------------------------------
// --config handling: keys of the JSON object are long flag names; a key is
// used only when the flag does not appear on the command line.

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string scalar_token(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!cfg.is_object()) throw FormatError(path + ": config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (key == "config" || has_flag(args, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      args.push_back(flag);
      for (const auto& v : value) args.push_back(scalar_token(v));
    } else if (!value.is_null()) {
      args.push_back(flag);
      args.push_back(scalar_token(value));
    }
  }
  return args;
}

// Numeric tokens become JSON numbers; anything else stays a string.
json typed_value(const std::string& token) {
  const json v = json::parse(token, nullptr, false);
  if (!v.is_discarded() && v.is_number()) return v;
  return token;
}

// Every long option of a subcommand with its effective value; suitable as a
// --config file for a rerun.
json options_json(const CLI::App& sub) {
  json out = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      out[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values;
    if (opt->count() > 0) {
      values = opt->results();
    } else if (!opt->get_default_str().empty()) {
      values = {opt->get_default_str()};
    }
    if (values.empty()) continue;
    if (opt->get_expected_max() > 1) {
      // Vector options: split a "[a,b]" default into elements.
      json flat = json::array();
      for (auto v : values) {
        if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
        std::size_t start = 0;
        while (start <= v.size()) {
          const auto comma = v.find(',', start);
          const auto piece = v.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
          if (!piece.empty()) flat.push_back(typed_value(piece));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
      }
      out[name] = flat;
    } else {
      out[name] = typed_value(values.back());
    }
  }
  return out;
}

std::string hash_or_empty(const fs::path& p) {
  return fs::exists(p) ? io::sha256_file(p) : std::string();
}

std::string absolute_string(const std::string& p) {
  return fs::absolute(fs::path(p)).lexically_normal().string();
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunInfo {
  std::string command;
  json config;
  json seeds = json::object();
  std::map<std::string, std::string> inputs;  // role -> path
  json formats = json::object();
  json metrics = json::object();
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
};

void write_run_manifest(const RunInfo& info, const fs::path& path) {
  json inputs = json::object();
  for (const auto& [role, p] : info.inputs) {
    inputs[role] = {{"path", absolute_string(p)}, {"sha256", hash_or_empty(p)}};
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - info.t0).count();
  json doc = {{"format", kRunManifestFormat},
              {"command", info.command},
              {"config", info.config},
              {"seeds", info.seeds},
              {"inputs", inputs},
              {"formats", info.formats},
              {"metrics", info.metrics},
              {"started_at", utc_timestamp(info.started)},
              {"wall_clock_seconds", seconds}};
  io::write_file_atomic(path, doc.dump(2) + "\n");
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

fs::path file_manifest_path(const std::string& out_file, const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  return fs::path(out_file + ".run.json");
}

// ---------------------------------------------------------------------------
// Shared loading.

struct Inputs {
  data::ConnectomeDataset ds;
  data::KnowledgeBase kb;
  std::string data_path;
  std::string kemb_path;
};

Inputs load_inputs(const std::string& data_path, const std::string& kemb_path) {
  Inputs in;
  in.data_path = data_path;
  in.kemb_path = kemb_path;
  in.ds = data::load_dataset(data_path);
  in.kb = data::load_knowledge(kemb_path);
  return in;
}

struct LoadedCheckpoint {
  model::Checkpoint ck;
  Inputs inputs;
  data::Split split;
};

LoadedCheckpoint load_for_checkpoint(const std::string& dir, const std::string& data_override,
                                     const std::string& kemb_override) {
  LoadedCheckpoint lc;
  lc.ck = model::load_checkpoint(dir);
  const json& d = lc.ck.manifest.contains("data") ? lc.ck.manifest["data"] : json::object();
  const std::string data_path = !data_override.empty() ? data_override : d.value("dataset", std::string());
  const std::string kemb_path = !kemb_override.empty() ? kemb_override : d.value("kemb", std::string());
  if (data_path.empty() || kemb_path.empty()) {
    throw ValidationError("checkpoint does not record its inputs; pass --data and --kemb");
  }
  lc.inputs = load_inputs(data_path, kemb_path);
  model::check_compatible(lc.ck.model, lc.inputs.ds);
  model::check_compatible(lc.ck.model, lc.inputs.kb);
  lc.split = data::load_split(fs::path(dir) / "split.json", lc.inputs.ds.size());
  return lc;
}

json data_block(const Inputs& in) {
  return {{"dataset", absolute_string(in.data_path)},
          {"dataset_sha256", io::sha256_file(in.data_path)},
          {"kemb", absolute_string(in.kemb_path)},
          {"kemb_sha256", io::sha256_file(in.kemb_path)}};
}

json history_json(const std::vector<model::EpochRecord>& h) {
  json out = json::array();
  for (const auto& r : h) out.push_back(model::to_json(r));
  return out;
}

json split_metrics(const model::MultimodalModel& m, const Inputs& in, const data::Split& split,
                   int threads) {
  json out = json::object();
  for (const char* name : {"train", "val", "test"}) {
    const auto idx = data::partition(split, name, in.ds.size());
    try {
      out[name] = bench::to_json(bench::evaluate(m, in.ds, in.kb, idx, threads));
    } catch (const RangeError&) {
      out[name] = nullptr;  // single-class partition: metrics undefined
    }
  }
  return out;
}

std::function<void(const model::EpochRecord&)> epoch_logger(std::ostream& err, int every,
                                                            const std::string& tag) {
  if (every <= 0) return {};
  return [&err, every, tag](const model::EpochRecord& r) {
    if (r.epoch % every != 0) return;
    err << tag << " epoch " << r.epoch << " train_loss " << r.train_loss << " train_acc "
        << r.train.acc << " val_loss " << r.val_loss << " val_acc " << r.val.acc << "\n";
  };
}

// Writes the checkpoint plus split/history/metrics side files.
void write_training_outputs(const fs::path& dir, const model::MultimodalModel& m, json manifest_extra,
                            const data::Split& split, const model::TrainResult& result,
                            const json& metrics) {
  manifest_extra["best_epoch"] = result.best_epoch;
  manifest_extra["split_file"] = "split.json";
  model::save_checkpoint(m, dir, manifest_extra);
  data::save_split(split, dir / "split.json");
  io::write_file_atomic(dir / "history.json", history_json(result.history).dump(2) + "\n");
  io::write_file_atomic(dir / "metrics.json", metrics.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Subcommands.

struct SynthOpts {
  std::string out;
  bench::SynthSpec spec;
  std::string feature_mode = "profile";
  std::string manifest;
};

int do_synth(const SynthOpts& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  RunInfo info;
  info.command = "synth";
  info.config = options_json(sub);
  bench::SynthSpec spec = o.spec;
  spec.feature_mode = data::parse_feature_mode(o.feature_mode);
  info.seeds["seed"] = spec.seed;
  const auto synth = bench::generate(spec);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  data::save_dataset(synth.dataset, dir / "ds.jsonl");
  data::save_knowledge(synth.knowledge, dir / "kb.kemb");
  bench::save_truth(synth.truth, dir / "truth.json");
  io::write_file_atomic(dir / "spec.json", bench::to_json(spec).dump(2) + "\n");
  info.formats = {{"dataset", data::kDatasetFormat}, {"kemb", data::kKembVersion}};
  const json result = {{"dataset", (dir / "ds.jsonl").string()},
                       {"kemb", (dir / "kb.kemb").string()},
                       {"truth", (dir / "truth.json").string()},
                       {"subjects", synth.dataset.size()},
                       {"num_nodes", synth.dataset.num_nodes},
                       {"num_knowledge", synth.knowledge.count()},
                       {"knowledge_dim", synth.knowledge.dim()}};
  info.metrics = result;
  write_run_manifest(info, o.manifest.empty() ? dir / "run_manifest.json" : fs::path(o.manifest));
  err << "synth: wrote " << synth.dataset.size() << " subjects and " << synth.knowledge.count()
      << " knowledge rows to " << dir.string() << "\n";
  emit(out, result);
  return kExitOk;
}

struct PretrainOpts {
  std::string data;
  std::string kemb;
  std::string out;
  std::string arch = "gcn";
  std::uint64_t seed = 0;
  std::string split_file;
  std::int64_t split_seed = -1;
  std::vector<double> ratios{0.7, 0.1, 0.2};
  std::string stratify = "label";
  model::TrainConfig train;
  std::string optimizer = "adam";
  model::ModelConfig model;
  int log_every = 10;
  std::string manifest;
};

int do_pretrain(const PretrainOpts& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  RunInfo info;
  info.command = "pretrain";
  info.config = options_json(sub);
  info.inputs = {{"dataset", o.data}, {"kemb", o.kemb}};
  Inputs in = load_inputs(o.data, o.kemb);

  data::Split split;
  if (!o.split_file.empty()) {
    info.inputs["split"] = o.split_file;
    split = data::load_split(o.split_file, in.ds.size());
  } else {
    if (o.ratios.size() != 3) throw RangeError("--ratios needs three values");
    const std::uint64_t split_seed = o.split_seed < 0 ? o.seed : static_cast<std::uint64_t>(o.split_seed);
    split = data::split_dataset(in.ds, {o.ratios[0], o.ratios[1], o.ratios[2]}, split_seed,
                                data::parse_stratify(o.stratify));
  }

  model::ModelConfig mc = o.model;
  mc.arch = gnn::parse_arch(o.arch);
  mc.feature_mode = in.ds.feature_mode;
  mc.num_nodes = in.ds.num_nodes;
  mc.num_classes = in.ds.num_classes;
  mc.knowledge_dim = in.kb.dim();
  mc.seed = o.seed;
  model::TrainConfig tc = o.train;
  tc.seed = o.seed;
  tc.optimizer = model::parse_optimizer(o.optimizer);
  tc.on_epoch = epoch_logger(err, o.log_every, "pretrain");
  info.seeds = {{"seed", o.seed}, {"split_seed", split.seed}};

  const auto init = model::MultimodalModel::init(mc);
  const auto result = model::pretrain(init, in.ds, in.kb, split, tc);
  const json metrics = split_metrics(result.model, in, split, tc.threads);

  json extra = {{"stage", "pretrain"},
                {"config", model::to_json(tc)},
                {"data", data_block(in)}};
  const fs::path dir(o.out);
  write_training_outputs(dir, result.model, extra, split, result, metrics);
  const json summary = {{"checkpoint", dir.string()}, {"best_epoch", result.best_epoch}, {"metrics", metrics}};
  info.metrics = summary;
  info.formats = {{"checkpoint", model::kCheckpointVersion}};
  write_run_manifest(info, o.manifest.empty() ? dir / "run_manifest.json" : fs::path(o.manifest));
  emit(out, summary);
  return kExitOk;
}

struct ExplainOpts {
  std::string ckpt;
  std::string out;
  std::string data;
  std::string kemb;
  explain::ExplainConfig cfg;
  std::vector<double> lambdas{1.0, 1.0, 0.5, 0.1};
  double threshold = 0.5;
  std::string manifest;
};

int do_explain(const ExplainOpts& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  RunInfo info;
  info.command = "explain";
  info.config = options_json(sub);
  auto lc = load_for_checkpoint(o.ckpt, o.data, o.kemb);
  info.inputs = {{"checkpoint_params", (fs::path(o.ckpt) / "params.bin").string()},
                 {"dataset", lc.inputs.data_path},
                 {"kemb", lc.inputs.kemb_path}};
  if (o.lambdas.size() != 4) throw RangeError("--lambdas needs four values");
  explain::ExplainConfig cfg = o.cfg;
  cfg.lambdas = {o.lambdas[0], o.lambdas[1], o.lambdas[2], o.lambdas[3]};
  if (!(o.threshold > 0.0 && o.threshold < 1.0)) throw RangeError("--threshold must lie in (0, 1)");
  info.seeds = {{"seed", cfg.seed}};

  const std::string before = lc.ck.model.checksum();
  explain::MaskSet set = explain::learn_masks(lc.ck.model, lc.inputs.ds, lc.inputs.kb, lc.split.train, cfg);
  set.threshold = o.threshold;
  if (lc.ck.model.checksum() != before) throw ContractError("mask learning modified the model");
  explain::save_masks(set, o.out);

  json groups = json::object();
  for (const auto& [tag, pair] : set.pairs) {
    const auto& h = set.history[tag];
    groups[tag] = {{"mean_sigma_alpha", sigmoid(pair.alpha).value().mean()},
                   {"mean_sigma_beta", sigmoid(pair.beta).value().mean()},
                   {"final_loss", h.empty() ? json(nullptr) : explain::to_json(h.back())}};
    err << "explain: group " << tag << " done\n";
  }
  const json summary = {{"masks", o.out}, {"model_checksum", before}, {"groups", groups}};
  info.metrics = summary;
  info.formats = {{"masks", "masks-json-v1"}};
  write_run_manifest(info, file_manifest_path(o.out, o.manifest));
  emit(out, summary);
  return kExitOk;
}

struct FinetuneOpts {
  std::string ckpt;
  std::string masks;
  std::string out;
  std::string data;
  std::string kemb;
  augment::AugmentConfig cfg;
  std::string optimizer = "adam";
  int log_every = 10;
  std::string manifest;
};

int do_finetune(const FinetuneOpts& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  RunInfo info;
  info.command = "finetune";
  info.config = options_json(sub);
  auto lc = load_for_checkpoint(o.ckpt, o.data, o.kemb);
  const auto masks = explain::load_masks(o.masks);
  info.inputs = {{"checkpoint_params", (fs::path(o.ckpt) / "params.bin").string()},
                 {"masks", o.masks},
                 {"dataset", lc.inputs.data_path},
                 {"kemb", lc.inputs.kemb_path}};
  augment::AugmentConfig cfg = o.cfg;
  cfg.optimizer = model::parse_optimizer(o.optimizer);
  cfg.on_epoch = epoch_logger(err, o.log_every, "finetune");
  info.seeds = {{"seed", cfg.seed}, {"split_seed", lc.split.seed}};

  const auto result = augment::finetune(lc.ck.model, masks, lc.inputs.ds, lc.inputs.kb, lc.split, cfg);
  const json metrics = split_metrics(result.model, lc.inputs, lc.split, cfg.threads);
  json extra = {{"stage", "finetune"},
                {"config", augment::to_json(cfg)},
                {"data", data_block(lc.inputs)},
                {"parent_params_sha256", lc.ck.manifest.value("params_sha256", std::string())},
                {"masks_sha256", io::sha256_file(o.masks)}};
  const fs::path dir(o.out);
  write_training_outputs(dir, result.model, extra, lc.split, result, metrics);
  const json summary = {{"checkpoint", dir.string()},
                        {"best_epoch", result.best_epoch},
                        {"threshold", cfg.threshold},
                        {"metrics", metrics}};
  info.metrics = summary;
  info.formats = {{"checkpoint", model::kCheckpointVersion}};
  write_run_manifest(info, o.manifest.empty() ? dir / "run_manifest.json" : fs::path(o.manifest));
  emit(out, summary);
  return kExitOk;
}

struct EvalOpts {
  std::string ckpt;
  std::string split = "test";
  std::string data;
  std::string kemb;
  int threads = 1;
  std::string out;
};

int do_eval(const EvalOpts& o, std::ostream& out) {
  auto lc = load_for_checkpoint(o.ckpt, o.data, o.kemb);
  const auto idx = data::partition(lc.split, o.split, lc.inputs.ds.size());
  const auto m = bench::evaluate(lc.ck.model, lc.inputs.ds, lc.inputs.kb, idx, o.threads);
  json result = bench::to_json(m);
  result["split"] = o.split;
  result["n"] = idx.size();
  if (!o.out.empty()) io::write_file_atomic(o.out, result.dump(2) + "\n");
  emit(out, result);
  return kExitOk;
}

struct SaliencyOpts {
  std::string masks;
  std::string out;
  std::string data;
  std::size_t top_k = 10;
};

int do_saliency(const SaliencyOpts& o, std::ostream& out) {
  const auto set = explain::load_masks(o.masks);
  std::vector<std::string> atlas;
  if (!o.data.empty()) atlas = data::load_dataset(o.data).atlas;
  json result = json::object();
  for (const auto& [tag, pair] : set.pairs) {
    const auto scores = explain::roi_importance(pair, atlas, o.top_k);
    const fs::path base = fs::path(o.out) / ("saliency_" + tag);
    explain::export_saliency(scores, tag, base.string() + ".json", base.string() + ".csv");
    json top = json::array();
    for (const auto& s : scores) top.push_back({{"node", s.node}, {"name", s.name}, {"score", s.score}});
    result[tag] = top;
  }
  emit(out, result);
  return kExitOk;
}

struct KdistOpts {
  std::string masks;
  std::string out;
};

int do_kdist(const KdistOpts& o, std::ostream& out) {
  const auto set = explain::load_masks(o.masks);
  json result = json::object();
  for (const auto& [tag, pair] : set.pairs) {
    const auto ki = explain::knowledge_importance(pair);
    const fs::path base = fs::path(o.out) / ("knowledge_hist_" + tag);
    explain::export_histogram(ki, tag, base.string() + ".json", base.string() + ".csv");
    result[tag] = ki.histogram;
  }
  emit(out, result);
  return kExitOk;
}

struct KsubOpts {
  std::string kemb;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest;
};

int do_ksub(const KsubOpts& o, const CLI::App& sub, std::ostream& out) {
  RunInfo info;
  info.command = "ksub";
  info.config = options_json(sub);
  info.inputs = {{"kemb", o.kemb}};
  info.seeds = {{"seed", o.seed}};
  const auto kb = data::load_knowledge(o.kemb);
  const auto sub_kb = data::subsample_knowledge(kb, o.fraction, o.seed);
  data::save_knowledge(sub_kb, o.out);
  const json result = {{"kemb", o.out},
                       {"rows", sub_kb.count()},
                       {"dim", sub_kb.dim()},
                       {"source_rows", kb.count()},
                       {"fraction", o.fraction}};
  info.metrics = result;
  info.formats = {{"kemb", data::kKembVersion}};
  write_run_manifest(info, file_manifest_path(o.out, o.manifest));
  emit(out, result);
  return kExitOk;
}

struct RecoveryOpts {
  std::string masks;
  std::string truth;
  std::string out;
};

int do_recovery(const RecoveryOpts& o, std::ostream& out) {
  const auto rec = bench::mask_recovery(explain::load_masks(o.masks), bench::load_truth(o.truth));
  json groups = json::object();
  double edge = 0.0;
  double know = 0.0;
  for (const auto& [tag, r] : rec) {
    groups[tag] = {{"edge_auc", r.edge_auc}, {"knowledge_auc", r.knowledge_auc}};
    edge += r.edge_auc;
    know += r.knowledge_auc;
  }
  const double n = static_cast<double>(rec.size());
  const json result = {{"groups", groups}, {"mean_edge_auc", edge / n}, {"mean_knowledge_auc", know / n}};
  if (!o.out.empty()) io::write_file_atomic(o.out, result.dump(2) + "\n");
  emit(out, result);
  return kExitOk;
}

void add_config_flag(CLI::App* sub) {
  sub->add_option("--config", "JSON file of flag values; explicit flags take precedence");
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal connectome GNN with learned explanation masks", "mmgnn"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // synth
  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a planted-structure benchmark (ds.jsonl, kb.kemb, truth.json)");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--seed", so.spec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--subjects-per-class", so.spec.subjects_per_class, "Subjects per class")->capture_default_str();
  synth->add_option("--num-nodes", so.spec.num_nodes, "Nodes per connectome (V)")->capture_default_str();
  synth->add_option("--num-knowledge", so.spec.num_knowledge, "Knowledge rows (N)")->capture_default_str();
  synth->add_option("--knowledge-dim", so.spec.knowledge_dim, "Knowledge embedding width")->capture_default_str();
  synth->add_option("--planted-edges", so.spec.planted_edges, "Planted edges per group")->capture_default_str();
  synth->add_option("--shared-edges", so.spec.shared_edges, "Planted edges common to all groups")->capture_default_str();
  synth->add_option("--planted-knowledge", so.spec.planted_knowledge, "Planted knowledge rows")->capture_default_str();
  synth->add_option("--delta", so.spec.signal_strength, "Weight shift on planted edges for class 1")->capture_default_str();
  synth->add_option("--noise", so.spec.noise_scale, "Std of base edge weights")->capture_default_str();
  synth->add_option("--knowledge-noise", so.spec.knowledge_noise, "Norm of per-row knowledge noise")->capture_default_str();
  synth->add_option("--groups", so.spec.groups, "Group tags")->delimiter(',')->capture_default_str();
  synth->add_option("--feature-mode", so.feature_mode, "Node features: identity or profile")->capture_default_str();
  synth->add_option("--manifest", so.manifest, "Run manifest path (default <out>/run_manifest.json)");
  add_config_flag(synth);

  // pretrain
  PretrainOpts po;
  auto* pretrain = app.add_subcommand("pretrain", "Train the multimodal model end to end");
  pretrain->add_option("--data", po.data, "cnx-v1 dataset (JSON Lines)")->required();
  pretrain->add_option("--kemb", po.kemb, "Knowledge embeddings (KEMB)")->required();
  pretrain->add_option("--out", po.out, "Checkpoint directory")->required();
  pretrain->add_option("--arch", po.arch, "gcn, gine or gat")->capture_default_str();
  pretrain->add_option("--seed", po.seed, "Initialization and training seed")->capture_default_str();
  pretrain->add_option("--split", po.split_file, "Existing split.json (otherwise a new split is drawn)");
  pretrain->add_option("--split-seed", po.split_seed, "Split seed (default: --seed)")->capture_default_str();
  pretrain->add_option("--ratios", po.ratios, "Train, val, test ratios")->delimiter(',')->expected(3)->capture_default_str();
  pretrain->add_option("--stratify", po.stratify, "Stratify the split by label or group")->capture_default_str();
  pretrain->add_option("--epochs", po.train.epochs, "Training epochs")->capture_default_str();
  pretrain->add_option("--lr", po.train.learning_rate, "Learning rate")->capture_default_str();
  pretrain->add_option("--batch-size", po.train.batch_size, "Subjects per optimizer step")->capture_default_str();
  pretrain->add_option("--weight-decay", po.train.weight_decay, "L2 weight decay")->capture_default_str();
  pretrain->add_option("--optimizer", po.optimizer, "adam or sgd_momentum")->capture_default_str();
  pretrain->add_option("--momentum", po.train.momentum, "Momentum for sgd_momentum")->capture_default_str();
  pretrain->add_option("--hidden", po.model.hidden, "Backbone width")->capture_default_str();
  pretrain->add_option("--fusion-dim", po.model.fusion_dim, "Fusion width d_f")->capture_default_str();
  pretrain->add_option("--backbone-layers", po.model.backbone_layers, "Backbone layers")->capture_default_str();
  pretrain->add_option("--fusion-layers", po.model.fusion_layers, "Fusion layers")->capture_default_str();
  pretrain->add_option("--adapter-layers", po.model.adapter_layers, "Knowledge adapter layers")->capture_default_str();
  pretrain->add_option("--projection-layers", po.model.projection_layers, "Graph projection layers")->capture_default_str();
  pretrain->add_option("--classifier-layers", po.model.classifier_layers, "Classifier layers")->capture_default_str();
  pretrain->add_option("--gat-heads", po.model.gat_heads, "Attention heads (gat)")->capture_default_str();
  pretrain->add_option("--gine-mlp-layers", po.model.gine_mlp_layers, "MLP depth inside GINE layers")->capture_default_str();
  pretrain->add_flag("--sever-fusion", po.model.sever_fusion, "Backbone-only baseline: no knowledge edges");
  pretrain->add_option("--threads", po.train.threads, "Evaluation threads")->capture_default_str();
  pretrain->add_option("--log-every", po.log_every, "Log every k epochs to stderr (0 = off)")->capture_default_str();
  pretrain->add_option("--manifest", po.manifest, "Run manifest path (default <out>/run_manifest.json)");
  add_config_flag(pretrain);

  // explain
  ExplainOpts eo;
  auto* explain_cmd = app.add_subcommand("explain", "Learn per-group data and knowledge masks on a frozen checkpoint");
  explain_cmd->add_option("--ckpt", eo.ckpt, "Checkpoint directory")->required();
  explain_cmd->add_option("--out", eo.out, "Output masks.json")->required();
  explain_cmd->add_option("--data", eo.data, "Override the checkpoint's dataset");
  explain_cmd->add_option("--kemb", eo.kemb, "Override the checkpoint's knowledge file");
  explain_cmd->add_option("--epochs", eo.cfg.epochs, "Mask epochs")->capture_default_str();
  explain_cmd->add_option("--lr", eo.cfg.learning_rate, "Learning rate on logits")->capture_default_str();
  explain_cmd->add_option("--tau", eo.cfg.tau, "Gumbel temperature")->capture_default_str();
  explain_cmd->add_option("--lambdas", eo.lambdas, "Weights of mask, clf, sparsity, discreteness terms")
      ->delimiter(',')->expected(4)->capture_default_str();
  explain_cmd->add_option("--batch-size", eo.cfg.batch_size, "Subjects per optimizer step")->capture_default_str();
  explain_cmd->add_option("--seed", eo.cfg.seed, "Noise and shuffling seed")->capture_default_str();
  explain_cmd->add_option("--threshold", eo.threshold, "Threshold hint stored with the masks")->capture_default_str();
  explain_cmd->add_option("--manifest", eo.manifest, "Run manifest path (default <out>.run.json)");
  add_config_flag(explain_cmd);

  // finetune
  FinetuneOpts fo;
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune on mask-guided augmented inputs");
  finetune_cmd->add_option("--ckpt", fo.ckpt, "Pretrained checkpoint directory")->required();
  finetune_cmd->add_option("--masks", fo.masks, "masks.json from explain")->required();
  finetune_cmd->add_option("--out", fo.out, "Output checkpoint directory")->required();
  finetune_cmd->add_option("--data", fo.data, "Override the checkpoint's dataset");
  finetune_cmd->add_option("--kemb", fo.kemb, "Override the checkpoint's knowledge file");
  finetune_cmd->add_option("--threshold", fo.cfg.threshold, "Retention threshold T on sigmoid(mask)")->capture_default_str();
  finetune_cmd->add_option("--epochs", fo.cfg.epochs, "Fine-tuning epochs")->capture_default_str();
  finetune_cmd->add_option("--lr", fo.cfg.learning_rate, "Learning rate")->capture_default_str();
  finetune_cmd->add_option("--batch-size", fo.cfg.batch_size, "Subjects per optimizer step")->capture_default_str();
  finetune_cmd->add_option("--weight-decay", fo.cfg.weight_decay, "L2 weight decay")->capture_default_str();
  finetune_cmd->add_option("--optimizer", fo.optimizer, "adam or sgd_momentum")->capture_default_str();
  finetune_cmd->add_option("--seed", fo.cfg.seed, "Augmentation and shuffling seed")->capture_default_str();
  finetune_cmd->add_option("--threads", fo.cfg.threads, "Evaluation threads")->capture_default_str();
  finetune_cmd->add_option("--log-every", fo.log_every, "Log every k epochs to stderr (0 = off)")->capture_default_str();
  finetune_cmd->add_option("--manifest", fo.manifest, "Run manifest path (default <out>/run_manifest.json)");
  add_config_flag(finetune_cmd);

  // eval
  EvalOpts vo;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split partition");
  eval_cmd->add_option("--ckpt", vo.ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--split", vo.split, "train, val, test or all")->capture_default_str();
  eval_cmd->add_option("--data", vo.data, "Override the checkpoint's dataset");
  eval_cmd->add_option("--kemb", vo.kemb, "Override the checkpoint's knowledge file");
  eval_cmd->add_option("--threads", vo.threads, "Evaluation threads")->capture_default_str();
  eval_cmd->add_option("--out", vo.out, "Also write the metrics JSON here");
  add_config_flag(eval_cmd);

  // saliency
  SaliencyOpts sa;
  auto* saliency = app.add_subcommand("saliency", "Export ranked ROI importance per group (JSON + CSV)");
  saliency->add_option("--masks", sa.masks, "masks.json")->required();
  saliency->add_option("--out", sa.out, "Output directory")->required();
  saliency->add_option("--data", sa.data, "Dataset whose atlas supplies ROI names");
  saliency->add_option("--top-k", sa.top_k, "ROIs to keep (0 = all)")->capture_default_str();
  add_config_flag(saliency);

  // kdist
  KdistOpts ko;
  auto* kdist = app.add_subcommand("kdist", "Export knowledge-importance histograms per group (JSON + CSV)");
  kdist->add_option("--masks", ko.masks, "masks.json")->required();
  kdist->add_option("--out", ko.out, "Output directory")->required();
  add_config_flag(kdist);

  // ksub
  KsubOpts ks;
  auto* ksub = app.add_subcommand("ksub", "Subsample a knowledge base to a fraction of its rows");
  ksub->add_option("--kemb", ks.kemb, "Input KEMB")->required();
  ksub->add_option("--fraction", ks.fraction, "Fraction of rows to keep, in (0, 1]")->required();
  ksub->add_option("--seed", ks.seed, "Sampling seed")->capture_default_str();
  ksub->add_option("--out", ks.out, "Output KEMB")->required();
  ksub->add_option("--manifest", ks.manifest, "Run manifest path (default <out>.run.json)");
  add_config_flag(ksub);

  // recovery
  RecoveryOpts ro;
  auto* recovery = app.add_subcommand("recovery", "Score learned masks against planted ground truth");
  recovery->add_option("--masks", ro.masks, "masks.json")->required();
  recovery->add_option("--truth", ro.truth, "truth.json from synth")->required();
  recovery->add_option("--out", ro.out, "Also write the report here");
  add_config_flag(recovery);

  try {
    std::vector<std::string> args = merge_config(raw_args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    try {
      app.parse(args);
    } catch (const CLI::Success& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      return kExitUsage;
    }
    if (synth->parsed()) return do_synth(so, *synth, out, err);
    if (pretrain->parsed()) return do_pretrain(po, *pretrain, out, err);
    if (explain_cmd->parsed()) return do_explain(eo, *explain_cmd, out, err);
    if (finetune_cmd->parsed()) return do_finetune(fo, *finetune_cmd, out, err);
    if (eval_cmd->parsed()) return do_eval(vo, out);
    if (saliency->parsed()) return do_saliency(sa, out);
    if (kdist->parsed()) return do_kdist(ko, out);
    if (ksub->parsed()) return do_ksub(ks, *ksub, out);
    if (recovery->parsed()) return do_recovery(ro, out);
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace mmgnn::cli
