#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "mmgnn/cli/cli.hpp"
#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/io.hpp"
#include "test_util.hpp"

namespace mmgnn::cli {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
  json parsed() const { return json::parse(out); }
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> small_synth(const std::string& dir, const std::string& nodes = "8") {
  return {"synth", "--out", dir, "--seed", "7", "--subjects-per-class", "10", "--num-nodes", nodes,
          "--num-knowledge", "6", "--knowledge-dim", "4", "--planted-edges", "3", "--shared-edges", "1",
          "--planted-knowledge", "2"};
}

std::vector<std::string> small_pretrain(const std::string& data, const std::string& out) {
  return {"pretrain", "--data", data + "/ds.jsonl", "--kemb", data + "/kb.kemb", "--arch", "gcn", "--seed", "1",
          "--out", out, "--epochs", "3", "--hidden", "8", "--fusion-dim", "8", "--log-every", "0"};
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    ASSERT_EQ(call(small_synth(d())).code, 0);
    ASSERT_EQ(call(small_pretrain(d(), ck())).code, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string d() { return ((*dir_) / "d").string(); }
  static std::string ck() { return ((*dir_) / "ck").string(); }
  static std::string path(const std::string& name) { return ((*dir_) / name).string(); }
  static TempDir* dir_;
};

TempDir* Pipeline::dir_ = nullptr;

TEST_F(Pipeline, SynthAndPretrainArtifacts) {
  for (const char* f : {"ds.jsonl", "kb.kemb", "truth.json", "spec.json", "run_manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(d()) / f)) << f;
  for (const char* f : {"params.bin", "manifest.json", "split.json", "history.json", "metrics.json", "run_manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(ck()) / f)) << f;
  const auto run_manifest = json::parse(io::read_file(std::filesystem::path(ck()) / "run_manifest.json"));
  EXPECT_EQ(run_manifest.at("format"), "mmgnn-run-v1");
  EXPECT_EQ(run_manifest.at("command"), "pretrain");
  EXPECT_EQ(run_manifest.at("inputs").at("dataset").at("sha256"), io::sha256_file(d() + "/ds.jsonl"));
  EXPECT_EQ(run_manifest.at("config").at("epochs"), 3);
  EXPECT_EQ(json::parse(io::read_file(std::filesystem::path(ck()) / "history.json")).size(), 3u);
}

TEST_F(Pipeline, EvalPrintsMetrics) {
  const auto r = call({"eval", "--ckpt", ck(), "--split", "test"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.parsed();
  for (const char* k : {"acc", "auc", "f1"}) {
    ASSERT_TRUE(j.contains(k)) << k;
    EXPECT_GE(j.at(k).get<double>(), 0.0);
    EXPECT_LE(j.at(k).get<double>(), 1.0);
  }
  EXPECT_EQ(call({"eval", "--ckpt", ck(), "--split", "bogus"}).code, kExitValidation);
}

TEST_F(Pipeline, ExplainFinetuneAndExports) {
  const std::string masks = path("masks.json");
  auto r = call({"explain", "--ckpt", ck(), "--out", masks, "--epochs", "2", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(masks + ".run.json"));
  const auto mj = json::parse(io::read_file(masks));
  EXPECT_EQ(mj.at("num_nodes"), 8);
  EXPECT_EQ(mj.at("groups").size(), 2u);

  r = call({"finetune", "--ckpt", ck(), "--masks", masks, "--out", path("ft"), "--epochs", "2", "--seed", "3",
            "--log-every", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ft_manifest = json::parse(io::read_file(path("ft") + "/manifest.json"));
  EXPECT_EQ(ft_manifest.at("masks_sha256"), io::sha256_file(masks));
  EXPECT_EQ(call({"eval", "--ckpt", path("ft"), "--split", "val"}).code, 0);

  r = call({"saliency", "--masks", masks, "--out", path("sal"), "--top-k", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(json::parse(io::read_file(path("sal") + "/saliency_female.json")).empty());
  EXPECT_TRUE(std::filesystem::exists(path("sal") + "/saliency_male.csv"));

  r = call({"kdist", "--masks", masks, "--out", path("kd")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(path("kd") + "/knowledge_hist_female.csv"));
  EXPECT_TRUE(std::filesystem::exists(path("kd") + "/knowledge_hist_male.json"));

  r = call({"recovery", "--masks", masks, "--truth", d() + "/truth.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.parsed().contains("mean_edge_auc"));
}

TEST_F(Pipeline, ExplainOnMismatchedNodesIsValidationError) {
  ASSERT_EQ(call(small_synth(path("d9"), "9")).code, 0);
  const auto r = call({"explain", "--ckpt", ck(), "--data", path("d9") + "/ds.jsonl", "--out", path("m9.json")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_FALSE(std::filesystem::exists(path("m9.json")));
}

TEST_F(Pipeline, PretrainIsReproducible) {
  ASSERT_EQ(call(small_pretrain(d(), path("ck2"))).code, 0);
  for (const char* f : {"params.bin", "manifest.json", "split.json", "history.json", "metrics.json"})
    EXPECT_EQ(io::read_file(std::filesystem::path(ck()) / f), io::read_file(path("ck2") + "/" + f)) << f;
}

TEST_F(Pipeline, ConfigFileIsOverriddenByFlags) {
  const std::string cfg = path("cfg.json");
  io::write_file_atomic(cfg, R"({"epochs": 2, "hidden": 6, "fusion-dim": 8})");
  auto args = small_pretrain(d(), path("ck_cfg"));
  args.erase(args.begin() + 11, args.begin() + 15);  // drop --epochs 3 --hidden 8
  args.insert(args.end(), {"--config", cfg, "--hidden", "5"});
  const auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = json::parse(io::read_file(path("ck_cfg") + "/manifest.json"));
  EXPECT_EQ(manifest.at("model").at("hidden"), 5);
  EXPECT_EQ(json::parse(io::read_file(path("ck_cfg") + "/history.json")).size(), 2u);
}

TEST_F(Pipeline, KnowledgeSubsample) {
  const auto r = call({"ksub", "--kemb", d() + "/kb.kemb", "--fraction", "0.5", "--seed", "2", "--out", path("half.kemb")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data::load_knowledge(path("half.kemb")).count(), 3);
  EXPECT_TRUE(std::filesystem::exists(path("half.kemb") + ".run.json"));
  EXPECT_EQ(call({"ksub", "--kemb", d() + "/kb.kemb", "--fraction", "1.5", "--out", path("x.kemb")}).code,
            kExitValidation);
}

TEST(Cli, HelpOnEverySubcommand) {
  EXPECT_EQ(call({"--help"}).code, kExitOk);
  const std::map<std::string, std::vector<std::string>> flags{
      {"synth", {"--out", "--seed", "--delta", "--feature-mode"}},
      {"pretrain", {"--data", "--kemb", "--arch", "--epochs", "--threads", "--sever-fusion"}},
      {"explain", {"--ckpt", "--lambdas", "--tau", "--threshold"}},
      {"finetune", {"--ckpt", "--masks", "--threshold", "--epochs"}},
      {"eval", {"--ckpt", "--split"}},
      {"saliency", {"--masks", "--top-k"}},
      {"kdist", {"--masks", "--out"}},
      {"ksub", {"--kemb", "--fraction", "--seed"}},
      {"recovery", {"--masks", "--truth"}}};
  for (const auto& [sub, names] : flags) {
    const auto r = call({sub, "--help"});
    EXPECT_EQ(r.code, kExitOk) << sub;
    const std::string text = r.out + r.err;
    for (const auto& f : names) EXPECT_NE(text.find(f), std::string::npos) << sub << " " << f;
    EXPECT_NE(text.find("--config"), std::string::npos) << sub;
  }
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(call({}).code, kExitUsage);
  EXPECT_EQ(call({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(call({"synth", "--out", "x", "--no-such-flag"}).code, kExitUsage);
  EXPECT_EQ(call({"eval"}).code, kExitUsage);
}

TEST(Cli, MissingInputIsValidationError) {
  TempDir dir;
  const auto r = call({"pretrain", "--data", (dir / "none.jsonl").string(), "--kemb", (dir / "none.kemb").string(),
                       "--out", (dir / "ck").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_FALSE(r.err.empty());
}

}  // namespace
}  // namespace mmgnn::cli
