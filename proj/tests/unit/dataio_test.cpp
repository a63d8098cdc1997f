#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "mmgnn/data/dataset.hpp"
#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/data/split.hpp"
#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"
#include "test_util.hpp"

namespace mmgnn::data {
namespace {

using testing::TempDir;

/// Writes a cnx-v1 file with integer weights so that large shapes stay small
/// on disk. Every subject gets a single edge (0, 1) of weight 1.
void write_shaped_dataset(const std::filesystem::path& path, std::size_t subjects, Index v) {
  std::ofstream out(path);
  out << R"({"format":"cnx-v1","num_nodes":)" << v << R"(,"num_classes":2,"groups":["a","b"]})" << "\n";
  std::string row;
  for (Index i = 0; i < v * v; ++i) {
    const bool edge = i == 1 || i == v;
    row += (i ? "," : "") + std::string(edge ? "1" : "0");
  }
  for (std::size_t s = 0; s < subjects; ++s) {
    out << R"({"subject_id":"s)" << s << R"(","label":)" << s % 2 << R"(,"group":")"
        << (s % 3 ? "a" : "b") << R"(","adjacency":[)" << row << "]}\n";
  }
}

ConnectomeDataset tiny_dataset(std::size_t per_class = 6, Index v = 4) {
  ConnectomeDataset ds;
  ds.num_nodes = v;
  ds.num_classes = 2;
  ds.groups = {"f", "m"};
  Rng rng(1);
  for (std::size_t s = 0; s < 2 * per_class; ++s) {
    Connectome c;
    c.subject_id = "sub" + std::to_string(s);
    c.label = static_cast<int>(s / per_class);
    c.group = s % 2 ? "m" : "f";
    c.adjacency = testing::random_adjacency(v, rng);
    ds.subjects.push_back(c);
  }
  return ds;
}

TEST(LoadDataset, OasisShaped) {
  TempDir dir;
  write_shaped_dataset(dir / "oasis.jsonl", 815, 132);
  const auto ds = load_dataset(dir / "oasis.jsonl");
  EXPECT_EQ(ds.size(), 815u);
  EXPECT_EQ(ds.num_nodes, 132);
  EXPECT_EQ(ds.subjects[0].adjacency(0, 1), 1.0);
}

TEST(LoadDataset, AdniShaped) {
  TempDir dir;
  write_shaped_dataset(dir / "adni.jsonl", 340, 85);
  const auto ds = load_dataset(dir / "adni.jsonl");
  EXPECT_EQ(ds.size(), 340u);
  EXPECT_EQ(ds.num_nodes, 85);
}

TEST(LoadDataset, AsymmetricRecordIsRejected) {
  TempDir dir;
  std::ofstream(dir / "bad.jsonl")
      << R"({"format":"cnx-v1","num_nodes":2,"num_classes":2,"groups":["a"]})" << "\n"
      << R"({"subject_id":"x","label":0,"group":"a","adjacency":[0,1,2,0]})" << "\n";
  EXPECT_THROW(load_dataset(dir / "bad.jsonl"), ValidationError);
}

TEST(LoadDataset, OtherInvariantViolations) {
  auto ds = tiny_dataset();
  ds.subjects[0].adjacency(0, 0) = 0.5;
  EXPECT_THROW(validate(ds), ValidationError);
  ds = tiny_dataset();
  ds.subjects[1].adjacency(0, 1) = ds.subjects[1].adjacency(1, 0) = -0.1;
  EXPECT_THROW(validate(ds), ValidationError);
  ds = tiny_dataset();
  ds.subjects[2].label = 2;
  EXPECT_THROW(validate(ds), ValidationError);
  ds = tiny_dataset();
  ds.subjects[3].group = "x";
  EXPECT_THROW(validate(ds), ValidationError);
  ds = tiny_dataset();
  ds.subjects[3].subject_id = ds.subjects[4].subject_id;
  EXPECT_THROW(validate(ds), ValidationError);
}

TEST(LoadDataset, MalformedFilesAreFormatErrors) {
  TempDir dir;
  std::ofstream(dir / "noheader.jsonl") << R"({"subject_id":"x"})" << "\n";
  EXPECT_THROW(load_dataset(dir / "noheader.jsonl"), FormatError);
  std::ofstream(dir / "garbage.jsonl") << "{not json\n";
  EXPECT_THROW(load_dataset(dir / "garbage.jsonl"), FormatError);
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), ValidationError);
}

TEST(SaveDataset, RoundTripIsExact) {
  TempDir dir;
  auto ds = tiny_dataset();
  ds.atlas = {"A", "B", "C", "D"};
  ds.feature_mode = FeatureMode::kProfile;
  save_dataset(ds, dir / "ds.jsonl");
  const auto back = load_dataset(dir / "ds.jsonl");
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.atlas, ds.atlas);
  EXPECT_EQ(back.feature_mode, FeatureMode::kProfile);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.subjects[i].subject_id, ds.subjects[i].subject_id);
    EXPECT_EQ(back.subjects[i].label, ds.subjects[i].label);
    EXPECT_EQ(back.subjects[i].group, ds.subjects[i].group);
    EXPECT_TRUE(back.subjects[i].adjacency == ds.subjects[i].adjacency);
  }
  save_dataset(back, dir / "again.jsonl");
  EXPECT_EQ(io::read_file(dir / "ds.jsonl"), io::read_file(dir / "again.jsonl"));
}

TEST(NodeFeatures, IdentityAndProfile) {
  Rng rng(2);
  const Matrix w = testing::random_adjacency(5, rng);
  EXPECT_TRUE(node_features(w, FeatureMode::kIdentity) == Matrix::Identity(5, 5));
  EXPECT_TRUE(node_features(w, FeatureMode::kProfile) == w);
  EXPECT_THROW(parse_feature_mode("onehot"), ValidationError);
}

std::string kemb_bytes(std::uint64_t n, std::uint64_t d, std::uint64_t rows_written) {
  std::string out = "KEMB";
  auto put = [&](auto v) {
    char buf[sizeof(v)];
    std::memcpy(buf, &v, sizeof(v));
    out.append(buf, sizeof(v));
  };
  put(std::uint32_t{1});
  put(n);
  put(d);
  for (std::uint64_t i = 0; i < rows_written * d; ++i) put(static_cast<float>(i % 97) * 0.25f);
  return out;
}

TEST(LoadKnowledge, CorpusSizedArchive) {
  const auto kb = parse_knowledge(kemb_bytes(20108, 1024, 20108));
  EXPECT_EQ(kb.count(), 20108);
  EXPECT_EQ(kb.dim(), 1024);
  EXPECT_EQ(kb.embeddings(0, 5), 1.25);
}

TEST(LoadKnowledge, TruncatedPayload) {
  EXPECT_THROW(parse_knowledge(kemb_bytes(3, 4, 2)), FormatError);
}

TEST(LoadKnowledge, SingleRow) {
  const auto kb = parse_knowledge(kemb_bytes(1, 3, 1));
  EXPECT_EQ(kb.count(), 1);
  EXPECT_EQ(kb.dim(), 3);
}

TEST(LoadKnowledge, HeaderErrors) {
  std::string bad = kemb_bytes(1, 3, 1);
  bad[0] = 'X';
  EXPECT_THROW(parse_knowledge(bad), FormatError);
  std::string version = kemb_bytes(1, 3, 1);
  version[4] = 2;
  EXPECT_THROW(parse_knowledge(version), FormatError);
  EXPECT_THROW(parse_knowledge(kemb_bytes(0, 3, 0)), FormatError);
  EXPECT_THROW(parse_knowledge("KE"), FormatError);
}

TEST(LoadKnowledge, TrailerCarriesIdsAndExtras) {
  auto bytes = kemb_bytes(2, 2, 2) + R"({"ids":["p1","p2"],"model":"hash"})";
  const auto kb = parse_knowledge(bytes);
  EXPECT_EQ(kb.item_ids, (std::vector<std::string>{"p1", "p2"}));
  EXPECT_EQ(kb.trailer_extra.at("model"), "hash");
  EXPECT_THROW(parse_knowledge(kemb_bytes(2, 2, 2) + R"(["only-one"])"), FormatError);
  EXPECT_THROW(parse_knowledge(kemb_bytes(2, 2, 2) + "{oops"), FormatError);
}

TEST(SaveKnowledge, RoundTripWidensFloat32) {
  TempDir dir;
  KnowledgeBase kb;
  kb.embeddings = Matrix(2, 3);
  kb.embeddings << 0.1, -2.5, 3.0, 1e-3, 0.0, 7.25;
  kb.item_ids = {"a", "b"};
  save_knowledge(kb, dir / "kb.kemb");
  const auto back = load_knowledge(dir / "kb.kemb");
  EXPECT_EQ(back.item_ids, kb.item_ids);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_EQ(back.embeddings.data()[i], static_cast<double>(static_cast<float>(kb.embeddings.data()[i])));
  }
}

TEST(Subsample, PaperFractions) {
  EXPECT_EQ(subsample_size(20108, 0.01), 202);
  EXPECT_EQ(subsample_size(20108, 0.10), 2011);
  EXPECT_THROW(subsample_size(10, 0.0), RangeError);
  EXPECT_THROW(subsample_size(10, 1.5), RangeError);
}

TEST(Subsample, RowsComeFromSourceInOrder) {
  KnowledgeBase kb;
  kb.embeddings = Matrix(100, 1);
  for (Index i = 0; i < 100; ++i) kb.embeddings(i, 0) = static_cast<double>(i);
  const auto sub = subsample_knowledge(kb, 0.1, 5);
  ASSERT_EQ(sub.count(), 10);
  for (Index i = 1; i < sub.count(); ++i) EXPECT_LT(sub.embeddings(i - 1, 0), sub.embeddings(i, 0));
  const auto again = subsample_knowledge(kb, 0.1, 5);
  EXPECT_TRUE(sub.embeddings == again.embeddings);
  const auto full = subsample_knowledge(kb, 1.0, 5);
  EXPECT_TRUE(full.embeddings == kb.embeddings);
}

TEST(Subsample, EveryRowEquallyLikely) {
  // Inclusion frequency over many seeds is k/N for every row.
  KnowledgeBase kb;
  kb.embeddings = Matrix(20, 1);
  for (Index i = 0; i < 20; ++i) kb.embeddings(i, 0) = static_cast<double>(i);
  std::vector<int> hits(20, 0);
  const int trials = 4000;
  for (int s = 0; s < trials; ++s) {
    const auto sub = subsample_knowledge(kb, 0.25, static_cast<std::uint64_t>(s));
    for (Index r = 0; r < sub.count(); ++r) ++hits[static_cast<std::size_t>(sub.embeddings(r, 0))];
  }
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(trials), 0.25, 0.03);
}

ConnectomeDataset sized_dataset(std::size_t n) {
  ConnectomeDataset ds;
  ds.num_nodes = 2;
  ds.num_classes = 2;
  ds.groups = {"a", "b"};
  for (std::size_t s = 0; s < n; ++s) {
    Connectome c;
    c.subject_id = std::to_string(s);
    c.label = static_cast<int>(s % 2);
    c.group = s % 3 ? "a" : "b";
    c.adjacency = Matrix::Zero(2, 2);
    ds.subjects.push_back(c);
  }
  return ds;
}

TEST(Split, OasisSizes) {
  const auto split = split_dataset(sized_dataset(815), {0.7, 0.1, 0.2}, 1);
  EXPECT_EQ(split.train.size(), 570u);
  EXPECT_EQ(split.val.size(), 81u);
  EXPECT_EQ(split.test.size(), 164u);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto ds = sized_dataset(101);
  const auto a = split_dataset(ds, {}, 9);
  const auto b = split_dataset(ds, {}, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
  std::set<std::size_t> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 101u);
  EXPECT_NE(split_dataset(ds, {}, 10).train, a.train);
}

TEST(Split, BadRatios) {
  EXPECT_THROW(split_dataset(sized_dataset(20), {0.5, 0.5, 0.5}, 1), RangeError);
  EXPECT_THROW(split_dataset(sized_dataset(20), {0.8, 0.0, 0.2}, 1), RangeError);
}

TEST(Split, StratifiedWithinOneSample) {
  const auto ds = sized_dataset(200);
  for (auto by : {StratifyBy::kLabel, StratifyBy::kGroup}) {
    const auto split = split_dataset(ds, {}, 3, by);
    std::map<std::string, std::array<int, 2>> counts;  // stratum -> (total, train)
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& s = ds.subjects[i];
      counts[by == StratifyBy::kLabel ? std::to_string(s.label) : s.group][0]++;
    }
    for (std::size_t i : split.train) {
      const auto& s = ds.subjects[i];
      counts[by == StratifyBy::kLabel ? std::to_string(s.label) : s.group][1]++;
    }
    for (const auto& [key, c] : counts) EXPECT_LE(std::abs(c[1] - 0.7 * c[0]), 1.0) << key;
  }
}

TEST(Split, TinyStratumIsRejected) {
  auto ds = sized_dataset(20);
  ds.subjects[0].group = "b";
  for (auto& s : ds.subjects) s.group = "a";
  ds.subjects[0].group = "b";
  EXPECT_THROW(split_dataset(ds, {}, 1, StratifyBy::kGroup), StratificationError);
}

TEST(Split, FileRoundTripAndChecks) {
  TempDir dir;
  const auto split = split_dataset(sized_dataset(30), {}, 4);
  save_split(split, dir / "split.json");
  const auto back = load_split(dir / "split.json", 30);
  EXPECT_EQ(back.train, split.train);
  EXPECT_EQ(back.seed, split.seed);
  EXPECT_THROW(load_split(dir / "split.json", 31), ValidationError);
  EXPECT_EQ(partition(split, "all", 30).size(), 30u);
  EXPECT_THROW(partition(split, "dev", 30), ValidationError);
}

}  // namespace
}  // namespace mmgnn::data
