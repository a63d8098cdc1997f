#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmgnn/data/dataset.hpp"

namespace mmgnn::data {

struct Split {
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

enum class StratifyBy { kLabel, kGroup };

StratifyBy parse_stratify(const std::string& name);
std::string to_string(StratifyBy s);

/// Stratified shuffle split. Totals are floor(ratio * n) for train and val
/// with the remainder going to test; within each stratum train and val
/// counts sit within one sample of ratio * stratum size.
Split split_dataset(const ConnectomeDataset& ds, const SplitRatios& ratios, std::uint64_t seed,
                    StratifyBy stratify_by = StratifyBy::kLabel);

/// Named partition: "train", "val", "test", or "all" (every index).
std::vector<std::size_t> partition(const Split& split, const std::string& name, std::size_t n);

std::string serialize_split(const Split& split);
void save_split(const Split& split, const std::filesystem::path& path);
/// Loads and checks that the lists are disjoint and cover [0, n).
Split load_split(const std::filesystem::path& path, std::size_t n);

}  // namespace mmgnn::data
