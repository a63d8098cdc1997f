#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "mmgnn/data/split.hpp"
#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"
#include "mmgnn/rng.hpp"

namespace mmgnn::data {

StratifyBy parse_stratify(const std::string& name) {
  if (name == "label") return StratifyBy::kLabel;
  if (name == "group") return StratifyBy::kGroup;
  throw ValidationError("unknown stratification '" + name + "' (expected label or group)");
}

std::string to_string(StratifyBy s) { return s == StratifyBy::kLabel ? "label" : "group"; }

namespace {

// Splits `total` across strata as floor(share) plus one extra for the
// largest fractional remainders, never exceeding `cap`.
std::vector<std::size_t> apportion(const std::vector<double>& shares, std::size_t total,
                                   const std::vector<std::size_t>& cap) {
  std::vector<std::size_t> out(shares.size());
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < shares.size(); ++s) {
    out[s] = std::min(cap[s], static_cast<std::size_t>(std::floor(shares[s] + 1e-9)));
    assigned += out[s];
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return shares[a] - std::floor(shares[a]) > shares[b] - std::floor(shares[b]);
  });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k) {
    const std::size_t s = order[k];
    if (out[s] < cap[s]) {
      ++out[s];
      ++assigned;
    }
  }
  return out;
}

}  // namespace

Split split_dataset(const ConnectomeDataset& ds, const SplitRatios& r, std::uint64_t seed,
                    StratifyBy stratify_by) {
  if (!(r.train > 0 && r.val > 0 && r.test > 0) ||
      std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw RangeError("split ratios must be positive and sum to 1");
  }
  const std::size_t n = ds.size();
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = ds.subjects[i];
    strata[stratify_by == StratifyBy::kLabel ? std::to_string(s.label) : s.group].push_back(i);
  }
  std::vector<std::vector<std::size_t>> members;
  for (auto& [key, idx] : strata) {
    if (idx.size() < 3) {
      throw StratificationError("stratum '" + key + "' has " + std::to_string(idx.size()) +
                                " subjects; at least 3 are needed");
    }
    members.push_back(std::move(idx));
  }

  const auto n_train = static_cast<std::size_t>(std::floor(r.train * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(r.val * static_cast<double>(n) + 1e-9));

  std::vector<double> train_share;
  std::vector<double> val_share;
  std::vector<std::size_t> cap;
  for (const auto& m : members) {
    train_share.push_back(r.train * static_cast<double>(m.size()));
    val_share.push_back(r.val * static_cast<double>(m.size()));
    cap.push_back(m.size() - 1);  // leave room for val/test
  }
  const auto train_counts = apportion(train_share, n_train, cap);
  for (std::size_t s = 0; s < members.size(); ++s) cap[s] = members[s].size() - train_counts[s];
  const auto val_counts = apportion(val_share, n_val, cap);

  Split split;
  split.seed = seed;
  Rng rng(seed);
  for (std::size_t s = 0; s < members.size(); ++s) {
    auto idx = members[s];
    rng.shuffle(idx);
    const std::size_t a = train_counts[s];
    const std::size_t b = a + val_counts[s];
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(a));
    split.val.insert(split.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(a),
                     idx.begin() + static_cast<std::ptrdiff_t>(b));
    split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(b), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw RangeError("split leaves an empty partition for n=" + std::to_string(n));
  }
  return split;
}

std::vector<std::size_t> partition(const Split& split, const std::string& name, std::size_t n) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  if (name == "all") {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  throw ValidationError("unknown partition '" + name + "' (expected train, val, test or all)");
}

std::string serialize_split(const Split& split) {
  nlohmann::json j = {{"seed", split.seed}, {"train", split.train}, {"val", split.val}, {"test", split.test}};
  return j.dump(2) + "\n";
}

void save_split(const Split& split, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_split(split));
}

Split load_split(const std::filesystem::path& path, std::size_t n) {
  Split split;
  try {
    const auto j = nlohmann::json::parse(io::read_file(path));
    split.seed = j.at("seed").get<std::uint64_t>();
    split.train = j.at("train").get<std::vector<std::size_t>>();
    split.val = j.at("val").get<std::vector<std::size_t>>();
    split.test = j.at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  std::vector<int> seen(n, 0);
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    if (part->empty()) throw ValidationError(path.string() + ": empty partition");
    for (std::size_t i : *part) {
      if (i >= n) throw ValidationError(path.string() + ": index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw ValidationError(path.string() + ": index " + std::to_string(i) + " repeated");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw ValidationError(path.string() + ": index " + std::to_string(i) + " missing");
  return split;
}

}  // namespace mmgnn::data
