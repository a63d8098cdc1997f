#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmgnn/types.hpp"

namespace mmgnn::data {

/// N precomputed knowledge-item embeddings, one row per item. Stored as
/// float32 on disk and widened to double in memory.
struct KnowledgeBase {
  Matrix embeddings;                  // N x d
  std::vector<std::string> item_ids;  // empty or N entries
  nlohmann::json trailer_extra;       // trailer keys other than "ids"

  Index count() const { return embeddings.rows(); }
  Index dim() const { return embeddings.cols(); }
};

inline constexpr std::uint32_t kKembVersion = 1;

/// Reads a KEMB archive: "KEMB", u32 version, u64 N, u64 d, N*d float32
/// (all little-endian), then an optional UTF-8 JSON trailer.
KnowledgeBase load_knowledge(const std::filesystem::path& path);
KnowledgeBase parse_knowledge(const std::string& bytes, const std::string& origin = "<memory>");

std::string serialize_knowledge(const KnowledgeBase& kb);
void save_knowledge(const KnowledgeBase& kb, const std::filesystem::path& path);

/// Uniform sample without replacement of ceil(fraction * N) rows, kept in
/// their original order. fraction must lie in (0, 1].
KnowledgeBase subsample_knowledge(const KnowledgeBase& kb, double fraction, std::uint64_t seed);

/// Number of rows subsample_knowledge keeps.
Index subsample_size(Index n, double fraction);

}  // namespace mmgnn::data
