#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/errors.hpp"
#include "mmgnn/io.hpp"
#include "mmgnn/rng.hpp"

namespace mmgnn::data {

namespace {

constexpr char kMagic[4] = {'K', 'E', 'M', 'B'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

template <typename T>
T swap_bytes(T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  std::reverse(buf, buf + sizeof(T));
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <typename T>
T read_le(const std::string& bytes, std::size_t offset) {
  T v{};
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) v = swap_bytes(v);
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) v = swap_bytes(v);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

KnowledgeBase parse_knowledge(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(origin + ": bad magic (expected KEMB)");
  }
  const auto version = read_le<std::uint32_t>(bytes, 4);
  if (version != kKembVersion) {
    throw FormatError(origin + ": unsupported KEMB version " + std::to_string(version));
  }
  const auto n = read_le<std::uint64_t>(bytes, 8);
  const auto d = read_le<std::uint64_t>(bytes, 16);
  if (n < 1 || d < 1) throw FormatError(origin + ": KEMB needs N >= 1 and d >= 1");
  const std::uint64_t payload = n * d * 4;
  if (d != 0 && (payload / d / 4 != n)) throw FormatError(origin + ": header counts overflow");
  if (bytes.size() - kHeaderBytes < payload) {
    throw FormatError(origin + ": truncated payload: header declares " + std::to_string(n) + "x" +
                      std::to_string(d) + " (" + std::to_string(payload) + " bytes), found " +
                      std::to_string(bytes.size() - kHeaderBytes));
  }

  KnowledgeBase kb;
  kb.embeddings.resize(static_cast<Index>(n), static_cast<Index>(d));
  for (std::uint64_t i = 0; i < n * d; ++i) {
    const auto raw = read_le<std::uint32_t>(bytes, kHeaderBytes + 4 * i);
    const float f = std::bit_cast<float>(raw);
    if (!std::isfinite(f)) {
      throw FormatError(origin + ": non-finite value in row " + std::to_string(i / d));
    }
    kb.embeddings.data()[i] = static_cast<double>(f);
  }

  const std::size_t trailer_at = kHeaderBytes + payload;
  if (trailer_at < bytes.size()) {
    const std::string trailer = bytes.substr(trailer_at);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(trailer);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(origin + ": malformed JSON trailer: " + e.what());
    }
    if (j.is_array()) {
      kb.item_ids = j.get<std::vector<std::string>>();
    } else if (j.is_object()) {
      if (j.contains("ids")) {
        kb.item_ids = j.at("ids").get<std::vector<std::string>>();
        j.erase("ids");
      }
      kb.trailer_extra = std::move(j);
    } else {
      throw FormatError(origin + ": trailer must be a JSON object or array");
    }
    if (!kb.item_ids.empty() && kb.item_ids.size() != n) {
      throw FormatError(origin + ": trailer lists " + std::to_string(kb.item_ids.size()) +
                        " ids for " + std::to_string(n) + " rows");
    }
  }
  return kb;
}

KnowledgeBase load_knowledge(const std::filesystem::path& path) {
  return parse_knowledge(io::read_file(path), path.string());
}

std::string serialize_knowledge(const KnowledgeBase& kb) {
  if (kb.count() < 1) throw ValidationError("knowledge base must hold at least one row");
  std::string out(kMagic, 4);
  append_le<std::uint32_t>(out, kKembVersion);
  append_le<std::uint64_t>(out, static_cast<std::uint64_t>(kb.count()));
  append_le<std::uint64_t>(out, static_cast<std::uint64_t>(kb.dim()));
  out.reserve(out.size() + static_cast<std::size_t>(kb.embeddings.size()) * 4);
  for (Index i = 0; i < kb.embeddings.size(); ++i) {
    append_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(kb.embeddings.data()[i])));
  }
  if (!kb.item_ids.empty() || (kb.trailer_extra.is_object() && !kb.trailer_extra.empty())) {
    nlohmann::json j = kb.trailer_extra.is_object() ? kb.trailer_extra : nlohmann::json::object();
    if (!kb.item_ids.empty()) j["ids"] = kb.item_ids;
    out += j.dump();
  }
  return out;
}

void save_knowledge(const KnowledgeBase& kb, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_knowledge(kb));
}

Index subsample_size(Index n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw RangeError("knowledge fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  // The small slack keeps ceil from rounding up on representation error,
  // e.g. 0.1 * 20110 = 2011.0000000000002.
  const double raw = fraction * static_cast<double>(n);
  const auto k = static_cast<Index>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  if (k < 1) throw RangeError("knowledge fraction keeps no rows");
  return std::min(k, n);
}

KnowledgeBase subsample_knowledge(const KnowledgeBase& kb, double fraction, std::uint64_t seed) {
  const Index k = subsample_size(kb.count(), fraction);
  if (k == kb.count()) return kb;
  std::vector<Index> order(static_cast<std::size_t>(kb.count()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots are a uniform sample.
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(kb.count() - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());

  KnowledgeBase out;
  out.trailer_extra = kb.trailer_extra;
  out.embeddings.resize(k, kb.dim());
  for (Index r = 0; r < k; ++r) {
    const Index src = order[static_cast<std::size_t>(r)];
    out.embeddings.row(r) = kb.embeddings.row(src);
    if (!kb.item_ids.empty()) out.item_ids.push_back(kb.item_ids[static_cast<std::size_t>(src)]);
  }
  return out;
}

}  // namespace mmgnn::data
