#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stochastok/byte_io.hpp"
#include "stochastok/errors.hpp"
#include "stochastok/parallel.hpp"
#include "stochastok/vocab.hpp"

namespace stochastok {

struct SplitPair {
  TokenId left;
  TokenId right;
  friend bool operator==(const SplitPair&, const SplitPair&) = default;
};

/// For every vocabulary token, all (left, right) token pairs whose bytes
/// concatenate to the token's bytes, ordered by split offset. Single-byte and
/// special tokens have empty lists. Immutable once built.
class SplitsTable {
 public:
  SplitsTable() = default;

  std::size_t size() const noexcept { return ids_.size(); }
  std::uint64_t vocab_hash() const noexcept { return vocab_hash_; }
  std::span<const TokenId> token_ids() const noexcept { return ids_; }

  bool covers(TokenId id) const noexcept { return index_of(id) != kNoIndex; }

  /// Split list of `id`; throws LookupError if the token is not covered.
  std::span<const SplitPair> splits(TokenId id) const {
    const auto idx = index_of(id);
    if (idx == kNoIndex) throw LookupError(id, 0);
    return at_index(idx);
  }

  /// Split list, or an empty span for unknown ids. For hot loops that have
  /// already validated their input.
  std::span<const SplitPair> splits_or_empty(TokenId id) const noexcept {
    const auto idx = index_of(id);
    if (idx == kNoIndex) return {};
    return at_index(idx);
  }

  std::size_t pair_count() const noexcept { return pairs_.size(); }

  friend bool operator==(const SplitsTable& a, const SplitsTable& b) {
    return a.vocab_hash_ == b.vocab_hash_ && a.ids_ == b.ids_ && a.offsets_ == b.offsets_ &&
           a.pairs_ == b.pairs_;
  }

 private:
  friend SplitsTable build_splits_table(const Vocabulary&, std::size_t);
  friend SplitsTable parse_splits_cache(std::string_view, const Vocabulary*);

  static constexpr std::uint32_t kNoIndex = 0xffffffffU;

  std::span<const SplitPair> at_index(std::uint32_t idx) const noexcept {
    return std::span<const SplitPair>(pairs_).subspan(offsets_[idx],
                                                      offsets_[idx + 1] - offsets_[idx]);
  }

  std::uint32_t index_of(TokenId id) const noexcept {
    if (!dense_.empty()) return id < dense_.size() ? dense_[id] : kNoIndex;
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) return kNoIndex;
    return static_cast<std::uint32_t>(it - ids_.begin());
  }

  void build_index() {
    dense_.clear();
    if (ids_.empty()) return;
    const TokenId max_id = ids_.back();
    if (static_cast<std::uint64_t>(max_id) < 8 * static_cast<std::uint64_t>(ids_.size()) + 65536) {
      dense_.assign(static_cast<std::size_t>(max_id) + 1, kNoIndex);
      for (std::size_t i = 0; i < ids_.size(); ++i) dense_[ids_[i]] = static_cast<std::uint32_t>(i);
    }
  }

  std::vector<TokenId> ids_;
  std::vector<std::uint32_t> offsets_{0};
  std::vector<SplitPair> pairs_;
  std::vector<std::uint32_t> dense_;
  std::uint64_t vocab_hash_ = 0;
};

/// Tests every interior byte offset of every non-special token and records
/// the split when both halves are (non-special) vocabulary tokens. Token
/// ranges are processed by `workers` threads and concatenated in id order, so
/// the result is identical for any worker count.
inline SplitsTable build_splits_table(const Vocabulary& v, std::size_t workers = 1) {
  const auto entries = v.entries();
  std::vector<std::vector<SplitPair>> per_token(entries.size());
  parallel_for_chunks(entries.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto& e = entries[k];
      if (v.is_special(e.id)) continue;
      const std::string_view s = e.bytes;
      for (std::size_t i = 1; i < s.size(); ++i) {
        auto left = v.find(s.substr(0, i));
        if (!left) continue;
        auto right = v.find(s.substr(i));
        if (!right) continue;
        per_token[k].push_back({*left, *right});
      }
    }
  });

  SplitsTable t;
  t.vocab_hash_ = v.content_hash();
  t.ids_.reserve(entries.size());
  t.offsets_.reserve(entries.size() + 1);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    t.ids_.push_back(entries[k].id);
    t.pairs_.insert(t.pairs_.end(), per_token[k].begin(), per_token[k].end());
    t.offsets_.push_back(static_cast<std::uint32_t>(t.pairs_.size()));
  }
  t.build_index();
  return t;
}

inline bool splittable(TokenId t, const SplitsTable& table) { return !table.splits(t).empty(); }

// ---------------------------------------------------------------------------
// Cache file, all integers little-endian:
//
//   magic "STKSPLIT" (8 bytes) | version u32 | reserved u32 | vocab hash u64 |
//   record count u64 | records...
//
// Each record is `token-id u32 | pair-count u32 | (left u32, right u32) * count`,
// one per vocabulary token in ascending id order.

inline constexpr char kSplitsMagic[8] = {'S', 'T', 'K', 'S', 'P', 'L', 'I', 'T'};
inline constexpr std::uint32_t kSplitsFormatVersion = 1;

inline std::string serialize_splits_cache(const SplitsTable& t) {
  std::string out(kSplitsMagic, 8);
  detail::put_le<std::uint32_t>(out, kSplitsFormatVersion);
  detail::put_le<std::uint32_t>(out, 0);
  detail::put_le<std::uint64_t>(out, t.vocab_hash());
  detail::put_le<std::uint64_t>(out, t.size());
  for (TokenId id : t.token_ids()) {
    auto pairs = t.splits(id);
    detail::put_le<std::uint32_t>(out, id);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pairs.size()));
    for (const auto& p : pairs) {
      detail::put_le<std::uint32_t>(out, p.left);
      detail::put_le<std::uint32_t>(out, p.right);
    }
  }
  return out;
}

/// Parses a cache. When `expected` is given, a vocabulary-hash mismatch raises
/// IntegrityError.
inline SplitsTable parse_splits_cache(std::string_view data, const Vocabulary* expected = nullptr) {
  detail::Reader r(data, "splits cache");
  if (r.bytes(8) != std::string_view(kSplitsMagic, 8)) throw FormatError("not a splits cache (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kSplitsFormatVersion) {
    throw VersionError("splits cache version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kSplitsFormatVersion) + ")");
  }
  r.get<std::uint32_t>();
  SplitsTable t;
  t.vocab_hash_ = r.get<std::uint64_t>();
  if (expected && expected->content_hash() != t.vocab_hash_) {
    throw IntegrityError("splits cache was built for a different vocabulary");
  }
  const auto count = r.get<std::uint64_t>();
  t.ids_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id = r.get<std::uint32_t>();
    const auto n = r.get<std::uint32_t>();
    if (!t.ids_.empty() && id <= t.ids_.back()) {
      throw CorruptHeaderError("splits cache token ids not strictly increasing");
    }
    r.need(static_cast<std::size_t>(n) * 8);
    t.ids_.push_back(id);
    for (std::uint32_t k = 0; k < n; ++k) {
      const auto left = r.get<std::uint32_t>();
      const auto right = r.get<std::uint32_t>();
      t.pairs_.push_back({left, right});
    }
    t.offsets_.push_back(static_cast<std::uint32_t>(t.pairs_.size()));
  }
  if (r.remaining() != 0) throw FormatError("splits cache has trailing bytes");
  t.build_index();
  return t;
}

inline void save_splits_cache(const SplitsTable& t, const std::filesystem::path& path) {
  write_file(path, serialize_splits_cache(t));
}

inline SplitsTable load_splits_cache(const std::filesystem::path& path,
                                     const Vocabulary* expected = nullptr) {
  return parse_splits_cache(read_file(path), expected);
}

/// Loads the cached table if it matches `v`, otherwise builds and writes it.
inline SplitsTable load_or_build_splits(const Vocabulary& v, const std::filesystem::path& cache,
                                        std::size_t workers = 1) {
  if (std::filesystem::exists(cache)) {
    try {
      return load_splits_cache(cache, &v);
    } catch (const Error&) {
      // Stale or damaged cache: rebuild below.
    }
  }
  auto t = build_splits_table(v, workers);
  save_splits_cache(t, cache);
  return t;
}

}  // namespace stochastok
