#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stochastok/byte_io.hpp"
#include "stochastok/errors.hpp"
#include "stochastok/expand.hpp"
#include "stochastok/vocab.hpp"

namespace stochastok {

// Shard file layout, all integers little-endian:
//
//   offset  size  field
//   0       8     magic "STKSHARD"
//   8       4     format version (u32) = 1
//   12      4     kind (u32): 0 = base tokens, 1 = expanded
//   16      8     vocabulary content hash (u64)
//   24      8     document count D (u64)
//   32      8     total token count T (u64)
//   40      8     expand_prop (IEEE-754 binary64; 0 for base shards)
//   48      8     expand seed (u64)
//   56      8     epoch (u64)
//   64      4     rounding (u32): 0 = floor, 1 = stochastic
//   68      4     reserved, zero
//   72      8*(D+1)  document offsets (u64), offsets[0] = 0, offsets[D] = T
//   ...     4*T   token ids (u32)
//
// Offsets are strictly increasing: documents are never empty.

inline constexpr char kShardMagic[8] = {'S', 'T', 'K', 'S', 'H', 'A', 'R', 'D'};
inline constexpr std::uint32_t kShardFormatVersion = 1;
inline constexpr std::size_t kShardHeaderSize = 72;

enum class ShardKind : std::uint32_t { base = 0, expanded = 1 };

struct ShardHeader {
  ShardKind kind = ShardKind::base;
  std::uint64_t vocab_hash = 0;
  std::uint64_t doc_count = 0;
  std::uint64_t total_tokens = 0;
  double expand_prop = 0.0;
  std::uint64_t expand_seed = 0;
  std::uint64_t epoch = 0;
  Rounding rounding = Rounding::floor;

  friend bool operator==(const ShardHeader&, const ShardHeader&) = default;
};

/// In-memory shard: header fields plus a flat token array and offset index.
struct Shard {
  ShardHeader header;
  std::vector<std::uint64_t> offsets{0};
  std::vector<TokenId> tokens;

  std::size_t doc_count() const noexcept { return offsets.size() - 1; }

  std::span<const TokenId> document(std::size_t i) const {
    return std::span<const TokenId>(tokens).subspan(offsets[i], offsets[i + 1] - offsets[i]);
  }

  /// Appends a non-empty document.
  void add_document(std::span<const TokenId> ids) {
    if (ids.empty()) throw ConfigError("shard documents must be non-empty");
    tokens.insert(tokens.end(), ids.begin(), ids.end());
    offsets.push_back(tokens.size());
    header.doc_count = doc_count();
    header.total_tokens = tokens.size();
  }

  friend bool operator==(const Shard&, const Shard&) = default;
};

inline std::string serialize_shard(const Shard& s) {
  if (s.offsets.empty() || s.offsets.back() != s.tokens.size()) {
    throw CorruptHeaderError("shard offset index does not match its token count");
  }
  std::string out;
  out.reserve(kShardHeaderSize + 8 * s.offsets.size() + 4 * s.tokens.size());
  out.append(kShardMagic, 8);
  detail::put_le<std::uint32_t>(out, kShardFormatVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.header.kind));
  detail::put_le<std::uint64_t>(out, s.header.vocab_hash);
  detail::put_le<std::uint64_t>(out, s.doc_count());
  detail::put_le<std::uint64_t>(out, s.tokens.size());
  detail::put_f64(out, s.header.expand_prop);
  detail::put_le<std::uint64_t>(out, s.header.expand_seed);
  detail::put_le<std::uint64_t>(out, s.header.epoch);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.header.rounding));
  detail::put_le<std::uint32_t>(out, 0);
  for (auto o : s.offsets) detail::put_le<std::uint64_t>(out, o);
  for (auto t : s.tokens) detail::put_le<std::uint32_t>(out, t);
  return out;
}

/// Errors: FormatError (bad magic, unknown kind, trailing bytes), VersionError,
/// TruncationError (file shorter than its header claims), CorruptHeaderError
/// (offset index violates its invariants).
inline Shard parse_shard(std::string_view data) {
  detail::Reader r(data, "shard");
  if (data.size() >= 8 && data.substr(0, 8) != std::string_view(kShardMagic, 8)) {
    throw FormatError("not a shard file (bad magic)");
  }
  r.bytes(8);
  const auto version = r.get<std::uint32_t>();
  if (version != kShardFormatVersion) {
    throw VersionError("shard format version " + std::to_string(version) +
                       " unsupported (expected " + std::to_string(kShardFormatVersion) + ")");
  }
  Shard s;
  const auto kind = r.get<std::uint32_t>();
  if (kind > 1) throw FormatError("unknown shard kind " + std::to_string(kind));
  s.header.kind = static_cast<ShardKind>(kind);
  s.header.vocab_hash = r.get<std::uint64_t>();
  s.header.doc_count = r.get<std::uint64_t>();
  s.header.total_tokens = r.get<std::uint64_t>();
  s.header.expand_prop = r.get_f64();
  s.header.expand_seed = r.get<std::uint64_t>();
  s.header.epoch = r.get<std::uint64_t>();
  const auto rounding = r.get<std::uint32_t>();
  if (rounding > 1) throw CorruptHeaderError("unknown rounding mode " + std::to_string(rounding));
  s.header.rounding = static_cast<Rounding>(rounding);
  r.get<std::uint32_t>();

  const auto docs = s.header.doc_count, total = s.header.total_tokens;
  if (docs > total) throw CorruptHeaderError("more documents than tokens");
  // Guard the size arithmetic before reserving anything.
  if (docs > data.size() / 8 || total > data.size() / 4) {
    throw TruncationError("shard: header claims " + std::to_string(docs) + " documents and " +
                          std::to_string(total) + " tokens but file has " +
                          std::to_string(data.size()) + " bytes");
  }
  r.need(8 * (docs + 1) + 4 * total);
  s.offsets.clear();
  s.offsets.reserve(docs + 1);
  for (std::uint64_t i = 0; i <= docs; ++i) {
    const auto o = r.get<std::uint64_t>();
    if (i == 0 && o != 0) throw CorruptHeaderError("first document offset is not 0");
    if (i > 0 && o <= s.offsets.back()) {
      throw CorruptHeaderError("document offsets not strictly increasing at document " +
                               std::to_string(i - 1));
    }
    s.offsets.push_back(o);
  }
  if (s.offsets.back() != total) {
    throw CorruptHeaderError("final offset " + std::to_string(s.offsets.back()) +
                             " != total token count " + std::to_string(total));
  }
  s.tokens.resize(total);
  const auto payload = r.bytes(4 * total);
  for (std::uint64_t i = 0; i < total; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(payload.data()) + 4 * i;
    s.tokens[i] = static_cast<TokenId>(p[0]) | (static_cast<TokenId>(p[1]) << 8) |
                  (static_cast<TokenId>(p[2]) << 16) | (static_cast<TokenId>(p[3]) << 24);
  }
  if (r.remaining() != 0) throw FormatError("shard has trailing bytes");
  return s;
}

inline void write_shard(const Shard& s, const std::filesystem::path& path) {
  write_file(path, serialize_shard(s));
}

inline Shard read_shard(const std::filesystem::path& path) {
  try {
    return parse_shard(read_file(path));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    // Re-raise the same class with the file name attached.
    const std::string msg = path.string() + ": " + e.what();
    if (dynamic_cast<const TruncationError*>(&e)) throw TruncationError(msg);
    if (dynamic_cast<const VersionError*>(&e)) throw VersionError(msg);
    if (dynamic_cast<const CorruptHeaderError*>(&e)) throw CorruptHeaderError(msg);
    throw FormatError(msg);
  }
}

}  // namespace stochastok
