#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochastok/base64.hpp"
#include "stochastok/errors.hpp"

namespace stochastok {

using TokenId = std::uint32_t;

/// How a token sequence was produced.
enum class Origin : std::uint8_t { base, expanded, dropout, char_level };

inline const char* to_string(Origin o) {
  switch (o) {
    case Origin::base: return "base";
    case Origin::expanded: return "expanded";
    case Origin::dropout: return "dropout";
    case Origin::char_level: return "char-level";
  }
  return "?";
}

struct TokenSeq {
  std::vector<TokenId> ids;
  Origin origin = Origin::base;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

namespace detail {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a_u32(std::uint64_t h, std::uint32_t v) noexcept {
  for (int i = 0; i < 4; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace detail

/// Immutable bidirectional map between token ids and byte strings.
///
/// Ids may be sparse. Byte strings are unique across all entries. Special
/// tokens are present in the id map but absent from the reverse map, so they
/// never take part in encoding, splitting or expansion.
class Vocabulary {
 public:
  struct Entry {
    TokenId id;
    std::string bytes;
  };

  Vocabulary() = default;

  /// Validates and builds. Throws IntegrityError on duplicate ids, duplicate
  /// byte strings, empty tokens, or specials that are not entries.
  static Vocabulary from_entries(std::vector<Entry> entries,
                                 std::vector<TokenId> special_ids = {}) {
    Vocabulary v;
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].id == entries[i - 1].id) {
        throw IntegrityError("duplicate token id " + std::to_string(entries[i].id));
      }
    }
    std::sort(special_ids.begin(), special_ids.end());
    special_ids.erase(std::unique(special_ids.begin(), special_ids.end()),
                      special_ids.end());
    v.entries_ = std::move(entries);
    v.specials_ = std::move(special_ids);
    v.build_index();
    return v;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::span<const TokenId> special_ids() const noexcept { return specials_; }

  bool contains(TokenId id) const noexcept { return find_index(id).has_value(); }

  bool is_special(TokenId id) const noexcept {
    return std::binary_search(specials_.begin(), specials_.end(), id);
  }

  /// Bytes of `id`; throws LookupError (position 0) when absent.
  std::string_view bytes(TokenId id) const {
    auto idx = find_index(id);
    if (!idx) throw LookupError(id, 0);
    return entries_[*idx].bytes;
  }

  /// Non-throwing variant used on hot paths.
  const std::string* try_bytes(TokenId id) const noexcept {
    auto idx = find_index(id);
    return idx ? &entries_[*idx].bytes : nullptr;
  }

  /// Id of a non-special token with exactly these bytes.
  std::optional<TokenId> find(std::string_view bytes) const noexcept {
    auto it = reverse_.find(bytes);
    if (it == reverse_.end()) return std::nullopt;
    return it->second;
  }

  /// Single-byte token for each byte value, if any.
  std::optional<TokenId> byte_token(unsigned char b) const noexcept {
    auto t = byte_tokens_[b];
    if (t < 0) return std::nullopt;
    return static_cast<TokenId>(t);
  }

  /// Content hash over (id, bytes) in id order followed by the special ids.
  /// Shards and split caches record it to detect mismatched vocabularies.
  std::uint64_t content_hash() const noexcept { return hash_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    if (a.specials_ != b.specials_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].id != b.entries_[i].id || a.entries_[i].bytes != b.entries_[i].bytes)
        return false;
    }
    return true;
  }

 private:
  static constexpr std::uint32_t kNoIndex = 0xffffffffU;

  void build_index() {
    reverse_.clear();
    reverse_.reserve(entries_.size());
    std::unordered_map<std::string_view, TokenId> seen;
    seen.reserve(entries_.size());
    for (const auto& e : entries_) {
      if (e.bytes.empty()) {
        throw IntegrityError("token id " + std::to_string(e.id) + " has empty bytes");
      }
      auto [it, inserted] = seen.emplace(e.bytes, e.id);
      if (!inserted) {
        throw IntegrityError("byte string \"" + base64_encode(e.bytes) +
                             "\" (base64) mapped by ids " + std::to_string(it->second) +
                             " and " + std::to_string(e.id));
      }
    }
    for (TokenId s : specials_) {
      if (!std::binary_search(entries_.begin(), entries_.end(), Entry{s, {}},
                              [](const Entry& a, const Entry& b) { return a.id < b.id; })) {
        throw IntegrityError("special id " + std::to_string(s) + " is not a vocabulary entry");
      }
    }

    dense_.clear();
    const TokenId max_id = entries_.empty() ? 0 : entries_.back().id;
    if (!entries_.empty() &&
        static_cast<std::uint64_t>(max_id) < 8 * static_cast<std::uint64_t>(entries_.size()) + 65536) {
      dense_.assign(static_cast<std::size_t>(max_id) + 1, kNoIndex);
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        dense_[entries_[i].id] = static_cast<std::uint32_t>(i);
      }
    }

    byte_tokens_.fill(-1);
    std::uint64_t h = detail::kFnvOffset;
    for (const auto& e : entries_) {
      h = detail::fnv1a_u32(h, e.id);
      h = detail::fnv1a_u32(h, static_cast<std::uint32_t>(e.bytes.size()));
      h = detail::fnv1a(h, e.bytes);
      if (is_special(e.id)) continue;
      reverse_.emplace(e.bytes, e.id);
      if (e.bytes.size() == 1) {
        byte_tokens_[static_cast<unsigned char>(e.bytes[0])] = e.id;
      }
    }
    h = detail::fnv1a_u32(h, 0xffffffffU);
    for (TokenId s : specials_) h = detail::fnv1a_u32(h, s);
    hash_ = h;
  }

  std::optional<std::size_t> find_index(TokenId id) const noexcept {
    if (!dense_.empty()) {
      if (id >= dense_.size() || dense_[id] == kNoIndex) return std::nullopt;
      return dense_[id];
    }
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const Entry& e, TokenId v) { return e.id < v; });
    if (it == entries_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - entries_.begin());
  }

  std::vector<Entry> entries_;
  std::vector<TokenId> specials_;
  std::vector<std::uint32_t> dense_;
  std::unordered_map<std::string, TokenId, detail::StringHash, std::equal_to<>> reverse_;
  std::array<std::int64_t, 256> byte_tokens_{};
  std::uint64_t hash_ = detail::kFnvOffset;
};

/// Concatenation of the tokens' bytes. Throws LookupError naming the first
/// unknown id and its position.
inline std::string decode(const Vocabulary& v, std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string* b = v.try_bytes(ids[i]);
    if (!b) throw LookupError(ids[i], i);
    out += *b;
  }
  return out;
}

inline std::string decode(const Vocabulary& v, const TokenSeq& seq) {
  return decode(v, std::span<const TokenId>(seq.ids));
}

// ---------------------------------------------------------------------------
// Vocabulary files
//
// Line format (one entry per line):
//
//   # comment
//   #special 3
//   0 aA==
//   1 dQ==
//
// i.e. `<id> <base64-of-bytes>`, plus `#special <id>` declarations. Any other
// line starting with '#' is a comment; blank lines are ignored.
//
// Structured format (a JSON document, detected by a leading '{'):
//
//   {"entries": {"aA==": 0, "dQ==": 1}, "special_ids": [3]}

namespace detail {

inline TokenId parse_id(std::string_view text, std::size_t line_no) {
  if (text.empty() || text.size() > 10) {
    throw ParseError("line " + std::to_string(line_no) + ": bad token id '" +
                     std::string(text) + "'");
  }
  std::uint64_t v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') {
      throw ParseError("line " + std::to_string(line_no) + ": bad token id '" +
                       std::string(text) + "'");
    }
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  if (v > 0xffffffffULL) {
    throw ParseError("line " + std::to_string(line_no) + ": token id out of range");
  }
  return static_cast<TokenId>(v);
}

inline Vocabulary parse_vocabulary_lines(std::string_view text) {
  std::vector<Vocabulary::Entry> entries;
  std::vector<TokenId> specials;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with("#special")) {
      std::string_view rest = line.substr(8);
      if (rest.empty() || rest.front() != ' ') {
        throw ParseError("line " + std::to_string(line_no) + ": malformed #special");
      }
      specials.push_back(parse_id(rest.substr(1), line_no));
      continue;
    }
    if (line.front() == '#') continue;
    auto sp = line.find(' ');
    if (sp == std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected '<id> <base64>'");
    }
    TokenId id = parse_id(line.substr(0, sp), line_no);
    auto bytes = base64_decode(line.substr(sp + 1));
    if (!bytes) {
      throw ParseError("line " + std::to_string(line_no) + ": invalid base64 for id " +
                       std::to_string(id));
    }
    entries.push_back({id, std::move(*bytes)});
  }
  return Vocabulary::from_entries(std::move(entries), std::move(specials));
}

inline Vocabulary parse_vocabulary_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("vocabulary JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_object()) {
    throw ParseError("vocabulary JSON: missing object field 'entries'");
  }
  std::vector<Vocabulary::Entry> entries;
  for (const auto& [key, value] : doc["entries"].items()) {
    if (!value.is_number_unsigned() || value.get<std::uint64_t>() > 0xffffffffULL) {
      throw ParseError("vocabulary JSON: entry '" + key + "' has a non-id value");
    }
    auto bytes = base64_decode(key);
    if (!bytes) throw ParseError("vocabulary JSON: entry '" + key + "' is not base64");
    entries.push_back({value.get<TokenId>(), std::move(*bytes)});
  }
  std::vector<TokenId> specials;
  if (doc.contains("special_ids")) {
    if (!doc["special_ids"].is_array()) {
      throw ParseError("vocabulary JSON: 'special_ids' must be a list");
    }
    for (const auto& s : doc["special_ids"]) {
      if (!s.is_number_unsigned()) throw ParseError("vocabulary JSON: bad special id");
      specials.push_back(s.get<TokenId>());
    }
  }
  return Vocabulary::from_entries(std::move(entries), std::move(specials));
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

/// Parses either vocabulary format.
inline Vocabulary parse_vocabulary(std::string_view text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    return detail::parse_vocabulary_json(text);
  }
  return detail::parse_vocabulary_lines(text);
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(read_file(path));
}

inline std::string serialize_vocabulary(const Vocabulary& v) {
  std::string out;
  for (TokenId s : v.special_ids()) out += "#special " + std::to_string(s) + "\n";
  for (const auto& e : v.entries()) {
    out += std::to_string(e.id);
    out += ' ';
    out += base64_encode(e.bytes);
    out += '\n';
  }
  return out;
}

inline std::string serialize_vocabulary_json(const Vocabulary& v) {
  nlohmann::ordered_json doc;
  doc["entries"] = nlohmann::ordered_json::object();
  for (const auto& e : v.entries()) doc["entries"][base64_encode(e.bytes)] = e.id;
  doc["special_ids"] = std::vector<TokenId>(v.special_ids().begin(), v.special_ids().end());
  return doc.dump(1) + "\n";
}

inline void save_vocabulary(const Vocabulary& v, const std::filesystem::path& path) {
  write_file(path, serialize_vocabulary(v));
}

}  // namespace stochastok
