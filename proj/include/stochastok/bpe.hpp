#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stochastok/errors.hpp"
#include "stochastok/rng.hpp"
#include "stochastok/vocab.hpp"

namespace stochastok {

/// Ordered BPE merge pairs; rank is the list index (lower merges first).
struct MergeRules {
  std::vector<std::pair<std::string, std::string>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  friend bool operator==(const MergeRules&, const MergeRules&) = default;
};

struct DropoutConfig {
  double drop_prob = 0.1;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  // Pairs seen fewer times than this are never merged.
  std::uint64_t min_frequency = 2;
};

namespace detail {

constexpr std::uint64_t pair_key(TokenId l, TokenId r) noexcept {
  return (static_cast<std::uint64_t>(l) << 32) | r;
}

}  // namespace detail

/// Compiled (Vocabulary, MergeRules) pair. Holds references to neither; the
/// vocabulary is copied in so an encoder can be shared across worker threads.
class BpeEncoder {
 public:
  BpeEncoder(const Vocabulary& vocab, const MergeRules& merges) : vocab_(vocab) {
    table_.reserve(merges.size() * 2);
    for (std::size_t rank = 0; rank < merges.size(); ++rank) {
      const auto& [l, r] = merges.pairs[rank];
      auto lid = vocab.find(l);
      auto rid = vocab.find(r);
      auto mid = vocab.find(l + r);
      if (!lid || !rid || !mid) {
        throw IntegrityError("merge rule " + std::to_string(rank) + " (" + base64_encode(l) +
                             " " + base64_encode(r) +
                             ") references a byte string missing from the vocabulary");
      }
      auto [it, inserted] = table_.emplace(detail::pair_key(*lid, *rid),
                                           Merge{static_cast<std::uint32_t>(rank), *mid});
      if (!inserted) {
        throw IntegrityError("duplicate merge pair at rank " + std::to_string(rank));
      }
    }
  }

  const Vocabulary& vocabulary() const noexcept { return vocab_; }

  /// One token per byte. Throws CoverageError for bytes with no token.
  TokenSeq encode_char(std::string_view text) const {
    TokenSeq out{{}, Origin::char_level};
    out.ids.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      out.ids.push_back(byte_token(text, i));
    }
    return out;
  }

  /// Deterministic BPE: repeatedly applies the lowest-rank applicable merge,
  /// leftmost occurrence first, until none applies.
  TokenSeq encode(std::string_view text) const {
    TokenSeq out = run(text, nullptr, 0.0);
    out.origin = Origin::base;
    return out;
  }

  /// BPE-dropout: every merge-application event is skipped independently with
  /// probability cfg.drop_prob. A skipped event is discarded; the same pair of
  /// symbols is offered again only if one of its neighbours changes.
  TokenSeq encode_dropout(std::string_view text, const DropoutConfig& cfg) const {
    if (!(cfg.drop_prob >= 0.0 && cfg.drop_prob <= 1.0)) {
      throw ConfigError("drop_prob must lie in [0, 1]");
    }
    Rng rng(cfg.seed);
    TokenSeq out = run(text, &rng, cfg.drop_prob);
    out.origin = Origin::dropout;
    return out;
  }

 private:
  struct Merge {
    std::uint32_t rank;
    TokenId merged;
  };

  struct Candidate {
    std::uint32_t rank;
    std::uint32_t left;
    std::uint32_t right;
    TokenId left_tok;
    TokenId right_tok;
    TokenId merged;

    // Min-heap on (rank, left position).
    bool operator<(const Candidate& o) const noexcept {
      if (rank != o.rank) return rank > o.rank;
      return left > o.left;
    }
  };

  static constexpr std::uint32_t kNone = 0xffffffffU;

  TokenId byte_token(std::string_view text, std::size_t i) const {
    auto t = vocab_.byte_token(static_cast<unsigned char>(text[i]));
    if (!t) throw CoverageError(static_cast<unsigned char>(text[i]), i);
    return *t;
  }

  const Merge* lookup(TokenId l, TokenId r) const noexcept {
    auto it = table_.find(detail::pair_key(l, r));
    return it == table_.end() ? nullptr : &it->second;
  }

  TokenSeq run(std::string_view text, Rng* rng, double drop_prob) const {
    const std::size_t n = text.size();
    if (n > 0xfffffffeU) throw ConfigError("text too long for a single document");
    std::vector<TokenId> tok(n);
    std::vector<std::uint32_t> prev(n), next(n);
    for (std::size_t i = 0; i < n; ++i) {
      tok[i] = byte_token(text, i);
      prev[i] = i == 0 ? kNone : static_cast<std::uint32_t>(i - 1);
      next[i] = i + 1 == n ? kNone : static_cast<std::uint32_t>(i + 1);
    }

    std::vector<Candidate> storage;
    storage.reserve(n);
    std::priority_queue<Candidate> heap(std::less<Candidate>{}, std::move(storage));
    auto offer = [&](std::uint32_t l, std::uint32_t r) {
      if (l == kNone || r == kNone) return;
      if (const Merge* m = lookup(tok[l], tok[r])) {
        heap.push({m->rank, l, r, tok[l], tok[r], m->merged});
      }
    };
    for (std::size_t i = 0; i + 1 < n; ++i) {
      offer(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1));
    }

    constexpr TokenId kDead = 0xffffffffU;
    while (!heap.empty()) {
      const Candidate c = heap.top();
      heap.pop();
      // Stale if either side was merged away or changed. Tokens only grow, so
      // an unchanged id at an unchanged adjacency means the pair is current.
      if (tok[c.left] != c.left_tok || tok[c.right] != c.right_tok || next[c.left] != c.right) {
        continue;
      }
      if (rng && drop_prob > 0.0 && rng->uniform() < drop_prob) continue;
      tok[c.left] = c.merged;
      tok[c.right] = kDead;
      const std::uint32_t after = next[c.right];
      next[c.left] = after;
      if (after != kNone) prev[after] = c.left;
      offer(prev[c.left], c.left);
      offer(c.left, after);
    }

    TokenSeq out;
    if (n == 0) return out;
    out.ids.reserve(n);
    for (std::uint32_t i = 0; i != kNone; i = next[i]) out.ids.push_back(tok[i]);
    return out;
  }

  Vocabulary vocab_;
  std::unordered_map<std::uint64_t, Merge> table_;
};

inline TokenSeq encode_bpe(const Vocabulary& v, const MergeRules& m, std::string_view text) {
  return BpeEncoder(v, m).encode(text);
}

inline TokenSeq encode_bpe_dropout(const Vocabulary& v, const MergeRules& m,
                                   std::string_view text, const DropoutConfig& cfg) {
  return BpeEncoder(v, m).encode_dropout(text, cfg);
}

inline TokenSeq encode_char(const Vocabulary& v, std::string_view text) {
  TokenSeq out{{}, Origin::char_level};
  out.ids.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto t = v.byte_token(static_cast<unsigned char>(text[i]));
    if (!t) throw CoverageError(static_cast<unsigned char>(text[i]), i);
    out.ids.push_back(*t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

/// Byte-level BPE trainer. The initial vocabulary is the set of distinct
/// bytes in the corpus, ids assigned in ascending byte order. Each round merges
/// the most frequent adjacent pair (overlapping occurrences counted; pairs never
/// span document boundaries), ties broken by the lexicographically smallest
/// (left, right) byte strings. Training stops at `target_vocab_size` tokens or
/// when no pair reaches `min_frequency`.
inline std::pair<Vocabulary, MergeRules> train_bpe(std::span<const std::string> documents,
                                                   std::size_t target_vocab_size,
                                                   const TrainOptions& opts = {}) {
  std::array<bool, 256> present{};
  std::size_t total_bytes = 0;
  for (const auto& d : documents) {
    for (unsigned char c : d) present[c] = true;
    total_bytes += d.size();
  }
  if (total_bytes == 0) throw ConfigError("training corpus is empty");

  std::vector<std::string> token_bytes;
  std::unordered_map<std::string, TokenId> by_bytes;
  std::array<TokenId, 256> byte_id{};
  for (int b = 0; b < 256; ++b) {
    if (!present[b]) continue;
    byte_id[b] = static_cast<TokenId>(token_bytes.size());
    token_bytes.emplace_back(1, static_cast<char>(b));
    by_bytes.emplace(token_bytes.back(), byte_id[b]);
  }
  if (target_vocab_size < token_bytes.size()) {
    throw ConfigError("target vocabulary size " + std::to_string(target_vocab_size) +
                      " is below the corpus byte alphabet size " +
                      std::to_string(token_bytes.size()));
  }

  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(documents.size());
  for (const auto& d : documents) {
    std::vector<TokenId> s;
    s.reserve(d.size());
    for (unsigned char c : d) s.push_back(byte_id[c]);
    if (s.size() >= 2) seqs.push_back(std::move(s));
  }

  MergeRules merges;
  std::unordered_set<std::uint64_t> recorded;
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  while (token_bytes.size() < target_vocab_size) {
    counts.clear();
    for (const auto& s : seqs) {
      for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[detail::pair_key(s[i], s[i + 1])];
    }
    std::uint64_t best_key = 0, best_count = 0;
    for (const auto& [key, count] : counts) {
      if (count < best_count) continue;
      if (count == best_count) {
        const auto& bl = token_bytes[best_key >> 32];
        const auto& br = token_bytes[best_key & 0xffffffffU];
        const auto& kl = token_bytes[key >> 32];
        const auto& kr = token_bytes[key & 0xffffffffU];
        if (std::tie(kl, kr) >= std::tie(bl, br)) continue;
      }
      best_key = key;
      best_count = count;
    }
    if (best_count == 0 || best_count < opts.min_frequency) break;

    const TokenId left = static_cast<TokenId>(best_key >> 32);
    const TokenId right = static_cast<TokenId>(best_key & 0xffffffffU);
    std::string merged = token_bytes[left] + token_bytes[right];
    TokenId merged_id;
    if (auto it = by_bytes.find(merged); it != by_bytes.end()) {
      merged_id = it->second;
    } else {
      merged_id = static_cast<TokenId>(token_bytes.size());
      by_bytes.emplace(merged, merged_id);
      token_bytes.push_back(merged);
    }
    if (recorded.insert(best_key).second) {
      merges.pairs.emplace_back(token_bytes[left], token_bytes[right]);
    }

    for (auto& s : seqs) {
      std::size_t w = 0;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
          s[w++] = merged_id;
          i += 2;
        } else {
          s[w++] = s[i++];
        }
      }
      s.resize(w);
    }
    std::erase_if(seqs, [](const std::vector<TokenId>& s) { return s.size() < 2; });
  }

  std::vector<Vocabulary::Entry> entries;
  entries.reserve(token_bytes.size());
  for (std::size_t i = 0; i < token_bytes.size(); ++i) {
    entries.push_back({static_cast<TokenId>(i), std::move(token_bytes[i])});
  }
  return {Vocabulary::from_entries(std::move(entries)), std::move(merges)};
}

inline std::pair<Vocabulary, MergeRules> train_bpe(std::string_view corpus,
                                                   std::size_t target_vocab_size,
                                                   const TrainOptions& opts = {}) {
  const std::string doc(corpus);
  return train_bpe(std::span<const std::string>(&doc, 1), target_vocab_size, opts);
}

// ---------------------------------------------------------------------------
// Merge-rules file: `<base64-left> <base64-right>` per line, in rank order.
// Blank lines and lines starting with '#' are ignored.

inline MergeRules parse_merges(std::string_view text) {
  MergeRules out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    auto sp = line.find(' ');
    std::optional<std::string> l, r;
    if (sp != std::string_view::npos) {
      l = base64_decode(line.substr(0, sp));
      r = base64_decode(line.substr(sp + 1));
    }
    if (!l || !r || l->empty() || r->empty()) {
      throw ParseError("merges line " + std::to_string(line_no) +
                       ": expected '<base64-left> <base64-right>'");
    }
    out.pairs.emplace_back(std::move(*l), std::move(*r));
  }
  return out;
}

inline MergeRules load_merges(const std::filesystem::path& path) {
  return parse_merges(read_file(path));
}

inline std::string serialize_merges(const MergeRules& m) {
  std::string out;
  for (const auto& [l, r] : m.pairs) {
    out += base64_encode(l);
    out += ' ';
    out += base64_encode(r);
    out += '\n';
  }
  return out;
}

inline void save_merges(const MergeRules& m, const std::filesystem::path& path) {
  write_file(path, serialize_merges(m));
}

}  // namespace stochastok
