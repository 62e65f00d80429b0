#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "stochastok/errors.hpp"
#include "stochastok/rng.hpp"
#include "stochastok/splits.hpp"
#include "stochastok/vocab.hpp"

namespace stochastok {

enum class Rounding : std::uint8_t { floor = 0, stochastic = 1 };

struct ExpandConfig {
  double expand_prop = 0.1;
  std::uint64_t seed = 0;
  Rounding rounding = Rounding::stochastic;
};

/// Per-call counters from the expansion loop.
struct ExpandCounters {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
};

/// Number of expand attempts for a sequence of `length` tokens. Floor mode is
/// floor(length * p). Stochastic mode adds one more attempt with probability
/// equal to the fractional part, consuming one draw from `rng` only when the
/// fractional part is non-zero.
inline std::uint64_t attempt_count(std::size_t length, const ExpandConfig& cfg, Rng& rng) {
  const double target = static_cast<double>(length) * cfg.expand_prop;
  const double whole = std::floor(target);
  auto n = static_cast<std::uint64_t>(whole);
  if (cfg.rounding == Rounding::stochastic) {
    const double frac = target - whole;
    if (frac > 0.0 && rng.uniform() < frac) ++n;
  }
  return n;
}

namespace detail {

// Fenwick tree over per-slot leaf counts, used to map a position in the
// growing sequence back to (original slot, offset within slot) in O(log n).
class LeafIndex {
 public:
  explicit LeafIndex(std::size_t n) : tree_(n + 1, 0) {
    for (std::size_t i = 1; i <= n; ++i) {
      tree_[i] += 1;
      const std::size_t parent = i + (i & (~i + 1));
      if (parent <= n) tree_[parent] += tree_[i];
    }
    top_ = 1;
    while (top_ * 2 <= n) top_ *= 2;
  }

  void add_one(std::size_t slot) {
    for (std::size_t i = slot + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }

  // Slot containing the k-th (0-based) leaf and the leaf's offset in it.
  std::pair<std::size_t, std::uint32_t> locate(std::uint64_t k) const {
    std::size_t pos = 0;
    std::uint64_t rem = k + 1;
    for (std::size_t step = top_; step > 0; step >>= 1) {
      if (pos + step < tree_.size() && tree_[pos + step] < rem) {
        pos += step;
        rem -= tree_[pos];
      }
    }
    return {pos, static_cast<std::uint32_t>(rem - 1)};
  }

 private:
  std::vector<std::uint32_t> tree_;
  std::size_t top_ = 1;
};

}  // namespace detail

/// Stochastic expansion of a base tokenization.
///
/// Performs attempt_count(len, cfg) attempts, the count fixed from the input
/// length. Each attempt picks a position uniformly over the current (growing)
/// sequence; if that token has splits, it is replaced by one pair chosen
/// uniformly from its list, otherwise the attempt is spent. The output decodes
/// to exactly the same bytes as the input.
inline TokenSeq expand(const TokenSeq& seq, const SplitsTable& table, const ExpandConfig& cfg,
                       ExpandCounters* counters = nullptr) {
  if (!(cfg.expand_prop >= 0.0) || !std::isfinite(cfg.expand_prop)) {
    throw ConfigError("expand_prop must be a finite value >= 0");
  }
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (!table.covers(seq.ids[i])) throw LookupError(seq.ids[i], i);
  }

  Rng rng(cfg.seed);
  const std::size_t n = seq.ids.size();
  const std::uint64_t attempts = n == 0 ? 0 : attempt_count(n, cfg, rng);
  if (counters) counters->attempts += attempts;
  if (attempts == 0) return TokenSeq{seq.ids, Origin::expanded};

  constexpr std::uint32_t kUntouched = 0xffffffffU;
  detail::LeafIndex index(n);
  std::vector<std::uint32_t> slot_list(n, kUntouched);
  std::vector<std::vector<TokenId>> lists;
  std::uint64_t length = n;
  std::uint64_t successes = 0;

  for (std::uint64_t a = 0; a < attempts; ++a) {
    const auto [slot, offset] = index.locate(rng.below(length));
    const TokenId t =
        slot_list[slot] == kUntouched ? seq.ids[slot] : lists[slot_list[slot]][offset];
    const auto choices = table.splits_or_empty(t);
    if (choices.empty()) continue;
    const SplitPair pick = choices[rng.below(choices.size())];
    if (slot_list[slot] == kUntouched) {
      slot_list[slot] = static_cast<std::uint32_t>(lists.size());
      lists.push_back({pick.left, pick.right});
    } else {
      auto& leaves = lists[slot_list[slot]];
      leaves[offset] = pick.right;
      leaves.insert(leaves.begin() + offset, pick.left);
    }
    index.add_one(slot);
    ++length;
    ++successes;
  }
  if (counters) counters->successes += successes;

  TokenSeq out{{}, Origin::expanded};
  out.ids.reserve(length);
  for (std::size_t s = 0; s < n; ++s) {
    if (slot_list[s] == kUntouched) {
      out.ids.push_back(seq.ids[s]);
    } else {
      const auto& leaves = lists[slot_list[s]];
      out.ids.insert(out.ids.end(), leaves.begin(), leaves.end());
    }
  }
  return out;
}

/// Expansion of document `index` in pass `epoch`: the seed is
/// derive_seed(cfg.seed, epoch, index), so results do not depend on the order
/// or grouping in which documents are processed.
inline TokenSeq expand_document(const TokenSeq& seq, const SplitsTable& table,
                                const ExpandConfig& cfg, std::uint64_t epoch, std::uint64_t index,
                                ExpandCounters* counters = nullptr) {
  ExpandConfig doc_cfg = cfg;
  doc_cfg.seed = derive_seed(cfg.seed, epoch, index);
  return expand(seq, table, doc_cfg, counters);
}

/// Every sequence reachable from `seq` by zero or more single-token
/// expansions, in lexicographic order of ids. Throws CapacityError once more
/// than `max_outputs` sequences are found.
inline std::vector<TokenSeq> enumerate_expansions(const TokenSeq& seq, const SplitsTable& table,
                                                  std::size_t max_outputs) {
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (!table.covers(seq.ids[i])) throw LookupError(seq.ids[i], i);
  }
  std::set<std::vector<TokenId>> seen{seq.ids};
  std::vector<std::vector<TokenId>> frontier{seq.ids};
  while (!frontier.empty()) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& cur : frontier) {
      for (std::size_t i = 0; i < cur.size(); ++i) {
        for (const auto& p : table.splits_or_empty(cur[i])) {
          std::vector<TokenId> child;
          child.reserve(cur.size() + 1);
          child.insert(child.end(), cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(i));
          child.push_back(p.left);
          child.push_back(p.right);
          child.insert(child.end(), cur.begin() + static_cast<std::ptrdiff_t>(i) + 1, cur.end());
          if (seen.insert(child).second) {
            if (seen.size() > max_outputs) {
              throw CapacityError("reachable set exceeds " + std::to_string(max_outputs) +
                                  " sequences");
            }
            next.push_back(std::move(child));
          }
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<TokenSeq> out;
  out.reserve(seen.size());
  for (const auto& s : seen) out.push_back({s, s == seq.ids ? seq.origin : Origin::expanded});
  return out;
}

}  // namespace stochastok
