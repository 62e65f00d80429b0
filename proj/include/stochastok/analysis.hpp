#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochastok/bpe.hpp"
#include "stochastok/expand.hpp"
#include "stochastok/pipeline.hpp"
#include "stochastok/shard.hpp"
#include "stochastok/splits.hpp"

namespace stochastok {

/// Instrumentation of expansion runs. Histograms are keyed by token byte
/// length and count token occurrences.
struct ExpansionStats {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  std::map<std::size_t, std::uint64_t> length_hist_before;
  std::map<std::size_t, std::uint64_t> length_hist_after;

  bool accounting_holds() const noexcept {
    return output_tokens == input_tokens + successes && successes <= attempts;
  }
};

/// Expands each document (seed derived from cfg.seed and its index, epoch 0)
/// and accumulates statistics. Returns the expanded documents through `out`
/// when given.
inline ExpansionStats measure_expansion(const Vocabulary& v, std::span<const TokenSeq> docs,
                                        const SplitsTable& table, const ExpandConfig& cfg,
                                        std::vector<TokenSeq>* out = nullptr) {
  ExpansionStats st;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    ExpandCounters c;
    TokenSeq e = expand_document(docs[i], table, cfg, 0, i, &c);
    st.attempts += c.attempts;
    st.successes += c.successes;
    st.input_tokens += docs[i].size();
    st.output_tokens += e.size();
    for (TokenId t : docs[i].ids) ++st.length_hist_before[v.bytes(t).size()];
    for (TokenId t : e.ids) ++st.length_hist_after[v.bytes(t).size()];
    if (out) out->push_back(std::move(e));
  }
  return st;
}

struct CompressionReport {
  std::uint64_t bytes = 0;
  std::uint64_t bpe_tokens = 0;
  std::uint64_t dropout_tokens = 0;
  std::uint64_t stochastok_tokens = 0;
  std::uint64_t char_tokens = 0;
  double dropout_p = 0.0;
  double stochastok_p = 0.0;
  ExpansionStats stochastok_stats;

  double ratio(std::uint64_t tokens) const noexcept {
    return bytes == 0 ? 0.0 : static_cast<double>(tokens) / static_cast<double>(bytes);
  }
  double bpe_ratio() const noexcept { return ratio(bpe_tokens); }
  double dropout_ratio() const noexcept { return ratio(dropout_tokens); }
  double stochastok_ratio() const noexcept { return ratio(stochastok_tokens); }
  double char_ratio() const noexcept { return ratio(char_tokens); }
};

/// Tokens per byte for each encoder over the same documents. Dropout and
/// expansion seeds are derived per document from `seed`.
inline CompressionReport compression_ratio(const BpeEncoder& enc, const SplitsTable& table,
                                           std::span<const std::string_view> corpus,
                                           double dropout_p, double stochastok_p,
                                           std::uint64_t seed,
                                           Rounding rounding = Rounding::stochastic) {
  CompressionReport r;
  r.dropout_p = dropout_p;
  r.stochastok_p = stochastok_p;
  std::vector<TokenSeq> base;
  base.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto text = corpus[i];
    r.bytes += text.size();
    base.push_back(enc.encode(text));
    r.bpe_tokens += base.back().size();
    r.char_tokens += enc.encode_char(text).size();
    r.dropout_tokens +=
        enc.encode_dropout(text, DropoutConfig{dropout_p, derive_seed(seed, 1, i)}).size();
  }
  r.stochastok_stats = measure_expansion(enc.vocabulary(), base, table,
                                         ExpandConfig{stochastok_p, seed, rounding});
  r.stochastok_tokens = r.stochastok_stats.output_tokens;
  return r;
}

/// Empirical distribution of expand() outputs for one word over `trials`
/// seeds (trial k uses derive_seed(cfg.seed, 0, k)). The reachable set is
/// enumerated first (max_reachable caps it, raising CapacityError), and the
/// returned support is always a subset of it.
inline std::map<std::vector<TokenId>, double> tokenization_distribution(
    std::string_view word, const BpeEncoder& enc, const SplitsTable& table,
    const ExpandConfig& cfg, std::uint64_t trials, std::size_t max_reachable = 100000) {
  const TokenSeq base = enc.encode(word);
  const auto reachable = enumerate_expansions(base, table, max_reachable);
  std::map<std::vector<TokenId>, std::uint64_t> counts;
  for (std::uint64_t k = 0; k < trials; ++k) {
    ++counts[expand_document(base, table, cfg, 0, k).ids];
  }
  std::map<std::vector<TokenId>, double> dist;
  for (const auto& [seq, c] : counts) {
    const bool known = std::any_of(reachable.begin(), reachable.end(),
                                   [&](const TokenSeq& r) { return r.ids == seq; });
    if (!known) throw IntegrityError("expansion produced a sequence outside the reachable set");
    dist[seq] = static_cast<double>(c) / static_cast<double>(trials);
  }
  return dist;
}

struct BenchReport {
  std::uint64_t documents = 0;
  std::uint64_t tokens = 0;
  std::size_t workers = 1;
  double single_seconds = 0.0;       // median, 1 worker, input as given
  double multi_seconds = 0.0;        // median, `workers` workers
  double doubled_seconds = 0.0;      // median, 1 worker, input repeated twice
  double single_tokens_per_sec = 0.0;
  double multi_tokens_per_sec = 0.0;
  double scaling_ratio = 0.0;        // median of paired doubled/single times
  bool linear = true;                // scaling_ratio within [1.5, 2.5]

  nlohmann::ordered_json to_json() const {
    return {{"documents", documents},
            {"tokens", tokens},
            {"workers", workers},
            {"single_seconds", single_seconds},
            {"multi_seconds", multi_seconds},
            {"doubled_seconds", doubled_seconds},
            {"single_tokens_per_sec", single_tokens_per_sec},
            {"multi_tokens_per_sec", multi_tokens_per_sec},
            {"scaling_ratio", scaling_ratio},
            {"linear", linear}};
  }
};

namespace detail {

template <typename F>
double seconds(F&& work) {
  const auto start = std::chrono::steady_clock::now();
  work();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

}  // namespace detail

/// Expansion throughput over a shard: 3 discarded warm-up passes, median of 5
/// timed passes. The scaling check times the same shard with every document
/// repeated (twice the tokens) and expects the time ratio in [1.5, 2.5].
/// Single and doubled passes alternate so that machine drift hits both, and
/// the reported ratio is the median of the per-pair ratios.
inline BenchReport benchmark_expansion(const Shard& shard, const SplitsTable& table,
                                       const ExpandConfig& cfg, std::size_t workers = 1,
                                       int warmup = 3, int runs = 5) {
  BenchReport r;
  r.documents = shard.doc_count();
  r.tokens = shard.tokens.size();
  r.workers = workers;
  if (r.tokens == 0) return r;

  Shard doubled;
  doubled.header = shard.header;
  for (int rep = 0; rep < 2; ++rep) {
    for (std::size_t i = 0; i < shard.doc_count(); ++i) doubled.add_document(shard.document(i));
  }
  auto pass = [&](const Shard& s, std::size_t w) {
    return detail::seconds([&] { (void)expand_shard(s, table, cfg, 0, 0, w); });
  };
  for (int i = 0; i < warmup; ++i) {
    pass(shard, 1);
    pass(doubled, 1);
  }
  std::vector<double> single, twice, ratios, multi;
  for (int i = 0; i < runs; ++i) {
    single.push_back(pass(shard, 1));
    twice.push_back(pass(doubled, 1));
    if (single.back() > 0) ratios.push_back(twice.back() / single.back());
    if (workers > 1) multi.push_back(pass(shard, workers));
  }
  r.single_seconds = detail::median(single);
  r.doubled_seconds = detail::median(twice);
  r.multi_seconds = workers > 1 ? detail::median(multi) : r.single_seconds;
  const auto tps = [&](double s) { return s > 0 ? static_cast<double>(r.tokens) / s : 0.0; };
  r.single_tokens_per_sec = tps(r.single_seconds);
  r.multi_tokens_per_sec = tps(r.multi_seconds);
  r.scaling_ratio = detail::median(ratios);
  r.linear = r.scaling_ratio >= 1.5 && r.scaling_ratio <= 2.5;
  return r;
}

}  // namespace stochastok
