#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"

namespace stochastok {
namespace {

using testing::ids_of;
using testing::strings_of;
using testing::toy_merges;
using testing::toy_vocab;

using Strings = std::vector<std::string>;

// Literal reading of the expansion loop with vector insertion; consumes the
// generator in the same order as expand() and must agree with it exactly.
std::vector<TokenId> reference_expand(std::vector<TokenId> seq, const SplitsTable& t,
                                      const ExpandConfig& cfg) {
  Rng rng(cfg.seed);
  if (seq.empty()) return seq;
  const std::uint64_t n = attempt_count(seq.size(), cfg, rng);
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto i = rng.below(seq.size());
    const auto splits = t.splits(seq[i]);
    if (splits.empty()) continue;
    const auto p = splits[rng.below(splits.size())];
    seq[i] = p.right;
    seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(i), p.left);
  }
  return seq;
}

struct Fixture {
  Vocabulary v;
  MergeRules m;
  SplitsTable t;
};

Fixture trained(std::uint64_t seed, std::size_t vocab_size = 120) {
  Rng rng(seed);
  std::vector<std::string> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(testing::random_text(rng, 400));
  auto [v, m] = train_bpe(corpus, vocab_size);
  auto t = build_splits_table(v);
  return {std::move(v), std::move(m), std::move(t)};
}

TEST(Expand, FigureTwoSingleStep) {
  const auto v = Vocabulary::from_entries(
      {{0, "An"}, {1, " example"}, {2, " sentence"}, {3, " exam"}, {4, "ple"}});
  const auto t = build_splits_table(v);
  const TokenSeq in{{0, 1, 2}};
  bool saw = false;
  for (std::uint64_t seed = 0; seed < 50 && !saw; ++seed) {
    const auto out = expand(in, t, {0.34, seed, Rounding::floor});
    if (out.ids != in.ids) {
      EXPECT_EQ(strings_of(v, out.ids), (Strings{"An", " exam", "ple", " sentence"}));
      saw = true;
    }
  }
  EXPECT_TRUE(saw);
}

TEST(Expand, ZeroProportionIsIdentity) {
  const auto v = toy_vocab();
  const auto t = build_splits_table(v);
  const TokenSeq in{ids_of(v, {"hug", " ", "bug", " ", "m", "ug"})};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (auto r : {Rounding::floor, Rounding::stochastic}) {
      EXPECT_EQ(expand(in, t, {0.0, seed, r}).ids, in.ids);
    }
  }
}

TEST(Expand, HugReachesAllFourSegmentations) {
  const auto v = toy_vocab();
  const auto t = build_splits_table(v);
  std::set<Strings> seen;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (double p : {0.3, 1.0, 3.0})
      seen.insert(strings_of(v, expand({ids_of(v, {"hug"})}, t, {p, seed}).ids));
  }
  EXPECT_EQ(seen, (std::set<Strings>{{"hug"}, {"hu", "g"}, {"h", "ug"}, {"h", "u", "g"}}));
}

TEST(Expand, MugStaysWithinItsReachableSet) {
  const auto v = toy_vocab();
  const auto t = build_splits_table(v);
  const std::set<Strings> allowed = {{"m", "ug"}, {"m", "u", "g"}};
  std::set<Strings> seen;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    for (double p : {0.5, 1.0, 4.0}) {
      seen.insert(strings_of(v, expand({ids_of(v, {"m", "ug"})}, t, {p, seed}).ids));
    }
  }
  for (const auto& s : seen) EXPECT_TRUE(allowed.count(s));
  EXPECT_EQ(seen, allowed);
}

TEST(EnumerateExpansions, ToyClosures) {
  const auto v = toy_vocab();
  const auto t = build_splits_table(v);
  auto names = [&](const std::vector<TokenSeq>& seqs) {
    std::set<Strings> out;
    for (const auto& s : seqs) out.insert(strings_of(v, s.ids));
    return out;
  };
  EXPECT_EQ(names(enumerate_expansions({ids_of(v, {"hug"})}, t, 100)),
            (std::set<Strings>{{"hug"}, {"hu", "g"}, {"h", "ug"}, {"h", "u", "g"}}));
  EXPECT_EQ(names(enumerate_expansions({ids_of(v, {"h"})}, t, 100)), (std::set<Strings>{{"h"}}));
  EXPECT_EQ(names(enumerate_expansions({ids_of(v, {"bug"})}, t, 100)),
            (std::set<Strings>{{"bug"}, {"b", "ug"}, {"b", "u", "g"}}));
  EXPECT_EQ(names(enumerate_expansions({ids_of(v, {"m", "ug"})}, t, 100)),
            (std::set<Strings>{{"m", "ug"}, {"m", "u", "g"}}));
}

TEST(EnumerateExpansions, CapacityError) {
  const auto v = toy_vocab();
  const auto t = build_splits_table(v);
  const TokenSeq many{ids_of(v, {"hug", "hug", "hug", "hug", "hug"})};  // 4^5 sequences
  EXPECT_THROW(enumerate_expansions(many, t, 1000), CapacityError);
  EXPECT_EQ(enumerate_expansions(many, t, 1024).size(), 1024u);
}

TEST(Expand, UnknownTokenAndBadConfig) {
  const auto v = toy_vocab();
  const auto t = build_splits_table(v);
  try {
    expand({{1, 2, 42}}, t, {});
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_EQ(e.id(), 42u);
    EXPECT_EQ(e.position(), 2u);
  }
  EXPECT_THROW(expand({{1}}, t, {-0.1, 0}), ConfigError);
  EXPECT_THROW(expand({{1}}, t, {NAN, 0}), ConfigError);
}

TEST(Expand, AgreesWithLiteralReference) {
  const auto f = trained(1);
  const BpeEncoder enc(f.v, f.m);
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto base = enc.encode(testing::random_text(rng, rng.below(300)));
    const ExpandConfig cfg{rng.uniform() * 2.0, rng.next(),
                           rng.below(2) ? Rounding::floor : Rounding::stochastic};
    EXPECT_EQ(expand(base, f.t, cfg).ids, reference_expand(base.ids, f.t, cfg));
  }
}

TEST(Expand, Properties) {
  const auto f = trained(2);
  const BpeEncoder enc(f.v, f.m);
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto text = testing::random_text(rng, rng.below(200));
    const auto base = enc.encode(text);
    const double p = std::array{0.0, 0.05, 0.1, 0.5, 1.0}[rng.below(5)];
    const ExpandConfig cfg{p, rng.next(), rng.below(2) ? Rounding::floor : Rounding::stochastic};
    ExpandCounters c;
    const auto out = expand(base, f.t, cfg, &c);
    EXPECT_EQ(decode(f.v, out), text);
    for (auto id : out.ids) EXPECT_TRUE(f.v.contains(id));
    EXPECT_EQ(out.size(), base.size() + c.successes);
    EXPECT_LE(c.successes, c.attempts);
    EXPECT_EQ(expand(base, f.t, cfg).ids, out.ids);
    if (cfg.rounding == Rounding::floor) {
      EXPECT_EQ(c.attempts, static_cast<std::uint64_t>(std::floor(base.size() * p)));
    }
  }
}

TEST(Expand, SamplesStayInReachableSet) {
  const auto f = trained(3, 40);
  const BpeEncoder enc(f.v, f.m);
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto base = enc.encode(testing::random_text(rng, 3 + rng.below(8)));
    std::vector<TokenSeq> reach;
    try {
      reach = enumerate_expansions(base, f.t, 20000);
    } catch (const CapacityError&) {
      continue;
    }
    std::set<std::vector<TokenId>> all;
    for (const auto& r : reach) all.insert(r.ids);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      EXPECT_TRUE(all.count(expand(base, f.t, {0.5, seed}).ids));
    }
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Expand, StochasticRoundingMean) {
  const auto v = toy_vocab();
  const auto t = build_splits_table(v);
  const TokenSeq seq{std::vector<TokenId>(13, 1)};  // 13 * 0.1 = 1.3 attempts
  const int trials = 10000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < trials; ++i) {
    ExpandCounters c;
    expand(seq, t, {0.1, static_cast<std::uint64_t>(i)}, &c);
    sum += static_cast<double>(c.attempts);
    sumsq += static_cast<double>(c.attempts * c.attempts);
  }
  const double mean = sum / trials;
  const double var = sumsq / trials - mean * mean;
  EXPECT_LE(std::abs(mean - 1.3), 3 * std::sqrt(var / trials));
}

TEST(ExpandDocument, SeedDependsOnEpochAndIndexOnly) {
  const auto f = trained(4);
  const BpeEncoder enc(f.v, f.m);
  const auto base = enc.encode("abc deh fgabc habcd eabcde fgh");
  const ExpandConfig cfg{0.5, 77};
  EXPECT_EQ(expand_document(base, f.t, cfg, 1, 9).ids,
            expand(base, f.t, {0.5, derive_seed(77, 1, 9)}).ids);
  std::set<std::vector<TokenId>> outs;
  for (std::uint64_t e = 0; e < 20; ++e) outs.insert(expand_document(base, f.t, cfg, e, 0).ids);
  EXPECT_GT(outs.size(), 1u);
}

}  // namespace
}  // namespace stochastok
