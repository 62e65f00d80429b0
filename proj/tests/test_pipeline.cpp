#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"

namespace stochastok {
namespace {

namespace fs = std::filesystem;
using testing::ids_of;
using testing::toy_merges;
using testing::toy_vocab;

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("stochastok_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

Vocabulary toy_vocab_with_newline() {
  const auto base = toy_vocab();
  std::vector<Vocabulary::Entry> entries(base.entries().begin(), base.entries().end());
  entries.push_back({10, "\n"});
  return Vocabulary::from_entries(std::move(entries));
}

std::string file_bytes(const fs::path& p) { return read_file(p); }

// Every file in a directory, by name, with contents.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = file_bytes(e.path());
  return out;
}

struct Corpus {
  Vocabulary v;
  MergeRules m;
  SplitsTable t;
  std::string text;
};

const Corpus& line_corpus() {
  static const Corpus c = [] {
    Rng rng(99);
    std::string text;
    for (int i = 0; i < 1000; ++i) text += testing::random_text(rng, 5 + rng.below(80)) + "\n";
    std::vector<std::string> train;
    for (int i = 0; i < 20; ++i) train.push_back(testing::random_text(rng, 500) + "\n");
    auto [v, m] = train_bpe(train, 150);
    auto t = build_splits_table(v);
    return Corpus{std::move(v), std::move(m), std::move(t), std::move(text)};
  }();
  return c;
}

TEST(Pipeline, TwoDocumentShard) {
  TempDir dir("two_docs");
  write_file(dir / "a.txt", "hug");
  write_file(dir / "b.txt", "bug");
  const auto v = toy_vocab();
  const BpeEncoder enc(v, toy_merges());
  PipelineConfig cfg;
  cfg.inputs = {dir / "a.txt", dir / "b.txt"};
  cfg.output_dir = dir / "out";
  cfg.whole_file_documents = true;
  const auto report = tokenize_corpus(cfg, enc);
  EXPECT_TRUE(report.skipped.empty());
  ASSERT_EQ(report.manifest.shards.size(), 1u);
  const auto shard = read_shard(dir.path() / "out" / report.manifest.shards[0].path);
  EXPECT_EQ(shard.offsets, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(shard.tokens, ids_of(v, {"hug", "bug"}));
  EXPECT_EQ(shard.header.vocab_hash, v.content_hash());
  EXPECT_EQ(shard.header.kind, ShardKind::base);
  EXPECT_EQ(decode_corpus(dir / "out", v), "hugbug");
}

TEST(Pipeline, EmptyCorpus) {
  TempDir dir("empty");
  write_file(dir / "empty.txt", "");
  const BpeEncoder enc(toy_vocab(), toy_merges());
  PipelineConfig cfg;
  cfg.inputs = {dir / "empty.txt"};
  cfg.output_dir = dir / "out";
  const auto report = tokenize_corpus(cfg, enc);
  ASSERT_EQ(report.manifest.shards.size(), 1u);
  const auto shard = read_shard(dir.path() / "out" / report.manifest.shards[0].path);
  EXPECT_EQ(shard.doc_count(), 0u);
  EXPECT_TRUE(shard.tokens.empty());
  EXPECT_EQ(report.manifest.documents(), 0u);
}

TEST(Pipeline, CoverageFailuresSkipTheDocument) {
  TempDir dir("coverage");
  write_file(dir / "in.txt", "hug hug\nhux\nbug\n");
  const auto v = toy_vocab_with_newline();
  const BpeEncoder enc(v, toy_merges());
  PipelineConfig cfg;
  cfg.inputs = {dir / "in.txt"};
  cfg.output_dir = dir / "out";
  const auto report = tokenize_corpus(cfg, enc);
  ASSERT_EQ(report.skipped.size(), 1u);
  EXPECT_EQ(report.skipped[0].document, 1u);
  EXPECT_NE(report.skipped[0].reason.find("offset 2"), std::string::npos) << report.skipped[0].reason;
  EXPECT_EQ(report.manifest.documents(), 2u);
  EXPECT_EQ(decode_corpus(dir / "out", v), "hug hug\nbug\n");
}

TEST(Pipeline, DecodeReproducesInputAndIsWorkerIndependent) {
  const auto& c = line_corpus();
  TempDir dir("workers");
  write_file(dir / "in.txt", c.text);
  const BpeEncoder enc(c.v, c.m);
  std::map<std::string, std::string> first;
  for (std::size_t workers : {1u, 4u, 16u, 1u}) {
    PipelineConfig cfg;
    cfg.inputs = {dir / "in.txt"};
    cfg.output_dir = dir / ("w" + std::to_string(workers));
    cfg.workers = workers;
    cfg.shard_tokens = 4000;
    const auto report = tokenize_corpus(cfg, enc);
    EXPECT_GT(report.manifest.shards.size(), 2u);
    EXPECT_EQ(report.manifest.documents(), 1000u);
    EXPECT_EQ(decode_corpus(cfg.output_dir, c.v), c.text);
    const auto snap = snapshot(cfg.output_dir);
    if (first.empty()) {
      first = snap;
    } else {
      EXPECT_EQ(snap, first) << "workers=" << workers;
    }
  }
}

TEST(Pipeline, ExpansionEpochsAndIdentity) {
  const auto& c = line_corpus();
  TempDir dir("expand");
  write_file(dir / "in.txt", c.text);
  const BpeEncoder enc(c.v, c.m);
  PipelineConfig cfg;
  cfg.inputs = {dir / "in.txt"};
  cfg.output_dir = dir / "base";
  cfg.shard_tokens = 5000;
  const auto base = tokenize_corpus(cfg, enc).manifest;

  const ExpandConfig ec{0.1, 42, Rounding::stochastic};
  const auto e0 = expand_corpus(dir / "base", dir / "e0", c.t, ec, 0, 1);
  const auto e1 = expand_corpus(dir / "base", dir / "e1", c.t, ec, 1, 1);
  EXPECT_EQ(decode_corpus(dir / "e0", c.v), c.text);
  EXPECT_EQ(decode_corpus(dir / "e1", c.v), c.text);
  EXPECT_NE(snapshot(dir / "e0"), snapshot(dir / "e1"));
  EXPECT_EQ(e0.output_tokens, e0.input_tokens + e0.successes);
  EXPECT_GT(e0.successes, 0u);

  const auto m0 = load_manifest(dir / "e0");
  EXPECT_EQ(m0.kind, ShardKind::expanded);
  EXPECT_EQ(m0.epoch, 0u);
  EXPECT_EQ(load_manifest(dir / "e1").epoch, 1u);
  const auto s = read_shard(dir.path() / "e1" / m0.shards[0].path);
  EXPECT_EQ(s.header.epoch, 1u);
  EXPECT_EQ(s.header.expand_prop, 0.1);
  EXPECT_EQ(s.header.expand_seed, 42u);
  EXPECT_EQ(s.header.rounding, Rounding::stochastic);

  // Worker count does not change expanded bytes.
  expand_corpus(dir / "base", dir / "e0w4", c.t, ec, 0, 4);
  expand_corpus(dir / "base", dir / "e0w16", c.t, ec, 0, 16);
  EXPECT_EQ(snapshot(dir / "e0"), snapshot(dir / "e0w4"));
  EXPECT_EQ(snapshot(dir / "e0"), snapshot(dir / "e0w16"));

  // p = 0 keeps every token.
  expand_corpus(dir / "base", dir / "zero", c.t, {0.0, 42}, 0, 2);
  for (const auto& info : base.shards) {
    EXPECT_EQ(read_shard(dir.path() / "zero" / info.path).tokens,
              read_shard(dir.path() / "base" / info.path).tokens);
  }
}

TEST(Pipeline, FloorAccountingPerDocument) {
  const auto& c = line_corpus();
  const BpeEncoder enc(c.v, c.m);
  Shard shard;
  shard.header.vocab_hash = c.v.content_hash();
  for (const auto doc : split_documents(c.text, false)) shard.add_document(enc.encode(doc).ids);
  ASSERT_EQ(shard.doc_count(), 1000u);
  const ExpandConfig cfg{0.1, 7, Rounding::floor};
  ExpandCounters total;
  const auto out = expand_shard(shard, c.t, cfg, 0, 0, 3, &total);
  std::uint64_t want_attempts = 0, successes = 0;
  for (std::size_t i = 0; i < shard.doc_count(); ++i) {
    const TokenSeq in{{shard.document(i).begin(), shard.document(i).end()}};
    ExpandCounters one;
    const auto e = expand_document(in, c.t, cfg, 0, i, &one);
    EXPECT_EQ(one.attempts, in.size() / 10);
    want_attempts += in.size() / 10;
    successes += one.successes;
    EXPECT_EQ(std::vector<TokenId>(out.document(i).begin(), out.document(i).end()), e.ids);
  }
  EXPECT_EQ(total.attempts, want_attempts);
  EXPECT_EQ(total.successes, successes);
  EXPECT_EQ(out.tokens.size(), shard.tokens.size() + successes);
}

TEST(Pipeline, HashMismatchIsIntegrityError) {
  const auto& c = line_corpus();
  TempDir dir("mismatch");
  write_file(dir / "in.txt", "hug\n");
  const auto v = toy_vocab_with_newline();
  PipelineConfig cfg;
  cfg.inputs = {dir / "in.txt"};
  cfg.output_dir = dir / "base";
  tokenize_corpus(cfg, BpeEncoder(v, toy_merges()));
  EXPECT_THROW(expand_corpus(dir / "base", dir / "out", c.t, {}, 0), IntegrityError);
  Shard s;
  s.header.vocab_hash = v.content_hash();
  s.add_document(std::vector<TokenId>{8});
  EXPECT_THROW(expand_shard(s, c.t, {}, 0, 0, 1), IntegrityError);
}

TEST(Shard, RoundTripAndErrorClasses) {
  Shard s;
  s.header.vocab_hash = 0x1234;
  s.header.kind = ShardKind::expanded;
  s.header.expand_prop = 0.25;
  s.header.expand_seed = 9;
  s.header.epoch = 3;
  s.header.rounding = Rounding::stochastic;
  s.add_document(std::vector<TokenId>{1, 2, 3});
  s.add_document(std::vector<TokenId>{70000});
  const auto bytes = serialize_shard(s);
  EXPECT_EQ(bytes.size(), kShardHeaderSize + 8 * 3 + 4 * 4);
  EXPECT_EQ(parse_shard(bytes), s);

  EXPECT_THROW(parse_shard(bytes.substr(0, bytes.size() - 1)), TruncationError);
  EXPECT_THROW(parse_shard(bytes.substr(0, 40)), TruncationError);
  auto magic = bytes;
  magic[3] = 'X';
  EXPECT_THROW(parse_shard(magic), FormatError);
  auto version = bytes;
  version[8] = 2;
  EXPECT_THROW(parse_shard(version), VersionError);
  auto offsets = bytes;
  offsets[kShardHeaderSize + 8] = 0;  // offsets[1] = 0, not increasing
  EXPECT_THROW(parse_shard(offsets), CorruptHeaderError);
  EXPECT_THROW(parse_shard(bytes + "xx"), FormatError);

  TempDir dir("shard_io");
  write_file(dir / "bad.bin", bytes.substr(0, bytes.size() - 2));
  try {
    read_shard(dir / "bad.bin");
    FAIL();
  } catch (const TruncationError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.bin"), std::string::npos);
  }
  EXPECT_THROW(read_shard(dir / "missing.bin"), IoError);
  EXPECT_THROW(s.add_document(std::vector<TokenId>{}), ConfigError);
}

TEST(Manifest, RoundTrip) {
  Manifest m;
  m.kind = ShardKind::expanded;
  m.vocab_hash = 0xdeadbeefcafef00dULL;
  m.expand_prop = 0.1;
  m.seed = 5;
  m.epoch = 2;
  m.rounding = Rounding::stochastic;
  m.shards = {{"shard-00000.bin", 3, 10, 77}, {"shard-00001.bin", 1, 4, 0xffffffffffffffffULL}};
  const auto text = serialize_manifest(m);
  const auto back = parse_manifest(text);
  EXPECT_EQ(serialize_manifest(back), text);
  EXPECT_EQ(back.shards[1].content_hash, 0xffffffffffffffffULL);
  EXPECT_EQ(back.documents(), 4u);
  EXPECT_THROW(parse_manifest("{"), ParseError);
}

TEST(SplitDocuments, Lines) {
  using V = std::vector<std::string_view>;
  EXPECT_EQ(split_documents("a\nb\n", false), (V{"a\n", "b\n"}));
  EXPECT_EQ(split_documents("a\n\nb", false), (V{"a\n", "\n", "b"}));
  EXPECT_EQ(split_documents("", false), V{});
  EXPECT_EQ(split_documents("a\nb", true), (V{"a\nb"}));
  EXPECT_EQ(split_documents("", true), V{});
}

}  // namespace
}  // namespace stochastok
