#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochastok/bpe.hpp"
#include "stochastok/errors.hpp"
#include "stochastok/expand.hpp"
#include "stochastok/parallel.hpp"
#include "stochastok/shard.hpp"
#include "stochastok/splits.hpp"
#include "stochastok/vocab.hpp"

namespace stochastok {

struct PipelineConfig {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_dir;
  // Documents are packed into a shard until it holds at least this many tokens.
  std::uint64_t shard_tokens = std::uint64_t{1} << 24;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  // false: every line (including its '\n') is a document; true: every file is.
  bool whole_file_documents = false;
  std::optional<ExpandConfig> expand;
};

struct ShardInfo {
  std::string path;  // relative to the manifest's directory
  std::uint64_t documents = 0;
  std::uint64_t tokens = 0;
  std::uint64_t content_hash = 0;  // FNV-1a 64 of the file bytes
};

/// Lists a directory of shards. Contains no timing or worker information, so it
/// is byte-identical for identical inputs and configuration.
struct Manifest {
  ShardKind kind = ShardKind::base;
  std::uint64_t vocab_hash = 0;
  double expand_prop = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  Rounding rounding = Rounding::floor;
  std::vector<ShardInfo> shards;

  std::uint64_t documents() const {
    std::uint64_t n = 0;
    for (const auto& s : shards) n += s.documents;
    return n;
  }
  std::uint64_t tokens() const {
    std::uint64_t n = 0;
    for (const auto& s : shards) n += s.tokens;
    return n;
  }
};

inline constexpr const char* kManifestName = "manifest.json";

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw ParseError("manifest: bad hash '" + s + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw ParseError("manifest: bad hash '" + s + "'");
  }
  return v;
}

inline std::string shard_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05zu.bin", i);
  return buf;
}

}  // namespace detail

inline std::string serialize_manifest(const Manifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "stochastok-manifest";
  j["shard_format_version"] = kShardFormatVersion;
  j["kind"] = m.kind == ShardKind::base ? "base" : "expanded";
  j["vocab_hash"] = detail::hex64(m.vocab_hash);
  if (m.kind == ShardKind::expanded) {
    j["expand_prop"] = m.expand_prop;
    j["seed"] = m.seed;
    j["epoch"] = m.epoch;
    j["rounding"] = m.rounding == Rounding::floor ? "floor" : "stochastic";
  }
  j["documents"] = m.documents();
  j["tokens"] = m.tokens();
  j["shards"] = nlohmann::ordered_json::array();
  for (const auto& s : m.shards) {
    j["shards"].push_back({{"path", s.path},
                           {"documents", s.documents},
                           {"tokens", s.tokens},
                           {"fnv1a64", detail::hex64(s.content_hash)}});
  }
  return j.dump(1) + "\n";
}

inline Manifest parse_manifest(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Manifest m;
    m.kind = j.at("kind").get<std::string>() == "base" ? ShardKind::base : ShardKind::expanded;
    m.vocab_hash = detail::parse_hex64(j.at("vocab_hash").get<std::string>());
    if (m.kind == ShardKind::expanded) {
      m.expand_prop = j.at("expand_prop").get<double>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.epoch = j.at("epoch").get<std::uint64_t>();
      m.rounding = j.at("rounding").get<std::string>() == "floor" ? Rounding::floor
                                                                  : Rounding::stochastic;
    }
    for (const auto& s : j.at("shards")) {
      m.shards.push_back({s.at("path").get<std::string>(), s.at("documents").get<std::uint64_t>(),
                          s.at("tokens").get<std::uint64_t>(),
                          detail::parse_hex64(s.at("fnv1a64").get<std::string>())});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

inline Manifest load_manifest(const std::filesystem::path& dir) {
  return parse_manifest(read_file(dir / kManifestName));
}

/// Splits raw text into documents: lines with their terminating '\n' (a final
/// unterminated line is kept), or the whole text as one document. Empty input
/// yields no documents.
inline std::vector<std::string_view> split_documents(std::string_view text, bool whole_file) {
  std::vector<std::string_view> docs;
  if (text.empty()) return docs;
  if (whole_file) {
    docs.push_back(text);
    return docs;
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    end = end == std::string_view::npos ? text.size() : end + 1;
    docs.push_back(text.substr(pos, end - pos));
    pos = end;
  }
  return docs;
}

/// A document dropped because one of its bytes has no token.
struct SkippedDocument {
  std::string source;
  std::uint64_t document = 0;
  std::string reason;
};

struct TokenizeReport {
  Manifest manifest;
  std::vector<SkippedDocument> skipped;
};

namespace detail {

// Accumulates documents into shards of ~shard_tokens and writes them.
class ShardWriter {
 public:
  ShardWriter(std::filesystem::path dir, ShardHeader header, std::uint64_t shard_tokens)
      : dir_(std::move(dir)), header_(header), shard_tokens_(shard_tokens) {
    if (shard_tokens_ == 0) throw ConfigError("shard size must be > 0");
    std::filesystem::create_directories(dir_);
    current_.header = header_;
  }

  void add(std::span<const TokenId> doc) {
    current_.add_document(doc);
    if (current_.tokens.size() >= shard_tokens_) flush();
  }

  Manifest finish() {
    // An empty corpus still gets one (empty) shard, so readers always find one.
    if (current_.doc_count() > 0 || manifest_.shards.empty()) flush();
    manifest_.kind = header_.kind;
    manifest_.vocab_hash = header_.vocab_hash;
    manifest_.expand_prop = header_.expand_prop;
    manifest_.seed = header_.expand_seed;
    manifest_.epoch = header_.epoch;
    manifest_.rounding = header_.rounding;
    write_file(dir_ / kManifestName, serialize_manifest(manifest_));
    return manifest_;
  }

 private:
  void flush() {
    const std::string name = shard_name(manifest_.shards.size());
    const std::string bytes = serialize_shard(current_);
    write_file(dir_ / name, bytes);
    manifest_.shards.push_back({name, current_.doc_count(), current_.tokens.size(),
                                fnv1a(kFnvOffset, bytes)});
    current_ = Shard{};
    current_.header = header_;
  }

  std::filesystem::path dir_;
  ShardHeader header_;
  std::uint64_t shard_tokens_;
  Shard current_;
  Manifest manifest_;
};

}  // namespace detail

/// Tokenizes in-memory documents with the deterministic encoder, in parallel.
/// Documents that fail coverage come back as std::nullopt with the error text.
inline std::vector<std::optional<TokenSeq>> tokenize_documents(
    const BpeEncoder& encoder, std::span<const std::string_view> docs, std::size_t workers,
    std::vector<std::string>* errors = nullptr) {
  std::vector<std::optional<TokenSeq>> out(docs.size());
  std::vector<std::string> err(docs.size());
  parallel_for_chunks(docs.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        out[i] = encoder.encode(docs[i]);
      } catch (const CoverageError& ce) {
        err[i] = ce.what();
      }
    }
  });
  if (errors) *errors = std::move(err);
  return out;
}

/// Base tokenization of every input file into shards under cfg.output_dir,
/// plus manifest.json. Output bytes depend only on the inputs, the encoder and
/// shard size, never on cfg.workers.
inline TokenizeReport tokenize_corpus(const PipelineConfig& cfg, const BpeEncoder& encoder) {
  ShardHeader header;
  header.kind = ShardKind::base;
  header.vocab_hash = encoder.vocabulary().content_hash();
  detail::ShardWriter writer(cfg.output_dir, header, cfg.shard_tokens);
  TokenizeReport report;
  for (const auto& input : cfg.inputs) {
    const std::string text = read_file(input);
    const auto docs = split_documents(text, cfg.whole_file_documents);
    std::vector<std::string> errors;
    const auto seqs = tokenize_documents(encoder, docs, cfg.workers, &errors);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (!seqs[i]) {
        report.skipped.push_back({input.string(), i, errors[i]});
        continue;
      }
      writer.add(seqs[i]->ids);
    }
  }
  report.manifest = writer.finish();
  return report;
}

struct ExpandCorpusReport {
  Manifest manifest;
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
};

/// Expands every document of one shard. Document k of the shard has global
/// index `first_doc + k` for seed derivation.
inline Shard expand_shard(const Shard& in, const SplitsTable& table, const ExpandConfig& cfg,
                          std::uint64_t epoch, std::uint64_t first_doc, std::size_t workers,
                          ExpandCounters* counters = nullptr) {
  if (in.header.vocab_hash != table.vocab_hash()) {
    throw IntegrityError("shard vocabulary hash " + detail::hex64(in.header.vocab_hash) +
                         " does not match splits table " + detail::hex64(table.vocab_hash()));
  }
  const std::size_t n = in.doc_count();
  std::vector<std::vector<TokenId>> out_docs(n);
  std::vector<ExpandCounters> per_doc(n);
  parallel_for_chunks(n, workers, [&](std::size_t b, std::size_t e) {
    TokenSeq seq;
    for (std::size_t i = b; i < e; ++i) {
      const auto doc = in.document(i);
      seq.ids.assign(doc.begin(), doc.end());
      out_docs[i] = expand_document(seq, table, cfg, epoch, first_doc + i, &per_doc[i]).ids;
    }
  });
  Shard out;
  out.header = in.header;
  out.header.kind = ShardKind::expanded;
  out.header.expand_prop = cfg.expand_prop;
  out.header.expand_seed = cfg.seed;
  out.header.epoch = epoch;
  out.header.rounding = cfg.rounding;
  out.header.doc_count = 0;
  out.header.total_tokens = 0;
  std::size_t total = 0;
  for (const auto& d : out_docs) total += d.size();
  out.tokens.reserve(total);
  out.offsets.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    out.add_document(out_docs[i]);
    if (counters) {
      counters->attempts += per_doc[i].attempts;
      counters->successes += per_doc[i].successes;
    }
  }
  return out;
}

/// Reads the base shards listed in `input_dir`'s manifest and writes expanded
/// shards (same document grouping) plus a manifest to `output_dir`.
inline ExpandCorpusReport expand_corpus(const std::filesystem::path& input_dir,
                                        const std::filesystem::path& output_dir,
                                        const SplitsTable& table, const ExpandConfig& cfg,
                                        std::uint64_t epoch, std::size_t workers = 1) {
  const Manifest in = load_manifest(input_dir);
  if (in.vocab_hash != table.vocab_hash()) {
    throw IntegrityError("corpus vocabulary hash " + detail::hex64(in.vocab_hash) +
                         " does not match splits table " + detail::hex64(table.vocab_hash()));
  }
  std::filesystem::create_directories(output_dir);
  ExpandCorpusReport report;
  Manifest& out = report.manifest;
  out.kind = ShardKind::expanded;
  out.vocab_hash = in.vocab_hash;
  out.expand_prop = cfg.expand_prop;
  out.seed = cfg.seed;
  out.epoch = epoch;
  out.rounding = cfg.rounding;
  std::uint64_t first_doc = 0;
  for (const auto& info : in.shards) {
    const Shard shard = read_shard(input_dir / info.path);
    ExpandCounters counters;
    const Shard expanded = expand_shard(shard, table, cfg, epoch, first_doc, workers, &counters);
    const std::string bytes = serialize_shard(expanded);
    write_file(output_dir / info.path, bytes);
    out.shards.push_back({info.path, expanded.doc_count(), expanded.tokens.size(),
                          detail::fnv1a(detail::kFnvOffset, bytes)});
    report.attempts += counters.attempts;
    report.successes += counters.successes;
    report.input_tokens += shard.tokens.size();
    report.output_tokens += expanded.tokens.size();
    first_doc += shard.doc_count();
  }
  write_file(output_dir / kManifestName, serialize_manifest(out));
  return report;
}

/// Decoded bytes of every document in a shard directory, in order.
inline std::string decode_corpus(const std::filesystem::path& dir, const Vocabulary& v) {
  const Manifest m = load_manifest(dir);
  std::string out;
  for (const auto& info : m.shards) {
    const Shard s = read_shard(dir / info.path);
    out += decode(v, std::span<const TokenId>(s.tokens));
  }
  return out;
}

}  // namespace stochastok
