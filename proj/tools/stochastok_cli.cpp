// stochastok command-line tool.
//
// stdout carries data only; diagnostics and reports meant for people go to
// stderr. Exit codes: 0 success, 1 operational error, 2 usage error.

#include <cctype>
#include <cstdio>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stochastok/stochastok.hpp"

namespace st = stochastok;

namespace {

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return st::read_file(path);
}

void write_output(const std::string& path, std::string_view data) {
  if (path == "-") {
    std::fwrite(data.data(), 1, data.size(), stdout);
    std::fflush(stdout);
  } else {
    st::write_file(path, data);
  }
}

std::string format_ids(std::span<const st::TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  out += '\n';
  return out;
}

std::vector<st::TokenId> parse_ids(std::string_view text) {
  std::vector<st::TokenId> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    ids.push_back(st::detail::parse_id(text.substr(pos, end - pos), ids.size() + 1));
    pos = end;
  }
  return ids;
}

st::SplitsTable splits_for(const st::Vocabulary& v, const std::string& cache, std::size_t workers) {
  if (cache.empty()) return st::build_splits_table(v, workers);
  return st::load_or_build_splits(v, cache, workers);
}

const std::map<std::string, st::Rounding> kRounding = {{"floor", st::Rounding::floor},
                                                      {"stochastic", st::Rounding::stochastic}};

struct ExpandFlags {
  double p = 0.1;
  std::uint64_t seed = 0;
  std::string rounding = "stochastic";

  void add(CLI::App* cmd) {
    cmd->add_option("--p", p, "Expansion proportion (attempts = len * p)")->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd->add_option("--rounding", rounding, "Attempt-count rounding")
        ->check(CLI::IsMember({"floor", "stochastic"}))
        ->capture_default_str();
  }
  st::Rounding rounding_mode() const { return kRounding.at(rounding); }
  st::ExpandConfig config() const { return {p, seed, rounding_mode()}; }
};

std::string version_text() {
  return std::string("stochastok ") + st::kVersion + "\n" +
         "shard format " + std::to_string(st::kShardFormatVersion) + "\n" +
         "splits cache format " + std::to_string(st::kSplitsFormatVersion) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byte-level BPE with StochasTok expansion, corpus sharding and dataset generation"};
  app.set_version_flag("--version", version_text(), "Print tool and binary format versions");
  app.set_config("--config", "", "Read flags from a TOML/INI file");
  app.require_subcommand(1);
  app.fallthrough();

  // train-bpe ---------------------------------------------------------------
  auto* train = app.add_subcommand("train-bpe", "Train a byte-level BPE vocabulary and merge list");
  std::vector<std::string> train_inputs;
  std::size_t vocab_size = 0;
  st::TrainOptions train_opts;
  bool train_whole = false;
  std::string out_vocab, out_merges;
  train->add_option("--input", train_inputs, "Training text files")->required()->check(CLI::ExistingFile);
  train->add_option("--vocab-size", vocab_size, "Target vocabulary size")->required();
  train->add_option("--min-frequency", train_opts.min_frequency, "Smallest pair count that merges")
      ->capture_default_str();
  train->add_flag("--whole-file", train_whole, "Treat each file as one document (default: each line)");
  train->add_option("--out-vocab", out_vocab, "Output vocabulary file")->required();
  train->add_option("--out-merges", out_merges, "Output merges file")->required();

  // encode ------------------------------------------------------------------
  auto* enc = app.add_subcommand("encode", "Encode text to token ids (one line of ids)");
  std::string vocab_path, merges_path, input = "-", output = "-", splits_cache;
  std::string mode = "bpe";
  double dropout_p = 0.1;
  ExpandFlags enc_expand;
  enc->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  enc->add_option("--merges", merges_path, "Merges file (bpe, dropout, stochastok)");
  enc->add_option("--mode", mode, "Encoder")
      ->check(CLI::IsMember({"bpe", "dropout", "stochastok", "char"}))
      ->capture_default_str();
  enc->add_option("--dropout-p", dropout_p, "Merge skip probability for --mode dropout")->capture_default_str();
  enc_expand.add(enc);
  enc->add_option("--splits", splits_cache, "Splits cache (built and saved if missing)");
  enc->add_option("--input", input, "Input text file, - for stdin")->capture_default_str();
  enc->add_option("--output", output, "Output file, - for stdout")->capture_default_str();

  // decode ------------------------------------------------------------------
  auto* dec = app.add_subcommand("decode", "Decode whitespace-separated token ids to raw bytes");
  dec->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  dec->add_option("--input", input, "Input ids, - for stdin")->capture_default_str();
  dec->add_option("--output", output, "Output file, - for stdout")->capture_default_str();

  // build-splits ------------------------------------------------------------
  auto* build = app.add_subcommand("build-splits", "Precompute the token splits table");
  std::size_t workers = 1;
  build->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  build->add_option("--out", splits_cache, "Output splits cache")->required();
  build->add_option("--workers", workers, "Worker threads")->capture_default_str();

  // expand ------------------------------------------------------------------
  auto* exp = app.add_subcommand("expand", "Expand a token id sequence");
  ExpandFlags exp_flags;
  exp->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  exp->add_option("--splits", splits_cache, "Splits cache (built and saved if missing)");
  exp_flags.add(exp);
  exp->add_option("--input", input, "Input ids, - for stdin")->capture_default_str();
  exp->add_option("--output", output, "Output file, - for stdout")->capture_default_str();

  // pipeline ----------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "Corpus sharding and expansion passes");
  pipe->require_subcommand(1);
  auto* ptok = pipe->add_subcommand("tokenize", "Tokenize text files into base shards");
  st::PipelineConfig pcfg;
  std::vector<std::string> pipe_inputs;
  std::string out_dir, in_dir;
  ptok->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  ptok->add_option("--merges", merges_path, "Merges file")->required();
  ptok->add_option("--input", pipe_inputs, "Text files")->required()->check(CLI::ExistingFile);
  ptok->add_option("--out", out_dir, "Output shard directory")->required();
  ptok->add_option("--shard-tokens", pcfg.shard_tokens, "Tokens per shard (soft limit)")->capture_default_str();
  ptok->add_option("--workers", pcfg.workers, "Worker threads")->capture_default_str();
  ptok->add_flag("--whole-file", pcfg.whole_file_documents, "Each file is one document (default: each line)");

  auto* pexp = pipe->add_subcommand("expand", "Write expanded shards for one epoch");
  ExpandFlags pexp_flags;
  std::uint64_t epoch = 0;
  pexp->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  pexp->add_option("--splits", splits_cache, "Splits cache (built and saved if missing)");
  pexp->add_option("--in", in_dir, "Base shard directory")->required()->check(CLI::ExistingDirectory);
  pexp->add_option("--out", out_dir, "Output shard directory")->required();
  pexp->add_option("--epoch", epoch, "Epoch number (part of every document seed)")->capture_default_str();
  pexp->add_option("--workers", workers, "Worker threads")->capture_default_str();
  pexp_flags.add(pexp);

  // gen ---------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate evaluation datasets");
  gen->require_subcommand(1);
  std::string words_path = std::string(STOCHASTOK_DATA_DIR) + "/words.txt";
  std::uint64_t gen_seed = 0;

  auto* glang = gen->add_subcommand("langgame", "LangGame multiple-choice questions (JSON lines)");
  st::LangGameConfig lcfg;
  glang->add_option("--words", words_path, "Word list, one per line")->capture_default_str();
  glang->add_option("--n-train", lcfg.n_train, "Training records")->capture_default_str();
  glang->add_option("--n-val", lcfg.n_val, "Validation records")->capture_default_str();
  glang->add_option("--n-holdout", lcfg.n_holdout, "Holdout records (only with --ood)")->capture_default_str();
  glang->add_option("--ood", lcfg.ood_mode, "Substring-length split")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, st::OodMode>{{"off", st::OodMode::off},
                                             {"main_text", st::OodMode::main_text},
                                             {"appendix", st::OodMode::appendix}},
          CLI::ignore_case))
      ->default_str("off");
  glang->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  glang->add_option("--output", output, "Output file, - for stdout")->capture_default_str();

  auto* gcute = gen->add_subcommand("cute", "CUTE subword task questions (JSON lines)");
  std::size_t cute_count = 100;
  std::vector<int> cute_types(st::kCuteTypes.begin(), st::kCuteTypes.end());
  gcute->add_option("--words", words_path, "Word list, one per line")->capture_default_str();
  gcute->add_option("--count", cute_count, "Records per task type")->capture_default_str();
  gcute->add_option("--types", cute_types, "Task types (subset of 1 2 3 5 7 9 11 13)")
      ->delimiter(',')
      ->check(CLI::IsMember(std::vector<int>(st::kCuteTypes.begin(), st::kCuteTypes.end())));
  gcute->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gcute->add_option("--output", output, "Output file, - for stdout")->capture_default_str();

  auto* gadd = gen->add_subcommand("addition", "Multi-digit addition stream with reversed sums");
  st::AdditionConfig acfg;
  acfg.count = 1000;
  gadd->add_option("--count", acfg.count, "Number of items")->capture_default_str();
  gadd->add_option("--operand-max", acfg.operand_max, "Largest operand")->capture_default_str();
  gadd->add_flag("--digit-balanced", acfg.digit_balanced, "Draw the digit count uniformly first");
  gadd->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gadd->add_option("--output", output, "Output file, - for stdout")->capture_default_str();

  // stats -------------------------------------------------------------------
  auto* stats = app.add_subcommand("stats", "Compression ratios and expansion statistics");
  ExpandFlags stats_flags;
  std::vector<std::string> stats_inputs;
  std::string word;
  std::uint64_t trials = 10000;
  bool as_json = false;
  stats->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  stats->add_option("--merges", merges_path, "Merges file")->required();
  stats->add_option("--splits", splits_cache, "Splits cache (built and saved if missing)");
  stats->add_option("--input", stats_inputs, "Text files (each line a document)")->check(CLI::ExistingFile);
  stats->add_option("--dropout-p", dropout_p, "Dropout probability")->capture_default_str();
  stats->add_option("--word", word, "Report the expansion distribution of this word instead");
  stats->add_option("--trials", trials, "Samples for --word")->capture_default_str();
  stats->add_flag("--json", as_json, "Machine-readable output");
  stats_flags.add(stats);

  // bench -------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Expansion throughput and scaling over a shard");
  ExpandFlags bench_flags;
  std::string shard_path;
  int warmup = 3, runs = 5;
  bench->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  bench->add_option("--splits", splits_cache, "Splits cache (built and saved if missing)");
  bench->add_option("--shard", shard_path, "Base shard file")->required()->check(CLI::ExistingFile);
  bench->add_option("--workers", workers, "Worker threads for the multi-worker run")->capture_default_str();
  bench->add_option("--warmup", warmup, "Discarded warm-up passes")->capture_default_str();
  bench->add_option("--runs", runs, "Timed passes (median reported)")->capture_default_str();
  bench->add_flag("--json", as_json, "Machine-readable output");
  bench_flags.add(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) {
      std::vector<std::string> docs;
      for (const auto& f : train_inputs) {
        const std::string text = st::read_file(f);
        for (auto d : st::split_documents(text, train_whole)) docs.emplace_back(d);
      }
      const auto [v, m] = st::train_bpe(docs, vocab_size, train_opts);
      st::save_vocabulary(v, out_vocab);
      st::save_merges(m, out_merges);
      std::cerr << "vocabulary " << v.size() << " tokens, " << m.pairs.size() << " merges\n";
    } else if (*enc) {
      const auto v = st::load_vocabulary(vocab_path);
      const std::string text = read_input(input);
      st::TokenSeq seq;
      if (mode == "char") {
        seq = st::encode_char(v, text);
      } else {
        if (merges_path.empty()) throw st::ConfigError("--merges is required for --mode " + mode);
        const st::BpeEncoder encoder(v, st::load_merges(merges_path));
        if (mode == "bpe") {
          seq = encoder.encode(text);
        } else if (mode == "dropout") {
          seq = encoder.encode_dropout(text, {dropout_p, enc_expand.seed});
        } else {
          const auto table = splits_for(v, splits_cache, 1);
          seq = st::expand(encoder.encode(text), table, enc_expand.config());
        }
      }
      write_output(output, format_ids(seq.ids));
    } else if (*dec) {
      const auto v = st::load_vocabulary(vocab_path);
      write_output(output, st::decode(v, parse_ids(read_input(input))));
    } else if (*build) {
      const auto v = st::load_vocabulary(vocab_path);
      const auto table = st::build_splits_table(v, workers);
      st::save_splits_cache(table, splits_cache);
      std::cerr << table.size() << " tokens, " << table.pair_count() << " splits\n";
    } else if (*exp) {
      const auto v = st::load_vocabulary(vocab_path);
      const auto table = splits_for(v, splits_cache, 1);
      const st::TokenSeq seq{parse_ids(read_input(input))};
      write_output(output, format_ids(st::expand(seq, table, exp_flags.config()).ids));
    } else if (*ptok) {
      const auto v = st::load_vocabulary(vocab_path);
      const st::BpeEncoder encoder(v, st::load_merges(merges_path));
      pcfg.inputs.assign(pipe_inputs.begin(), pipe_inputs.end());
      pcfg.output_dir = out_dir;
      const auto report = st::tokenize_corpus(pcfg, encoder);
      for (const auto& s : report.skipped) {
        std::cerr << "skipped " << s.source << " document " << s.document << ": " << s.reason << "\n";
      }
      std::cerr << report.manifest.documents() << " documents, " << report.manifest.tokens()
                << " tokens, " << report.manifest.shards.size() << " shards\n";
    } else if (*pexp) {
      const auto v = st::load_vocabulary(vocab_path);
      const auto table = splits_for(v, splits_cache, workers);
      const auto r = st::expand_corpus(in_dir, out_dir, table, pexp_flags.config(), epoch, workers);
      std::cerr << r.input_tokens << " -> " << r.output_tokens << " tokens (" << r.successes << " of "
                << r.attempts << " attempts split)\n";
    } else if (*glang) {
      lcfg.seed = gen_seed;
      write_output(output, st::to_jsonl(st::gen_langgame(st::WordList::load(words_path), lcfg)));
    } else if (*gcute) {
      st::CuteConfig ccfg;
      ccfg.seed = gen_seed;
      for (int t : cute_types) ccfg.counts[t] = cute_count;
      write_output(output, st::to_jsonl(st::gen_cute(st::WordList::load(words_path), ccfg)));
    } else if (*gadd) {
      acfg.seed = gen_seed;
      std::string stream = st::gen_addition(acfg);
      if (!stream.empty()) stream += '\n';
      write_output(output, stream);
    } else if (*stats) {
      const auto v = st::load_vocabulary(vocab_path);
      const st::BpeEncoder encoder(v, st::load_merges(merges_path));
      const auto table = splits_for(v, splits_cache, 1);
      if (!word.empty()) {
        const auto dist = st::tokenization_distribution(word, encoder, table, stats_flags.config(), trials);
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& [ids, freq] : dist) j.push_back({{"ids", ids}, {"frequency", freq}});
        if (as_json) {
          write_output("-", j.dump() + "\n");
        } else {
          std::string out;
          for (const auto& [ids, freq] : dist) {
            std::string pieces;
            for (auto id : ids) pieces += (pieces.empty() ? "" : "|") + std::string(v.bytes(id));
            out += std::to_string(freq) + "\t" + pieces + "\n";
          }
          write_output("-", out);
        }
        return 0;
      }
      if (stats_inputs.empty()) throw st::ConfigError("stats needs --input or --word");
      std::vector<std::string> texts;
      std::vector<std::string_view> docs;
      for (const auto& f : stats_inputs) texts.push_back(st::read_file(f));
      for (const auto& t : texts)
        for (auto d : st::split_documents(t, false)) docs.push_back(d);
      const auto r = st::compression_ratio(encoder, table, docs, dropout_p, stats_flags.p, stats_flags.seed,
                                           stats_flags.rounding_mode());
      if (as_json) {
        nlohmann::ordered_json j;
        j["bytes"] = r.bytes;
        j["tokens_per_byte"] = {{"bpe", r.bpe_ratio()},
                                {"dropout", r.dropout_ratio()},
                                {"stochastok", r.stochastok_ratio()},
                                {"char", r.char_ratio()}};
        j["dropout_p"] = r.dropout_p;
        j["stochastok_p"] = r.stochastok_p;
        const auto& s = r.stochastok_stats;
        j["expansion"] = {{"attempts", s.attempts},
                          {"successes", s.successes},
                          {"input_tokens", s.input_tokens},
                          {"output_tokens", s.output_tokens},
                          {"accounting_holds", s.accounting_holds()}};
        write_output("-", j.dump(1) + "\n");
      } else {
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "bytes       %llu\n"
                      "bpe         %.6f tokens/byte\n"
                      "dropout     %.6f tokens/byte (p=%g)\n"
                      "stochastok  %.6f tokens/byte (p=%g)\n"
                      "char        %.6f tokens/byte\n"
                      "expansion   %llu attempts, %llu splits\n",
                      static_cast<unsigned long long>(r.bytes), r.bpe_ratio(), r.dropout_ratio(), r.dropout_p,
                      r.stochastok_ratio(), r.stochastok_p, r.char_ratio(),
                      static_cast<unsigned long long>(r.stochastok_stats.attempts),
                      static_cast<unsigned long long>(r.stochastok_stats.successes));
        write_output("-", buf);
      }
    } else if (*bench) {
      const auto v = st::load_vocabulary(vocab_path);
      const auto table = splits_for(v, splits_cache, 1);
      const auto shard = st::read_shard(shard_path);
      const auto r = st::benchmark_expansion(shard, table, bench_flags.config(), workers, warmup, runs);
      if (as_json) {
        write_output("-", r.to_json().dump(1) + "\n");
      } else {
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "tokens       %llu in %llu documents\n"
                      "1 worker     %.0f tokens/s (%.4f s)\n"
                      "%zu workers    %.0f tokens/s (%.4f s)\n"
                      "doubled      %.4f s, ratio %.3f (%s)\n",
                      static_cast<unsigned long long>(r.tokens), static_cast<unsigned long long>(r.documents),
                      r.single_tokens_per_sec, r.single_seconds, r.workers, r.multi_tokens_per_sec,
                      r.multi_seconds, r.doubled_seconds, r.scaling_ratio, r.linear ? "linear" : "NOT linear");
        write_output("-", buf);
      }
    }
  } catch (const st::Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
