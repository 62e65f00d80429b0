#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "test_util.hpp"

namespace stochastok {
namespace {

const WordList& top_words() {
  static const WordList w = WordList::load(std::string(STOCHASTOK_DATA_DIR) + "/words.txt");
  return w;
}

QuestionRecord langgame_record(int type, std::vector<std::string> options, std::string answer,
                               std::string aux = "") {
  QuestionRecord q;
  q.task_family = TaskFamily::langgame;
  q.task_type = type;
  q.options = std::move(options);
  q.answer = std::move(answer);
  q.aux = std::move(aux);
  return q;
}

TEST(WordList, ShippedListIsValid) {
  const auto& w = top_words();
  EXPECT_EQ(w.size(), 1000u);
  for (const char* needed : {"there", "happy", "apply", "glad", "reason", "continent", "month"}) {
    EXPECT_NE(std::find(w.words().begin(), w.words().end(), needed), w.words().end()) << needed;
  }
}

TEST(WordList, Rejections) {
  EXPECT_THROW(WordList::parse(""), ConfigError);
  EXPECT_THROW(WordList::parse("a\nb\na\n"), ConfigError);
  EXPECT_THROW(WordList::parse("Hello\n"), ConfigError);
  EXPECT_EQ(WordList::parse("  one\r\n\ntwo\n").words(), (std::vector<std::string>{"one", "two"}));
}

TEST(LangGame, TableOneRowsVerify) {
  EXPECT_TRUE(verify_langgame(langgame_record(1, {"reason", "step", "continent", "their"}, "continent", "n")));
  EXPECT_TRUE(verify_langgame(langgame_record(2, {"was", "children", "require", "check"}, "check", "ec")));
  EXPECT_TRUE(verify_langgame(langgame_record(3, {"case", "ask", "month", "event"}, "month", "mo")));
  EXPECT_TRUE(verify_langgame(langgame_record(4, {"cost", "lead", "south", "sun"}, "lead", "ad")));
  EXPECT_TRUE(verify_langgame(langgame_record(5, {"wild", "dear", "had", "section"}, "section")));
  EXPECT_TRUE(verify_langgame(langgame_record(6, {"thought", "job", "circle", "nothing"}, "job")));
  // Wrong answers for the same rows.
  EXPECT_FALSE(verify_langgame(langgame_record(1, {"reason", "step", "continent", "their"}, "reason", "n")));
  EXPECT_FALSE(verify_langgame(langgame_record(6, {"thought", "job", "circle", "nothing"}, "circle")));
}

TEST(LangGame, VerifyRejectsBadRecords) {
  EXPECT_FALSE(verify_langgame(langgame_record(4, {"lead", "load"}, "lead", "ad")));
  EXPECT_FALSE(verify_langgame(langgame_record(5, {"wild", "dear"}, "section")));
  EXPECT_FALSE(verify_langgame(langgame_record(2, {"was", "check"}, "was", "zz")));
  EXPECT_FALSE(verify_langgame(langgame_record(5, {"wild", "section"}, "section", "x")));
  EXPECT_FALSE(verify_langgame(langgame_record(3, {"case", "month"}, "month", "")));
  auto cute = langgame_record(5, {"wild", "section"}, "section");
  cute.task_family = TaskFamily::cute;
  EXPECT_FALSE(verify_langgame(cute));
}

TEST(LangGame, RenderMatchesTableOne) {
  using namespace langgame;
  EXPECT_EQ(render_prompt({0, 0, 0, 0, 0}, 1, "n", {"reason", "step", "continent", "their"}),
            "Which word has the most letter 'n's? The options are: [ reason, step, continent, their]. Answer:");
  EXPECT_EQ(render_prompt({0, 2, 2, 1, 1}, 5, "", {"wild", "dear", "had", "section"}),
            "Which string is the longest? The available choices: [ wild, dear, had, section]. Answer:");
  EXPECT_EQ(render_prompt({0, 1, 1, 2, 1}, 6, "", {"thought", "job", "circle", "nothing"}),
            "Which is the shortest? The possible option words: [ thought, job, circle, nothing]. Answer:");
  EXPECT_EQ(render_prompt({1, 5, 0, 2, 0}, 4, "ad", {"cost", "lead", "south", "sun"}),
            "What option word ends with 'ad'? The option words are: [ cost, lead, south, sun]. Answer:");
  EXPECT_EQ(kPhrasings, 336u);
}

TEST(LangGame, GeneratedRecordsAreValid) {
  LangGameConfig cfg;
  cfg.n_train = 2000;
  cfg.n_val = 200;
  cfg.seed = 5;
  const auto recs = gen_langgame(top_words(), cfg);
  ASSERT_EQ(recs.size(), 2200u);
  std::set<int> types;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& q = recs[i];
    EXPECT_TRUE(verify_langgame(q)) << q.prompt;
    EXPECT_EQ(q.split, i < 2000 ? DataSplit::train : DataSplit::val);
    EXPECT_EQ(q.seed_index, i);
    EXPECT_EQ(q.options.size(), 4u);
    EXPECT_EQ(std::set<std::string>(q.options.begin(), q.options.end()).size(), 4u);
    const auto parsed = oracle::parse_langgame_prompt(q.prompt);
    ASSERT_TRUE(parsed) << q.prompt;
    EXPECT_EQ(parsed->type, q.task_type);
    EXPECT_EQ(parsed->choices, q.options);
    EXPECT_EQ(oracle::langgame_answer(*parsed), q.answer) << q.prompt;
    types.insert(q.task_type);
  }
  EXPECT_EQ(types.size(), 6u);
}

TEST(LangGame, DeterministicAndIndexAddressable) {
  LangGameConfig cfg;
  cfg.n_train = 50;
  cfg.n_val = 10;
  cfg.seed = 9;
  const auto a = gen_langgame(top_words(), cfg);
  EXPECT_EQ(a, gen_langgame(top_words(), cfg));
  cfg.n_train = 20;
  const auto b = gen_langgame(top_words(), cfg);
  // Record i depends only on (seed, i); the split label differs past n_train.
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a[i], b[i]);
  cfg.seed = 10;
  EXPECT_NE(a[0].prompt + a[1].prompt, gen_langgame(top_words(), cfg)[0].prompt + gen_langgame(top_words(), cfg)[1].prompt);
}

TEST(LangGame, OodModesPartitionSubstringLengths) {
  for (auto mode : {OodMode::main_text, OodMode::appendix}) {
    LangGameConfig cfg;
    cfg.n_train = 600;
    cfg.n_val = 100;
    cfg.n_holdout = 300;
    cfg.seed = 3;
    cfg.ood_mode = mode;
    const auto recs = gen_langgame(top_words(), cfg);
    ASSERT_EQ(recs.size(), 1000u);
    std::size_t checked = 0;
    for (const auto& q : recs) {
      EXPECT_TRUE(verify_langgame(q));
      if (q.task_type < 2 || q.task_type > 4) continue;
      const std::size_t two_len = 2 * q.aux.size(), n = q.answer.size();
      const bool hold = q.split == DataSplit::holdout;
      if (mode == OodMode::main_text) {
        EXPECT_EQ(hold, two_len > n) << q.aux << " / " << q.answer;
      } else {
        EXPECT_EQ(hold, two_len < n) << q.aux << " / " << q.answer;
      }
      ++checked;
    }
    EXPECT_GT(checked, 300u);
  }
  LangGameConfig off;
  off.n_train = 10;
  off.n_val = 5;
  EXPECT_EQ(gen_langgame(top_words(), off).size(), 15u);
}

TEST(LangGame, TooFewWords) {
  EXPECT_THROW(gen_langgame(WordList({"a", "b", "c"}), {}), ConfigError);
}

TEST(Cute, TableExamples) {
  EXPECT_EQ(cute::spell("there"), "t h e r e");
  EXPECT_EQ(cute::insert_after("there", 'e', 'b'), "thebreb");
  EXPECT_EQ(cute::delete_all("there", 'e'), "thr");
  EXPECT_EQ(cute::replace_all("there", 'e', 'a'), "thara");
  EXPECT_EQ(cute::swap_chars("there", 't', 'r'), "rhete");
  EXPECT_EQ(oracle::cute_answer(1, "Spell out the word: there"), "t h e r e");
  EXPECT_EQ(oracle::cute_answer(2, "Write the word that is spelled out (no spaces): t h e r e"), "there");
  EXPECT_EQ(oracle::cute_answer(3, "Is there a 'c' in 'there'?"), "No");
  EXPECT_EQ(oracle::cute_answer(5, "Closer in Levenshtein distance to 'happy': glad or apply?"), "apply");
  EXPECT_EQ(oracle::cute_answer(7, "Add 'b' after every 'e' in 'there'"), "thebreb");
  EXPECT_EQ(oracle::cute_answer(9, "Delete every 'e' in 'there'"), "thr");
  EXPECT_EQ(oracle::cute_answer(11, "Replace every 'e' with 'a' in 'there'"), "thara");
  EXPECT_EQ(oracle::cute_answer(13, "Swap 't' and 'r' in 'there'"), "rhete");
}

TEST(Cute, GeneratedRecordsMatchIndependentOperations) {
  const auto recs = gen_cute(top_words(), CuteConfig::uniform(300, 4));
  ASSERT_EQ(recs.size(), 2400u);
  std::map<int, std::size_t> per_type;
  for (const auto& q : recs) {
    EXPECT_EQ(q.task_family, TaskFamily::cute);
    EXPECT_TRUE(oracle::cute_record_ok(q)) << q.task_type << ": " << q.prompt << " -> " << q.answer;
    ++per_type[q.task_type];
  }
  for (int t : kCuteTypes) EXPECT_EQ(per_type[t], 300u);
}

TEST(Cute, TypeThreeUsesBothAnswers) {
  CuteConfig cfg;
  cfg.counts[3] = 200;
  std::set<std::string> answers;
  for (const auto& q : gen_cute(top_words(), cfg)) {
    EXPECT_EQ(q.options, (std::vector<std::string>{"Yes", "No"}));
    answers.insert(q.answer);
  }
  EXPECT_EQ(answers, (std::set<std::string>{"Yes", "No"}));
}

TEST(Cute, UnsupportedType) {
  CuteConfig cfg;
  cfg.counts[4] = 1;
  EXPECT_THROW(gen_cute(top_words(), cfg), ConfigError);
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("happy", "apply"), 2u);
  EXPECT_EQ(levenshtein("happy", "glad"), 5u);
  EXPECT_LT(levenshtein("happy", "apply"), levenshtein("happy", "glad"));
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("abc", ""), 3u);
  for (const char* x : {"", "a", "there", "kitten"}) EXPECT_EQ(levenshtein(x, x), 0u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
}

TEST(Levenshtein, MatchesRecursiveDefinition) {
  Rng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const auto a = testing::random_text(rng, rng.below(9), "abc");
    const auto b = testing::random_text(rng, rng.below(9), "abc");
    EXPECT_EQ(levenshtein(a, b), oracle::edit_distance(a, b)) << a << " / " << b;
    EXPECT_EQ(levenshtein(a, b), levenshtein(b, a));
  }
}

TEST(Addition, ReferenceItems) {
  EXPECT_EQ(format_addition(328, 869), "328+869=7911");
  EXPECT_EQ(format_addition(747, 303), "747+303=0501");
  EXPECT_EQ(format_addition(0, 0), "0+0=0");
}

TEST(Addition, StreamGrammarAndReversedSums) {
  AdditionConfig cfg;
  cfg.count = 2000;
  cfg.seed = 12;
  const auto stream = gen_addition(cfg);
  const auto items = oracle::parse_addition_stream(stream);
  ASSERT_TRUE(items);
  ASSERT_EQ(items->size(), 2000u);
  std::uint64_t max_operand = 0;
  for (const auto& it : *items) {
    EXPECT_TRUE(oracle::reversed_sum_ok(it));
    max_operand = std::max({max_operand, it.a, it.b});
  }
  EXPECT_LE(max_operand, 999u);
  EXPECT_GT(max_operand, 990u);
  EXPECT_EQ(gen_addition(cfg), stream);

  cfg.count = 0;
  EXPECT_EQ(gen_addition(cfg), "");
  cfg.count = 1;
  EXPECT_TRUE(oracle::parse_addition_stream(gen_addition(cfg)));
  cfg.operand_max = 0;
  EXPECT_THROW(gen_addition(cfg), ConfigError);
}

TEST(Addition, DigitBalanced) {
  AdditionConfig cfg;
  cfg.count = 3000;
  cfg.digit_balanced = true;
  std::map<std::size_t, std::size_t> digits;
  for (const auto& [a, b] : gen_addition_operands(cfg)) {
    EXPECT_LE(a, 999u);
    ++digits[std::to_string(a).size()];
  }
  for (std::size_t d = 1; d <= 3; ++d) EXPECT_GT(digits[d], 800u);
}

TEST(Records, JsonRoundTrip) {
  LangGameConfig cfg;
  cfg.n_train = 5;
  cfg.n_val = 2;
  auto recs = gen_langgame(top_words(), cfg);
  const auto cute = gen_cute(top_words(), CuteConfig::uniform(1, 0));
  recs.insert(recs.end(), cute.begin(), cute.end());
  const auto text = to_jsonl(recs);
  std::vector<QuestionRecord> back;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    back.push_back(record_from_json(nlohmann::json::parse(text.substr(pos, end - pos))));
    pos = end + 1;
  }
  EXPECT_EQ(back, recs);
  EXPECT_THROW(record_from_json(nlohmann::json::parse(R"({"task_family":"x"})")), ParseError);
}

}  // namespace
}  // namespace stochastok
