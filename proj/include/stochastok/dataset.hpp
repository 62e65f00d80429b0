#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochastok/errors.hpp"
#include "stochastok/rng.hpp"
#include "stochastok/vocab.hpp"

namespace stochastok {

enum class TaskFamily : std::uint8_t { langgame, cute };
enum class DataSplit : std::uint8_t { train, val, holdout };

/// Substring-length partition for LangGame types 2-4.
///   off       : any length 1..L for every split.
///   main_text : train/val 2*len <= L, holdout 2*len > L.
///   appendix  : train/val 2*len >= L, holdout 2*len < L.
enum class OodMode : std::uint8_t { off, main_text, appendix };

inline const char* to_string(TaskFamily f) { return f == TaskFamily::langgame ? "langgame" : "cute"; }

inline const char* to_string(DataSplit s) {
  switch (s) {
    case DataSplit::train: return "train";
    case DataSplit::val: return "val";
    case DataSplit::holdout: return "holdout";
  }
  return "?";
}

inline const char* to_string(OodMode m) {
  switch (m) {
    case OodMode::off: return "off";
    case OodMode::main_text: return "main_text";
    case OodMode::appendix: return "appendix";
  }
  return "?";
}

struct QuestionRecord {
  TaskFamily task_family = TaskFamily::langgame;
  int task_type = 0;
  std::string prompt;
  std::vector<std::string> options;
  std::string answer;
  std::string aux;
  DataSplit split = DataSplit::train;
  std::uint64_t seed_index = 0;

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

/// Ordered list of distinct lowercase words.
class WordList {
 public:
  explicit WordList(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.empty()) throw ConfigError("word list is empty");
    std::unordered_set<std::string_view> seen;
    for (const auto& w : words_) {
      if (w.empty()) throw ConfigError("word list contains an empty word");
      for (char c : w) {
        if (c < 'a' || c > 'z') throw ConfigError("word '" + w + "' is not lowercase a-z");
      }
      if (!seen.insert(w).second) throw ConfigError("duplicate word '" + w + "'");
    }
  }

  /// One word per line; blank lines and surrounding whitespace ignored.
  static WordList parse(std::string_view text) {
    std::vector<std::string> words;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      const auto b = line.find_first_not_of(" \t\r");
      if (b != std::string_view::npos) {
        const auto e = line.find_last_not_of(" \t\r");
        words.emplace_back(line.substr(b, e - b + 1));
      }
      pos = end + 1;
    }
    return WordList(std::move(words));
  }

  static WordList load(const std::filesystem::path& path) { return parse(read_file(path)); }

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& operator[](std::size_t i) const { return words_[i]; }
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
};

// ---------------------------------------------------------------------------
// LangGame

namespace langgame {

inline constexpr std::array<const char*, 2> kWhich = {"Which", "What"};
inline constexpr std::array<const char*, 7> kWord = {" word", "", " string", " option", " choice",
                                                     " option word", " option string"};
inline constexpr std::array<const char*, 3> kThe = {"The", "The possible", "The available"};
inline constexpr std::array<const char*, 4> kOptions = {" options", " choices", " option words",
                                                        " option strings"};
inline constexpr std::array<const char*, 2> kAre = {" are", ""};
inline constexpr std::size_t kPhrasings =
    kWhich.size() * kWord.size() * kThe.size() * kOptions.size() * kAre.size();

/// Indices into the five placeholder synonym lists.
struct Phrasing {
  std::size_t which = 0, word = 0, the = 0, options = 0, are = 0;
};

inline std::string question(int task_type, std::string_view aux) {
  const std::string a(aux);
  switch (task_type) {
    case 1: return "has the most letter '" + a + "'s";
    case 2: return "contains '" + a + "'";
    case 3: return "starts with '" + a + "'";
    case 4: return "ends with '" + a + "'";
    case 5: return "is the longest";
    case 6: return "is the shortest";
  }
  throw ConfigError("LangGame task type must be 1-6");
}

/// "<WHICH><WORD> <question>? <THE><OPTIONS><ARE>: [ a, b, c, d]. Answer:"
inline std::string render_prompt(const Phrasing& p, int task_type, std::string_view aux,
                                 const std::vector<std::string>& options) {
  std::string s = std::string(kWhich[p.which]) + kWord[p.word] + " " + question(task_type, aux) +
                  "? " + kThe[p.the] + kOptions[p.options] + kAre[p.are] + ": [ ";
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i) s += ", ";
    s += options[i];
  }
  s += "]. Answer:";
  return s;
}

}  // namespace langgame

/// Recomputes the correct option from scratch and checks that `q.answer` is
/// the one and only correct option.
inline bool verify_langgame(const QuestionRecord& q) {
  if (q.task_family != TaskFamily::langgame) return false;
  if (q.task_type < 1 || q.task_type > 6 || q.options.size() < 2) return false;
  if (std::find(q.options.begin(), q.options.end(), q.answer) == q.options.end()) return false;
  const bool takes_aux = q.task_type <= 4;
  if (takes_aux == q.aux.empty()) return false;
  if (q.task_type == 1 && q.aux.size() != 1) return false;

  // Score each option; the answer must be the unique maximum.
  std::vector<long> score;
  for (const auto& o : q.options) {
    long s = 0;
    switch (q.task_type) {
      case 1: s = static_cast<long>(std::count(o.begin(), o.end(), q.aux[0])); break;
      case 2: s = o.find(q.aux) != std::string::npos; break;
      case 3: s = o.starts_with(q.aux); break;
      case 4: s = o.ends_with(q.aux); break;
      case 5: s = static_cast<long>(o.size()); break;
      case 6: s = -static_cast<long>(o.size()); break;
    }
    score.push_back(s);
  }
  const long best = *std::max_element(score.begin(), score.end());
  if (q.task_type <= 4 && best <= 0) return false;
  std::size_t winners = 0, winner = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (score[i] == best) {
      ++winners;
      winner = i;
    }
  }
  return winners == 1 && q.options[winner] == q.answer;
}

struct LangGameConfig {
  std::size_t n_train = 10000;
  std::size_t n_val = 1000;
  // Only generated when ood_mode != off.
  std::size_t n_holdout = 1000;
  std::uint64_t seed = 0;
  OodMode ood_mode = OodMode::off;
};

namespace detail {

inline constexpr std::uint64_t kLangGameStream = 0x4c414e4747414d45ULL;  // "LANGGAME"
inline constexpr std::uint64_t kCuteStream = 0x4355544500000000ULL;      // "CUTE"
inline constexpr std::uint64_t kAdditionStream = 0x4144444954494f4eULL;  // "ADDITION"
inline constexpr int kMaxResamples = 100000;

// k distinct indices in [0, n), in sampling order.
inline std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> out;
  while (out.size() < k) {
    const auto i = static_cast<std::size_t>(rng.below(n));
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

inline bool length_allowed(std::size_t len, std::size_t word_len, DataSplit split, OodMode mode) {
  switch (mode) {
    case OodMode::off: return true;
    case OodMode::main_text:
      return split == DataSplit::holdout ? 2 * len > word_len : 2 * len <= word_len;
    case OodMode::appendix:
      return split == DataSplit::holdout ? 2 * len < word_len : 2 * len >= word_len;
  }
  return false;
}

inline QuestionRecord make_langgame(const WordList& words, std::uint64_t seed, std::uint64_t index,
                                    DataSplit split, OodMode mode) {
  Rng rng(derive_seed(seed, kLangGameStream, index));
  const int type = 1 + static_cast<int>(rng.below(6));
  langgame::Phrasing ph{rng.below(langgame::kWhich.size()), rng.below(langgame::kWord.size()),
                        rng.below(langgame::kThe.size()), rng.below(langgame::kOptions.size()),
                        rng.below(langgame::kAre.size())};
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    QuestionRecord q;
    q.task_family = TaskFamily::langgame;
    q.task_type = type;
    q.split = split;
    q.seed_index = index;
    for (auto i : sample_distinct(rng, words.size(), 4)) q.options.push_back(words[i]);
    q.answer = q.options[rng.below(q.options.size())];
    const std::string& ans = q.answer;
    if (type == 1) {
      q.aux = std::string(1, ans[rng.below(ans.size())]);
    } else if (type <= 4) {
      // Uniform over valid (start, length) positions.
      std::vector<std::pair<std::size_t, std::size_t>> spans;
      for (std::size_t len = 1; len <= ans.size(); ++len) {
        if (!length_allowed(len, ans.size(), split, mode)) continue;
        if (type == 2) {
          for (std::size_t st = 0; st + len <= ans.size(); ++st) spans.emplace_back(st, len);
        } else {
          spans.emplace_back(type == 3 ? 0 : ans.size() - len, len);
        }
      }
      if (spans.empty()) continue;
      const auto [st, len] = spans[rng.below(spans.size())];
      q.aux = ans.substr(st, len);
    }
    q.prompt = langgame::render_prompt(ph, type, q.aux, q.options);
    if (verify_langgame(q)) return q;
  }
  throw ConfigError("could not generate a LangGame question with a unique answer");
}

}  // namespace detail

/// Train records first, then validation, then (when ood_mode != off) holdout.
/// Record i uses the seed derived from (seed, i), so any index range can be
/// generated independently.
inline std::vector<QuestionRecord> gen_langgame(const WordList& words, const LangGameConfig& cfg) {
  if (words.size() < 4) throw ConfigError("LangGame needs at least 4 words");
  const std::size_t n_holdout = cfg.ood_mode == OodMode::off ? 0 : cfg.n_holdout;
  std::vector<QuestionRecord> out;
  out.reserve(cfg.n_train + cfg.n_val + n_holdout);
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < cfg.n_train; ++i, ++index)
    out.push_back(detail::make_langgame(words, cfg.seed, index, DataSplit::train, cfg.ood_mode));
  for (std::size_t i = 0; i < cfg.n_val; ++i, ++index)
    out.push_back(detail::make_langgame(words, cfg.seed, index, DataSplit::val, cfg.ood_mode));
  for (std::size_t i = 0; i < n_holdout; ++i, ++index)
    out.push_back(detail::make_langgame(words, cfg.seed, index, DataSplit::holdout, cfg.ood_mode));
  return out;
}

// ---------------------------------------------------------------------------
// CUTE subword tasks

inline constexpr std::array<int, 8> kCuteTypes = {1, 2, 3, 5, 7, 9, 11, 13};

/// Unit-cost edit distance (insert, delete, substitute) over bytes.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

namespace cute {

inline std::string spell(std::string_view w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ' ';
    out += w[i];
  }
  return out;
}

inline std::string insert_after(std::string_view w, char target, char inserted) {
  std::string out;
  for (char c : w) {
    out += c;
    if (c == target) out += inserted;
  }
  return out;
}

inline std::string delete_all(std::string_view w, char target) {
  std::string out;
  for (char c : w) {
    if (c != target) out += c;
  }
  return out;
}

inline std::string replace_all(std::string_view w, char from, char to) {
  std::string out(w);
  std::replace(out.begin(), out.end(), from, to);
  return out;
}

/// Every `a` becomes `b` and every `b` becomes `a`.
inline std::string swap_chars(std::string_view w, char a, char b) {
  std::string out(w);
  for (char& c : out) {
    if (c == a) {
      c = b;
    } else if (c == b) {
      c = a;
    }
  }
  return out;
}

inline std::string single_quoted(std::string_view s) { return "'" + std::string(s) + "'"; }

}  // namespace cute

struct CuteConfig {
  // Records per task type; types not listed are not generated.
  std::map<int, std::size_t> counts;
  std::uint64_t seed = 0;

  static CuteConfig uniform(std::size_t per_type, std::uint64_t seed) {
    CuteConfig c;
    for (int t : kCuteTypes) c.counts[t] = per_type;
    c.seed = seed;
    return c;
  }
};

namespace detail {

inline char random_letter(Rng& rng) { return static_cast<char>('a' + rng.below(26)); }

// One random edit: swap two adjacent characters, substitute one character, or
// shuffle a 3-character window.
inline std::string edit_once(std::string s, Rng& rng) {
  for (;;) {
    switch (rng.below(3)) {
      case 0:
        if (s.size() < 2) continue;
        {
          const auto i = rng.below(s.size() - 1);
          std::swap(s[i], s[i + 1]);
        }
        return s;
      case 1: {
        const auto i = rng.below(s.size());
        char c;
        do c = random_letter(rng);
        while (c == s[i]);
        s[i] = c;
        return s;
      }
      default:
        if (s.size() < 3) continue;
        {
          const auto i = rng.below(s.size() - 2);
          for (std::size_t k = 2; k > 0; --k) std::swap(s[i + k], s[i + rng.below(k + 1)]);
        }
        return s;
    }
  }
}

// Three distinct distractors, each one edit away from `base` and none equal
// to it; `render` maps an edited base string to option text.
template <typename Render>
std::optional<std::vector<std::string>> distractors(const std::string& base, const std::string& answer,
                                                    Rng& rng, Render render) {
  std::vector<std::string> out;
  for (int tries = 0; tries < 1000 && out.size() < 3; ++tries) {
    std::string d = render(edit_once(base, rng));
    if (d == answer || std::find(out.begin(), out.end(), d) != out.end()) continue;
    out.push_back(std::move(d));
  }
  if (out.size() < 3) return std::nullopt;
  return out;
}

inline void shuffle_options(std::vector<std::string>& options, Rng& rng) {
  for (std::size_t i = options.size(); i > 1; --i) std::swap(options[i - 1], options[rng.below(i)]);
}

inline std::vector<char> distinct_letters(std::string_view w) {
  std::vector<char> out;
  for (char c : w) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

inline QuestionRecord make_cute(const WordList& words, int type, std::uint64_t seed,
                                std::uint64_t index) {
  Rng rng(derive_seed(seed, kCuteStream, index));
  using namespace cute;
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    QuestionRecord q;
    q.task_family = TaskFamily::cute;
    q.task_type = type;
    q.split = DataSplit::train;
    q.seed_index = index;
    const std::string word = words[rng.below(words.size())];
    const auto letters = distinct_letters(word);
    const auto identity = [](std::string s) { return s; };
    std::optional<std::vector<std::string>> wrong;

    switch (type) {
      case 1:
        q.prompt = "Spell out the word: " + word;
        q.answer = spell(word);
        q.aux = word;
        wrong = distractors(word, q.answer, rng, [](const std::string& s) { return spell(s); });
        break;
      case 2: {
        if (words.size() < 4) throw ConfigError("CUTE type 2 needs at least 4 words");
        q.prompt = "Write the word that is spelled out (no spaces): " + spell(word);
        q.answer = word;
        q.aux = word;
        std::vector<std::string> others;
        while (others.size() < 3) {
          const auto& w = words[rng.below(words.size())];
          if (w != word && std::find(others.begin(), others.end(), w) == others.end()) others.push_back(w);
        }
        wrong = std::move(others);
        break;
      }
      case 3: {
        const bool present = rng.below(2) == 0;
        char c;
        if (present) {
          c = letters[rng.below(letters.size())];
        } else {
          if (letters.size() == 26) continue;
          do c = random_letter(rng);
          while (word.find(c) != std::string::npos);
        }
        q.prompt = "Is there a " + single_quoted(std::string(1, c)) + " in " + single_quoted(word) + "?";
        q.answer = present ? "Yes" : "No";
        q.aux = std::string(1, c);
        q.options = {"Yes", "No"};
        return q;
      }
      case 5: {
        const std::string a = words[rng.below(words.size())];
        const std::string b = words[rng.below(words.size())];
        if (a == word || b == word || a == b) continue;
        const auto da = levenshtein(word, a), db = levenshtein(word, b);
        if (da == db) continue;
        q.prompt = "Closer in Levenshtein distance to " + single_quoted(word) + ": " + a + " or " + b + "?";
        q.answer = da < db ? a : b;
        q.aux = word;
        q.options = {a, b};
        return q;
      }
      case 7: {
        const char target = letters[rng.below(letters.size())];
        const char inserted = random_letter(rng);
        q.prompt = "Add " + single_quoted(std::string(1, inserted)) + " after every " +
                   single_quoted(std::string(1, target)) + " in " + single_quoted(word);
        q.answer = insert_after(word, target, inserted);
        q.aux = std::string{target, ' ', inserted};
        wrong = distractors(q.answer, q.answer, rng, identity);
        break;
      }
      case 9: {
        const char target = letters[rng.below(letters.size())];
        q.prompt = "Delete every " + single_quoted(std::string(1, target)) + " in " + single_quoted(word);
        q.answer = delete_all(word, target);
        q.aux = std::string(1, target);
        if (q.answer.empty()) continue;
        wrong = distractors(q.answer, q.answer, rng, identity);
        break;
      }
      case 11: {
        const char from = letters[rng.below(letters.size())];
        char to;
        do to = random_letter(rng);
        while (to == from);
        q.prompt = "Replace every " + single_quoted(std::string(1, from)) + " with " +
                   single_quoted(std::string(1, to)) + " in " + single_quoted(word);
        q.answer = replace_all(word, from, to);
        q.aux = std::string{from, ' ', to};
        wrong = distractors(q.answer, q.answer, rng, identity);
        break;
      }
      case 13: {
        if (letters.size() < 2) continue;
        const auto picks = sample_distinct(rng, letters.size(), 2);
        const char a = letters[picks[0]], b = letters[picks[1]];
        q.prompt = "Swap " + single_quoted(std::string(1, a)) + " and " + single_quoted(std::string(1, b)) +
                   " in " + single_quoted(word);
        q.answer = swap_chars(word, a, b);
        q.aux = std::string{a, ' ', b};
        wrong = distractors(q.answer, q.answer, rng, identity);
        break;
      }
      default:
        throw ConfigError("CUTE task type " + std::to_string(type) +
                          " is not one of the subword types 1,2,3,5,7,9,11,13");
    }
    if (!wrong) continue;
    q.options = std::move(*wrong);
    q.options.push_back(q.answer);
    shuffle_options(q.options, rng);
    return q;
  }
  throw ConfigError("could not generate a CUTE question of type " + std::to_string(type));
}

}  // namespace detail

/// Records grouped by ascending task type; record i (over the whole output)
/// uses the seed derived from (seed, i).
inline std::vector<QuestionRecord> gen_cute(const WordList& words, const CuteConfig& cfg) {
  std::vector<QuestionRecord> out;
  std::uint64_t index = 0;
  for (const auto& [type, count] : cfg.counts) {
    if (std::find(kCuteTypes.begin(), kCuteTypes.end(), type) == kCuteTypes.end()) {
      throw ConfigError("CUTE task type " + std::to_string(type) +
                        " is not one of the subword types 1,2,3,5,7,9,11,13");
    }
    for (std::size_t i = 0; i < count; ++i, ++index) {
      out.push_back(detail::make_cute(words, type, cfg.seed, index));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-digit addition

struct AdditionConfig {
  std::uint64_t operand_max = 999;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  // Draw the digit count uniformly first, then a value with that many digits.
  bool digit_balanced = false;
};

/// "a+b=r" with r the decimal digits of a+b in reverse order.
inline std::string format_addition(std::uint64_t a, std::uint64_t b) {
  std::string sum = std::to_string(a + b);
  std::reverse(sum.begin(), sum.end());
  return std::to_string(a) + "+" + std::to_string(b) + "=" + sum;
}

inline std::vector<std::pair<std::uint64_t, std::uint64_t>> gen_addition_operands(
    const AdditionConfig& cfg) {
  if (cfg.operand_max < 1) throw ConfigError("operand_max must be >= 1");
  const std::size_t max_digits = std::to_string(cfg.operand_max).size();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    Rng rng(derive_seed(cfg.seed, detail::kAdditionStream, i));
    auto draw = [&]() -> std::uint64_t {
      if (!cfg.digit_balanced) return rng.between(0, cfg.operand_max);
      const std::size_t d = 1 + rng.below(max_digits);
      std::uint64_t lo = 0, hi = 9;
      for (std::size_t k = 1; k < d; ++k) {
        lo = lo == 0 ? 10 : lo * 10;
        hi = hi * 10 + 9;
      }
      return rng.between(lo, std::min(hi, cfg.operand_max));
    };
    const auto a = draw();
    const auto b = draw();
    out.emplace_back(a, b);
  }
  return out;
}

/// Stream "$ a+b=r $ c+d=s $ ... $"; empty when count is 0.
inline std::string gen_addition(const AdditionConfig& cfg) {
  std::string out;
  for (const auto& [a, b] : gen_addition_operands(cfg)) {
    out += "$ ";
    out += format_addition(a, b);
    out += ' ';
  }
  if (!out.empty()) out += '$';
  return out;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON records

inline nlohmann::ordered_json to_json(const QuestionRecord& q) {
  nlohmann::ordered_json j;
  j["task_family"] = to_string(q.task_family);
  j["task_type"] = q.task_type;
  j["prompt"] = q.prompt;
  j["options"] = q.options;
  j["answer"] = q.answer;
  j["aux"] = q.aux;
  j["split"] = to_string(q.split);
  j["seed_index"] = q.seed_index;
  return j;
}

inline QuestionRecord record_from_json(const nlohmann::json& j) {
  try {
    QuestionRecord q;
    const auto fam = j.at("task_family").get<std::string>();
    if (fam == "langgame") {
      q.task_family = TaskFamily::langgame;
    } else if (fam == "cute") {
      q.task_family = TaskFamily::cute;
    } else {
      throw ParseError("unknown task_family '" + fam + "'");
    }
    q.task_type = j.at("task_type").get<int>();
    q.prompt = j.at("prompt").get<std::string>();
    q.options = j.at("options").get<std::vector<std::string>>();
    q.answer = j.at("answer").get<std::string>();
    q.aux = j.at("aux").get<std::string>();
    const auto split = j.at("split").get<std::string>();
    if (split == "train") {
      q.split = DataSplit::train;
    } else if (split == "val") {
      q.split = DataSplit::val;
    } else if (split == "holdout") {
      q.split = DataSplit::holdout;
    } else {
      throw ParseError("unknown split '" + split + "'");
    }
    q.seed_index = j.at("seed_index").get<std::uint64_t>();
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("question record: ") + e.what());
  }
}

inline std::string to_jsonl(const std::vector<QuestionRecord>& records) {
  std::string out;
  for (const auto& q : records) {
    out += to_json(q).dump();
    out += '\n';
  }
  return out;
}

}  // namespace stochastok
