#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "prism/errors.hpp"

// Rule-based text features and lexicon-driven heuristic attribute scores.
// Heuristics anchor at 5.0 and move in 0.5 steps per lexicon match, clipped
// to [0, 10]; they stand in for the judge when it is offline or disabled.

namespace prism {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Number of Unicode scalars in UTF-8 text: bytes that are not continuations.
inline std::size_t utf8_scalar_count(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

inline double length_feature(std::string_view text) {
  return static_cast<double>(utf8_scalar_count(text));
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Lowercased whitespace tokens with ASCII punctuation stripped at the edges.
inline std::vector<std::string> ttr_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&]() {
    std::size_t b = 0, e = cur.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) tokens.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  flush();
  return tokens;
}

// Type-token ratio; 0 for empty text.
inline double ttr_feature(std::string_view text) {
  auto tokens = ttr_tokens(text);
  if (tokens.empty()) return 0.0;
  std::unordered_set<std::string> uniq(tokens.begin(), tokens.end());
  return static_cast<double>(uniq.size()) / static_cast<double>(tokens.size());
}

struct Lexicon {
  int version = 1;
  std::vector<std::string> formal;
  std::vector<std::string> informal;
  std::vector<std::string> agree;
  std::vector<std::string> disagree;
  std::vector<std::string> positive;  // optional sentiment support
  std::vector<std::string> negative;

  static Lexicon builtin() {
    Lexicon lex;
    lex.version = 1;
    lex.formal = {"would",        "could",      "should",       "certainly",
                  "furthermore",  "moreover",   "nevertheless", "consequently",
                  "accordingly",  "respectfully"};
    lex.informal = {"hey",   "yeah",  "cool", "awesome", "gonna",
                    "wanna", "dude",  "kinda", "totally", "btw"};
    lex.agree = {"absolutely",   "definitely", "i agree",   "great point",
                 "you are right", "exactly right", "of course", "indeed",
                 "well said",    "precisely"};
    lex.disagree = {"however",        "actually",     "i disagree", "on the contrary",
                    "unfortunately",  "not quite",    "incorrect",  "that is wrong",
                    "i am afraid",    "doubtful"};
    return lex;
  }

  static Lexicon parse(const std::string& content);
  static Lexicon load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("lexicon: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }
  std::string serialize() const;
};

inline Lexicon Lexicon::parse(const std::string& content) {
  Lexicon lex;
  lex.version = 1;
  std::vector<std::string>* section = nullptr;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t");
    std::string t = line.substr(b, e - b + 1);
    if (t[0] == '#') continue;
    if (t.rfind("version ", 0) == 0) {
      try {
        lex.version = std::stoi(t.substr(8));
      } catch (const std::exception&) {
        throw ParseError("lexicon line " + std::to_string(lineno) + ": bad version");
      }
      continue;
    }
    if (t.front() == '[' && t.back() == ']') {
      std::string name = t.substr(1, t.size() - 2);
      if (name == "formal") section = &lex.formal;
      else if (name == "informal") section = &lex.informal;
      else if (name == "agree") section = &lex.agree;
      else if (name == "disagree") section = &lex.disagree;
      else if (name == "positive") section = &lex.positive;
      else if (name == "negative") section = &lex.negative;
      else
        throw ParseError("lexicon line " + std::to_string(lineno) +
                         ": unknown section [" + name + "]");
      continue;
    }
    if (section == nullptr)
      throw ParseError("lexicon line " + std::to_string(lineno) +
                       ": entry before any section header");
    section->push_back(ascii_lower(t));
  }
  return lex;
}

inline std::string Lexicon::serialize() const {
  std::ostringstream out;
  out << "version " << version << "\n";
  auto emit = [&](const char* name, const std::vector<std::string>& list) {
    if (list.empty()) return;
    out << "[" << name << "]\n";
    for (const auto& p : list) out << p << "\n";
  };
  emit("formal", formal);
  emit("informal", informal);
  emit("agree", agree);
  emit("disagree", disagree);
  emit("positive", positive);
  emit("negative", negative);
  return out.str();
}

// Non-overlapping substring matches of the list's phrases in lowercased text.
// At each position multi-word phrases take priority over single words, longer
// entries over shorter; a match consumes its whole span.
inline std::size_t count_lexicon_matches(std::string_view lowered,
                                         const std::vector<std::string>& phrases) {
  if (phrases.empty() || lowered.empty()) return 0;
  std::vector<const std::string*> order;
  order.reserve(phrases.size());
  for (const auto& p : phrases)
    if (!p.empty()) order.push_back(&p);
  auto multi = [](const std::string& p) {
    return p.find(' ') != std::string::npos;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string* a, const std::string* b) {
                     bool ma = multi(*a), mb = multi(*b);
                     if (ma != mb) return ma;
                     return a->size() > b->size();
                   });
  std::size_t count = 0, pos = 0;
  while (pos < lowered.size()) {
    bool matched = false;
    for (const std::string* p : order) {
      if (lowered.compare(pos, p->size(), *p) == 0) {
        ++count;
        pos += p->size();
        matched = true;
        break;
      }
    }
    if (!matched) ++pos;
  }
  return count;
}

inline double clip_score(double v) { return std::min(10.0, std::max(0.0, v)); }

inline double heuristic_tone(std::string_view text, const Lexicon& lex) {
  std::string low = ascii_lower(text);
  double up = static_cast<double>(count_lexicon_matches(low, lex.formal));
  double down = static_cast<double>(count_lexicon_matches(low, lex.informal));
  return clip_score(5.0 + 0.5 * up - 0.5 * down);
}

inline double heuristic_sycophancy(std::string_view text, const Lexicon& lex) {
  std::string low = ascii_lower(text);
  double up = static_cast<double>(count_lexicon_matches(low, lex.agree));
  double down = static_cast<double>(count_lexicon_matches(low, lex.disagree));
  return clip_score(5.0 + 0.5 * up - 0.5 * down);
}

inline double heuristic_sentiment(std::string_view text, const Lexicon& lex) {
  std::string low = ascii_lower(text);
  double up = static_cast<double>(count_lexicon_matches(low, lex.positive));
  double down = static_cast<double>(count_lexicon_matches(low, lex.negative));
  return clip_score(5.0 + 0.5 * up - 0.5 * down);
}

// No reliable surface signal; report the uninformative midpoint.
inline double heuristic_creativity(std::string_view, const Lexicon&) { return 5.0; }
inline double heuristic_helpfulness(std::string_view, const Lexicon&) { return 5.0; }

inline double heuristic_score(const std::string& attribute, std::string_view text,
                              const Lexicon& lex) {
  if (attribute == "tone") return heuristic_tone(text, lex);
  if (attribute == "sycophancy") return heuristic_sycophancy(text, lex);
  if (attribute == "sentiment") return heuristic_sentiment(text, lex);
  if (attribute == "creativity") return heuristic_creativity(text, lex);
  if (attribute == "helpfulness") return heuristic_helpfulness(text, lex);
  throw ConfigError("heuristic_score: unknown attribute '" + attribute + "'");
}

}  // namespace prism
