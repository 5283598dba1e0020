#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/errors.hpp"
#include "prism/rng.hpp"

// Synthetic preference datasets with a controllable spurious channel. The
// latent label is decided only by the generalizable embedding; shortcut
// channels align with the label with probability rho per channel, so i.d. and
// o.o.d. splits share the embedding distribution and differ only in rho.

namespace prism {

enum class DataMode { vector, text };

struct SyntheticSpec {
  std::size_t d_g = 16;
  std::size_t d_s = 2;
  double rho_id = 0.95;
  double rho_ood = 0.05;
  std::size_t n_train = 4000;
  std::size_t n_id_test = 1000;
  std::size_t n_ood_test = 1000;
  double noise_std = 0.1;
  // gap between the pair's shortcut values; both sit on a shared N(0,1) base
  double shortcut_gap = 0.2;
  std::uint64_t seed = 0;
  DataMode mode = DataMode::vector;
};

inline void validate(const SyntheticSpec& spec) {
  if (spec.d_g < 1) throw ConfigError("d_g must be at least 1");
  if (spec.d_s < 1) throw ConfigError("d_s must be at least 1");
  if (spec.rho_id < 0.0 || spec.rho_id > 1.0)
    throw ConfigError("rho_id must lie in [0, 1]");
  if (spec.rho_ood < 0.0 || spec.rho_ood > 1.0)
    throw ConfigError("rho_ood must lie in [0, 1]");
  if (spec.n_train < 1 || spec.n_id_test < 1 || spec.n_ood_test < 1)
    throw ConfigError("split sizes must be at least 1");
  if (!(spec.noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!(spec.shortcut_gap > 0.0)) throw ConfigError("shortcut_gap must be > 0");
  if (spec.mode == DataMode::text && spec.d_s > 2)
    throw ConfigError("text mode implements at most 2 shortcut channels");
}

struct ResponseRecord {
  std::optional<std::string> text;
  std::vector<double> embedding;
  std::vector<double> shortcuts;
  std::optional<double> true_reward;
};

struct PreferenceTriple {
  std::string id;
  std::string prompt;
  ResponseRecord chosen;
  ResponseRecord rejected;
};

using Split = std::vector<PreferenceTriple>;

struct Dataset {
  Split train;
  Split id_test;
  Split ood_test;
};

inline constexpr std::uint64_t kWstarStream = 0x3b9d02c1;
inline constexpr std::uint64_t kTrainSplitStream = 0x51a70001;
inline constexpr std::uint64_t kIdTestSplitStream = 0x51a70002;
inline constexpr std::uint64_t kOodTestSplitStream = 0x51a70003;

// fixed latent preference direction shared by all splits of one dataset
inline std::vector<double> sample_wstar(std::size_t d_g, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kWstarStream));
  std::vector<double> w(d_g);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : w) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-12);
  for (auto& x : w) x /= norm;
  return w;
}

// template text used by text mode; every string is free of lexicon entries so
// the only lexicon matches in rendered text are the injected agree phrases
struct TextCorpus {
  std::vector<std::string> questions;
  std::vector<std::string> answers;
  std::string deflection;
  std::vector<std::string> fillers;
};

inline const TextCorpus& builtin_corpus() {
  static const TextCorpus corpus{
      {
          "What is the capital of France?",
          "How many minutes are in three hours?",
          "What gas do plants release during photosynthesis?",
          "Which planet is nearest to the sun?",
          "What is the chemical symbol for gold?",
          "How many sides does a hexagon have?",
          "What is the largest ocean on Earth?",
          "In which season do maple leaves turn red?",
          "What is the square root of 144?",
          "Which metal is liquid at room temperature?",
          "How many continents are there on Earth?",
          "What is the freezing point of water in Celsius?",
          "Which instrument has 88 keys?",
          "What is the longest river in Africa?",
          "How many legs does a spider have?",
          "What color results from mixing blue and yellow?",
      },
      {
          "The capital of France is Paris.",
          "Three hours contain 180 minutes.",
          "Plants release oxygen during photosynthesis.",
          "Mercury is the planet nearest to the sun.",
          "The chemical symbol for gold is Au.",
          "A hexagon has six sides.",
          "The Pacific is the largest ocean on Earth.",
          "Maple leaves turn red in autumn.",
          "The square root of 144 is 12.",
          "Mercury is liquid at room temperature.",
          "There are seven continents on Earth.",
          "Water freezes at zero degrees Celsius.",
          "The piano has 88 keys.",
          "The Nile is the longest river in Africa.",
          "A spider has eight legs.",
          "Mixing blue and yellow makes green.",
      },
      "The answer depends on several details that the question leaves open.",
      {
          "The narrow path along the river bends gently toward the old stone "
          "bridge near the mill.",
          "Morning light settled over the quiet harbor while fishing boats "
          "drifted past the pier.",
          "A steady wind moved across the meadow, bending tall grass in slow "
          "even waves.",
          "The library reading room stayed calm as pages turned beneath warm "
          "amber lamps.",
          "Snow gathered on the cedar branches until the whole ridge looked "
          "soft and pale.",
          "Street vendors arranged baskets of ripe fruit along the edge of "
          "the market square.",
          "Distant hills faded into a blue haze as evening settled over the "
          "valley floor.",
          "Rain tapped lightly on the tin roof while the kettle warmed on "
          "the iron stove.",
      },
  };
  return corpus;
}

// channel 0 renders length: the count varies through both latent lobes so the
// extracted length feature tracks the latent rank even where clipping binds
inline std::size_t padding_count(double z) {
  double c = std::floor(5.0 + 2.5 * z);
  if (c < 0.0) c = 0.0;
  if (c > 10.0) c = 10.0;
  return static_cast<std::size_t>(c);
}

// channel 1 renders agreement: the negative lobe maps to exactly zero phrases
// so rho = 1 gives every chosen text a phrase and no rejected text any
inline std::size_t agree_count(double z) {
  double c = std::floor(2.0 + 1.5 * z);
  if (c < 0.0) c = 0.0;
  if (c > 8.0) c = 8.0;
  return static_cast<std::size_t>(c);
}

namespace detail {

inline const std::array<std::string, 10> kAgreeSentences = [] {
  // builtin lexicon agree entries rendered as standalone sentences
  std::array<std::string, 10> out{
      "absolutely", "definitely",    "i agree",  "great point", "you are right",
      "exactly right", "of course", "indeed",   "well said",   "precisely"};
  for (auto& s : out) {
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    s += '.';
  }
  return out;
}();

inline std::string format_id(std::string_view split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return std::string(split) + "-" + buf;
}

inline Split gen_split(const SyntheticSpec& spec, double rho, std::size_t n,
                       const std::vector<double>& wstar, std::uint64_t stream,
                       std::string_view split_name) {
  Rng rng(derive_seed(spec.seed, stream));
  const TextCorpus& corpus = builtin_corpus();
  Split out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> za(spec.d_g), zb(spec.d_g);
    for (auto& x : za) x = rng.normal();
    double dot_a = 0.0, dot_b = 0.0;
    for (std::size_t k = 0; k < spec.d_g; ++k) dot_a += wstar[k] * za[k];
    do {
      for (auto& x : zb) x = rng.normal();
      dot_b = 0.0;
      for (std::size_t k = 0; k < spec.d_g; ++k) dot_b += wstar[k] * zb[k];
    } while (dot_b == dot_a);  // labels must be strict

    const bool a_chosen = dot_a > dot_b;
    const std::vector<double>& zc = a_chosen ? za : zb;
    const std::vector<double>& zr = a_chosen ? zb : za;
    const double reward_c = a_chosen ? dot_a : dot_b;
    const double reward_r = a_chosen ? dot_b : dot_a;

    std::vector<double> sc(spec.d_s), sr(spec.d_s);
    for (std::size_t c = 0; c < spec.d_s; ++c) {
      double hi, lo;
      if (spec.mode == DataMode::vector) {
        double base = rng.normal();
        double delta;
        do {
          delta = std::abs(rng.normal()) * spec.shortcut_gap;
        } while (delta == 0.0);
        hi = base + delta / 2.0;
        lo = base - delta / 2.0;
      } else {
        // two well-separated lobes so text rendering preserves latent rank
        hi = 1.0 + std::abs(rng.normal()) * 0.6;
        lo = -(1.0 + std::abs(rng.normal()) * 0.6);
      }
      bool aligned = rng.uniform01() < rho;
      sc[c] = aligned ? hi : lo;
      sr[c] = aligned ? lo : hi;
    }

    PreferenceTriple triple;
    triple.id = format_id(split_name, i);
    triple.chosen.shortcuts = sc;
    triple.rejected.shortcuts = sr;
    triple.chosen.true_reward = reward_c;
    triple.rejected.true_reward = reward_r;
    triple.chosen.embedding.resize(spec.d_g);
    triple.rejected.embedding.resize(spec.d_g);
    for (std::size_t k = 0; k < spec.d_g; ++k)
      triple.chosen.embedding[k] = zc[k] + spec.noise_std * rng.normal();
    for (std::size_t k = 0; k < spec.d_g; ++k)
      triple.rejected.embedding[k] = zr[k] + spec.noise_std * rng.normal();

    if (spec.mode == DataMode::text) {
      std::size_t topic = rng.uniform_index(corpus.questions.size());
      triple.prompt = corpus.questions[topic];
      auto render = [&](const std::vector<double>& s, bool is_chosen) {
        std::string text =
            is_chosen ? corpus.answers[topic] : corpus.deflection;
        if (s.size() >= 2)
          for (std::size_t k = 0; k < agree_count(s[1]); ++k) {
            text += ' ';
            text += kAgreeSentences[rng.uniform_index(kAgreeSentences.size())];
          }
        for (std::size_t k = 0; k < padding_count(s[0]); ++k) {
          text += ' ';
          text += corpus.fillers[rng.uniform_index(corpus.fillers.size())];
        }
        return text;
      };
      triple.chosen.text = render(sc, true);
      triple.rejected.text = render(sr, false);
    }
    out.push_back(std::move(triple));
  }
  return out;
}

}  // namespace detail

inline Dataset gen_vector_dataset(const SyntheticSpec& spec) {
  validate(spec);
  if (spec.mode != DataMode::vector)
    throw ConfigError("gen_vector_dataset requires vector mode");
  std::vector<double> wstar = sample_wstar(spec.d_g, spec.seed);
  Dataset out;
  out.train = detail::gen_split(spec, spec.rho_id, spec.n_train, wstar,
                                kTrainSplitStream, "train");
  out.id_test = detail::gen_split(spec, spec.rho_id, spec.n_id_test, wstar,
                                  kIdTestSplitStream, "id_test");
  out.ood_test = detail::gen_split(spec, spec.rho_ood, spec.n_ood_test, wstar,
                                   kOodTestSplitStream, "ood_test");
  return out;
}

inline Dataset gen_text_dataset(const SyntheticSpec& spec) {
  validate(spec);
  if (spec.mode != DataMode::text)
    throw ConfigError("gen_text_dataset requires text mode");
  std::vector<double> wstar = sample_wstar(spec.d_g, spec.seed);
  Dataset out;
  out.train = detail::gen_split(spec, spec.rho_id, spec.n_train, wstar,
                                kTrainSplitStream, "train");
  out.id_test = detail::gen_split(spec, spec.rho_id, spec.n_id_test, wstar,
                                  kIdTestSplitStream, "id_test");
  out.ood_test = detail::gen_split(spec, spec.rho_ood, spec.n_ood_test, wstar,
                                   kOodTestSplitStream, "ood_test");
  return out;
}

inline Dataset gen_dataset(const SyntheticSpec& spec) {
  validate(spec);
  return spec.mode == DataMode::vector ? gen_vector_dataset(spec)
                                       : gen_text_dataset(spec);
}

namespace detail {

inline nlohmann::ordered_json response_to_json(const ResponseRecord& r) {
  nlohmann::ordered_json j;
  if (r.text)
    j["text"] = *r.text;
  else
    j["text"] = nullptr;
  j["embedding"] = r.embedding;
  j["shortcuts"] = r.shortcuts;
  if (r.true_reward)
    j["true_reward"] = *r.true_reward;
  else
    j["true_reward"] = nullptr;
  return j;
}

inline ResponseRecord response_from_json(const nlohmann::json& j,
                                         std::size_t line_no,
                                         const char* side) {
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("line " + std::to_string(line_no) + ": " + side + " " +
                      what);
  };
  if (!j.is_object()) throw fail("record must be an object");
  for (const char* key : {"text", "embedding", "shortcuts", "true_reward"})
    if (!j.contains(key)) throw fail(std::string("missing field '") + key + "'");
  ResponseRecord out;
  const auto& text = j.at("text");
  if (text.is_string())
    out.text = text.get<std::string>();
  else if (!text.is_null())
    throw fail("field 'text' must be a string or null");
  for (const char* key : {"embedding", "shortcuts"}) {
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw fail(std::string("field '") + key + "' must be an array");
    auto& dst = std::string_view(key) == "embedding" ? out.embedding : out.shortcuts;
    dst.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_number()) throw fail(std::string("field '") + key + "' must hold numbers");
      dst.push_back(v.get<double>());
    }
  }
  const auto& reward = j.at("true_reward");
  if (reward.is_number())
    out.true_reward = reward.get<double>();
  else if (!reward.is_null())
    throw fail("field 'true_reward' must be a number or null");
  return out;
}

}  // namespace detail

inline void write_jsonl(const Split& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const PreferenceTriple& t : split) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["prompt"] = t.prompt;
    j["chosen"] = detail::response_to_json(t.chosen);
    j["rejected"] = detail::response_to_json(t.rejected);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

inline Split read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  Split out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object())
      throw ParseError("line " + std::to_string(line_no) +
                       ": triple must be an object");
    for (const char* key : {"id", "prompt", "chosen", "rejected"})
      if (!j.contains(key))
        throw ParseError("line " + std::to_string(line_no) +
                         ": missing field '" + key + "'");
    if (!j.at("id").is_string() || !j.at("prompt").is_string())
      throw ParseError("line " + std::to_string(line_no) +
                       ": 'id' and 'prompt' must be strings");
    PreferenceTriple t;
    t.id = j.at("id").get<std::string>();
    t.prompt = j.at("prompt").get<std::string>();
    t.chosen = detail::response_from_json(j.at("chosen"), line_no, "chosen");
    t.rejected =
        detail::response_from_json(j.at("rejected"), line_no, "rejected");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace prism
