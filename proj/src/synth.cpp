#include "futurelm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "futurelm/errors.hpp"
#include "futurelm/rng.hpp"

namespace flm {

std::vector<std::string> default_templates() {
  return {
      "we propose a new _ for _ .",
      "this paper studies _ and _ in the _ setting .",
      "our _ improves the _ of _ models .",
      "the proposed _ is based on _ with _ .",
      "results show that _ outperforms _ on _ .",
      "we present _ , a simple _ approach to _ .",
      "in this work we apply _ to _ .",
      "experiments on _ demonstrate the value of our _ .",
      "we also analyze how _ affects _ .",
      "finally , we release _ for _ research .",
  };
}

void DriftSpec::validate() const {
  if (rising + falling + stable == 0) throw ConfigError("drift spec has no content words");
  if (window < 1) throw ConfigError("drift spec window must be >= 1");
  if (years < window + 2) {
    throw ConfigError("drift spec needs at least window + 2 = " + std::to_string(window + 2) + " years");
  }
  if (docs_per_year == 0) throw ConfigError("docs_per_year must be positive");
  if (min_tokens == 0 || max_tokens < min_tokens) throw ConfigError("need 0 < min_tokens <= max_tokens");
  for (double w : {rise_low, rise_high, fall_high, fall_low, stable_weight}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("trajectory weights must be finite and >= 0");
  }
  if (!(rise_steepness > 0.0)) throw ConfigError("rise_steepness must be positive");
  if (falling > 0 && (!(fall_low > 0.0) || !(fall_high > 0.0))) {
    throw ConfigError("exponential decay needs positive endpoints");
  }
  for (const auto& t : templates) {
    if (t.find('_') == std::string::npos) throw ConfigError("template without a slot: '" + t + "'");
  }
}

nlohmann::json DriftSpec::to_json() const {
  return {{"rising", rising},
          {"falling", falling},
          {"stable", stable},
          {"years", years},
          {"docs_per_year", docs_per_year},
          {"min_tokens", min_tokens},
          {"max_tokens", max_tokens},
          {"rise_low", rise_low},
          {"rise_high", rise_high},
          {"rise_steepness", rise_steepness},
          {"fall_high", fall_high},
          {"fall_low", fall_low},
          {"stable_weight", stable_weight},
          {"window", window},
          {"templates", templates},
          {"seed", seed}};
}

DriftSpec DriftSpec::from_json(const nlohmann::json& j) {
  DriftSpec s;
  s.rising = j.value("rising", s.rising);
  s.falling = j.value("falling", s.falling);
  s.stable = j.value("stable", s.stable);
  s.years = j.value("years", s.years);
  s.docs_per_year = j.value("docs_per_year", s.docs_per_year);
  s.min_tokens = j.value("min_tokens", s.min_tokens);
  s.max_tokens = j.value("max_tokens", s.max_tokens);
  s.rise_low = j.value("rise_low", s.rise_low);
  s.rise_high = j.value("rise_high", s.rise_high);
  s.rise_steepness = j.value("rise_steepness", s.rise_steepness);
  s.fall_high = j.value("fall_high", s.fall_high);
  s.fall_low = j.value("fall_low", s.fall_low);
  s.stable_weight = j.value("stable_weight", s.stable_weight);
  s.window = j.value("window", s.window);
  s.templates = j.value("templates", s.templates);
  s.seed = j.value("seed", s.seed);
  return s;
}

nlohmann::json TrendLabels::to_json() const {
  return {{"rising", rising}, {"falling", falling}, {"stable", stable}};
}

TrendLabels TrendLabels::from_json(const nlohmann::json& j) {
  TrendLabels t;
  t.rising = j.at("rising").get<std::vector<std::string>>();
  t.falling = j.at("falling").get<std::vector<std::string>>();
  t.stable = j.at("stable").get<std::vector<std::string>>();
  return t;
}

std::vector<std::string> content_word_names(std::size_t count, const std::vector<std::string>& reserved) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u"};
  constexpr std::size_t kSyllables = std::size(kOnsets) * std::size(kVowels);
  std::set<std::string> taken(reserved.begin(), reserved.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; out.size() < count; ++i) {
    std::string name;
    std::size_t x = i;
    for (int s = 0; s < 3; ++s) {
      const std::size_t syl = x % kSyllables;
      x /= kSyllables;
      name += kOnsets[syl / std::size(kVowels)];
      name += kVowels[syl % std::size(kVowels)];
    }
    if (taken.insert(name).second) out.push_back(name);
  }
  return out;
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double position(const DriftSpec& spec, std::size_t t) {
  return spec.years > 1 ? static_cast<double>(t) / static_cast<double>(spec.years - 1) : 0.0;
}

std::size_t pick(std::span<const double> cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

double rising_weight(const DriftSpec& spec, std::size_t t) {
  const double k = spec.rise_steepness;
  const double lo = logistic(-k / 2);
  const double hi = logistic(k / 2);
  const double z = (logistic(k * (position(spec, t) - 0.5)) - lo) / (hi - lo);
  return spec.rise_low + (spec.rise_high - spec.rise_low) * z;
}

double falling_weight(const DriftSpec& spec, std::size_t t) {
  return spec.fall_high * std::pow(spec.fall_low / spec.fall_high, position(spec, t));
}

DriftCorpus generate_drift_corpus(const DriftSpec& spec) {
  spec.validate();
  DriftCorpus out;
  const auto templates = spec.templates.empty() ? default_templates() : spec.templates;
  std::vector<std::vector<std::string>> skeletons;
  std::set<std::string> function_words;
  for (const auto& t : templates) {
    skeletons.push_back(tokenize(t));
    for (const auto& w : skeletons.back()) {
      if (w != "_") function_words.insert(w);
    }
  }
  out.function_words.assign(function_words.begin(), function_words.end());

  const std::size_t n_words = spec.rising + spec.falling + spec.stable;
  const auto names = content_word_names(n_words, out.function_words);
  out.labels.rising.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(spec.rising));
  out.labels.falling.assign(names.begin() + static_cast<std::ptrdiff_t>(spec.rising),
                            names.begin() + static_cast<std::ptrdiff_t>(spec.rising + spec.falling));
  out.labels.stable.assign(names.begin() + static_cast<std::ptrdiff_t>(spec.rising + spec.falling), names.end());

  for (std::size_t t = 0; t < spec.years; ++t) {
    std::vector<double> w;
    w.insert(w.end(), spec.rising, rising_weight(spec, t));
    w.insert(w.end(), spec.falling, falling_weight(spec, t));
    w.insert(w.end(), spec.stable, spec.stable_weight);
    double total = 0.0;
    for (double v : w) total += v;
    if (!(total > 0.0)) throw ConfigError("all content weights are zero in year " + std::to_string(t + 1));
    out.weights.push_back(std::move(w));
  }

  for (std::size_t t = 0; t < spec.years; ++t) {
    const int year = static_cast<int>(t + 1);
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(year)));
    std::vector<double> cumulative(n_words);
    double acc = 0.0;
    for (std::size_t k = 0; k < n_words; ++k) cumulative[k] = acc += out.weights[t][k];
    for (std::size_t d = 0; d < spec.docs_per_year; ++d) {
      const std::size_t target = spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
      std::vector<std::string> tokens;
      while (tokens.size() < target) {
        for (const auto& w : skeletons[rng.below(skeletons.size())]) {
          tokens.push_back(w == "_" ? names[pick(cumulative, rng)] : w);
        }
      }
      if (tokens.size() > spec.max_tokens) tokens.resize(spec.max_tokens);
      out.corpus.add(year, detokenize(tokens));
    }
  }
  return out;
}

void export_frequency_csv(const std::filesystem::path& path, const FrequencyTable& freq, const Vocabulary& vocab,
                          const std::vector<std::string>& words, std::vector<std::string>* warnings,
                          const std::string& comment) {
  std::vector<std::optional<TokenId>> ids;
  for (const auto& w : words) {
    auto id = vocab.find(w);
    if (!id && warnings != nullptr) warnings->push_back("word '" + w + "' is not in the vocabulary");
    ids.push_back(id);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "year,word,count,relative_frequency\n";
  for (int year : freq.years()) {
    const auto total = freq.total(year);
    for (std::size_t i = 0; i < words.size(); ++i) {
      const std::uint64_t c = ids[i] ? freq.count(year, *ids[i]) : 0;
      const double rel = total > 0 ? static_cast<double>(c) / static_cast<double>(total) : 0.0;
      out << year << ',' << csv_field(words[i]) << ',' << c << ',' << rel << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace flm
