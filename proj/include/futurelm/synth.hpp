#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/corpus.hpp"

namespace flm {

// Programmed word-frequency drift. Content words are split into rising
// (rescaled logistic from rise_low to rise_high), falling (exponential decay
// from fall_high to fall_low) and stable (constant) trajectories; each year's
// slot distribution is the normalized weight vector.
struct DriftSpec {
  std::size_t rising = 40;
  std::size_t falling = 40;
  std::size_t stable = 120;
  std::size_t years = 8;
  std::size_t docs_per_year = 500;
  std::size_t min_tokens = 12;
  std::size_t max_tokens = 20;
  double rise_low = 0.01;
  double rise_high = 0.5;
  double rise_steepness = 6.0;
  double fall_high = 0.5;
  double fall_low = 0.01;
  double stable_weight = 0.1;
  std::size_t window = 3;  // the bias window the corpus is meant for
  // Sentence skeletons; each "_" is a content-word slot. Empty means the
  // built-in set.
  std::vector<std::string> templates;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DriftSpec from_json(const nlohmann::json& j);
};

struct TrendLabels {
  std::vector<std::string> rising;
  std::vector<std::string> falling;
  std::vector<std::string> stable;

  nlohmann::json to_json() const;
  static TrendLabels from_json(const nlohmann::json& j);
};

struct DriftCorpus {
  TemporalCorpus corpus;  // untokenized, years 1..years
  TrendLabels labels;
  std::vector<std::string> function_words;  // every non-slot template token
  // weights[y][k]: programmed weight of content word k (rising, falling,
  // stable order) in year y+1, before normalization.
  std::vector<std::vector<double>> weights;
};

std::vector<std::string> default_templates();
// Deterministic pronounceable names, distinct from each other and from the
// template words.
std::vector<std::string> content_word_names(std::size_t count, const std::vector<std::string>& reserved);
// Programmed weight of each class at year index t in [0, years).
double rising_weight(const DriftSpec& spec, std::size_t t);
double falling_weight(const DriftSpec& spec, std::size_t t);

DriftCorpus generate_drift_corpus(const DriftSpec& spec);

// Rows `year,word,count,relative_frequency` in year order, then in the order
// of `words`. Unknown words get zero counts and a warning. A non-empty
// `comment` is written first as a `# ` line.
void export_frequency_csv(const std::filesystem::path& path, const FrequencyTable& freq, const Vocabulary& vocab,
                          const std::vector<std::string>& words, std::vector<std::string>* warnings = nullptr,
                          const std::string& comment = {});

}  // namespace flm
