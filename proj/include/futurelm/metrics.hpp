#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/corpus.hpp"
#include "futurelm/generate.hpp"
#include "futurelm/lm.hpp"

namespace flm {

struct PerplexityResult {
  double value = 0.0;
  std::size_t tokens = 0;  // M, or M_s for content perplexity
};

// 2^(-(1/M) sum log2 p) over every target. Log-probabilities are natural logs.
PerplexityResult perplexity(const std::vector<ScoredDocument>& scored);
// Same over targets that are not stopwords; stopword targets still served as
// context when the log-probabilities were computed.
PerplexityResult content_perplexity(const std::vector<ScoredDocument>& scored, const StopwordList& stopwords);

PerplexityResult perplexity(const DecoderLM& model, const BiasProvider& provider, const TemporalCorpus& corpus);
PerplexityResult content_perplexity(const DecoderLM& model, const BiasProvider& provider,
                                    const TemporalCorpus& corpus, const StopwordList& stopwords);

struct MeteorParams {
  double alpha = 0.9;  // F = PR / (alpha P + (1 - alpha) R) = 10PR / (R + 9P)
  double gamma = 0.5;  // penalty coefficient
  double beta = 3.0;   // penalty exponent

  void validate() const;
};

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  bool exact = true;  // false if the chunk search hit its node limit
};

// Exact unigram alignment with the most matches and, among those, the fewest
// chunks (runs contiguous in both sequences).
MeteorAlignment meteor_align(std::span<const TokenId> candidate, std::span<const TokenId> reference,
                             std::size_t node_limit = 2'000'000);

double meteor(std::span<const TokenId> candidate, std::span<const TokenId> reference,
              const MeteorParams& params = {});

std::vector<TokenId> strip_stopwords(std::span<const TokenId> tokens, const StopwordList& stopwords);

struct ContentMeteorResult {
  double cm = 0.0;  // 100 * mean over generations of the best reference score
  std::vector<double> per_generation;
  std::size_t empty_generations = 0;
  std::size_t references = 0;  // non-empty references after stripping
  std::vector<std::string> warnings;
};

// Scores already generated token sequences. Stopwords are removed from both
// sides first; references that become empty are ignored.
ContentMeteorResult content_meteor_score(const std::vector<std::vector<TokenId>>& generations,
                                         const std::vector<std::vector<TokenId>>& references,
                                         const StopwordList& stopwords, const MeteorParams& params = {});

struct GeneratedText {
  std::uint64_t seed = 0;
  std::vector<TokenId> tokens;
};

// Generates n_generations documents for `year` with seeds seed, seed+1, ...
std::vector<GeneratedText> generate_many(const DecoderLM& model, const BiasProvider& provider, int year,
                                         std::size_t n_generations, std::uint64_t seed,
                                         const DecodingConfig& decoding);

struct SignTestResult {
  std::size_t wins = 0;    // a > b
  std::size_t losses = 0;  // a < b
  std::size_t ties = 0;
  double p_value = 1.0;    // two-sided exact binomial, ties dropped
};

SignTestResult sign_test(std::span<const double> a, std::span<const double> b);

// Per-document summed log-probabilities.
std::vector<double> document_log_probs(const std::vector<ScoredDocument>& scored);

struct EvalReport {
  double ppl = 0.0;
  double cpl = 0.0;
  std::optional<double> cm;
  std::size_t tokens = 0;          // M
  std::size_t content_tokens = 0;  // M_s
  std::size_t generations = 0;     // N_g
  std::size_t references = 0;      // N_h
  std::string checkpoint_id;
  std::string head;
  std::vector<int> years;
  std::uint64_t seed = 0;
  std::optional<SignTestResult> sign_test;

  nlohmann::json to_json() const;
  // Fixed-order table: PPL, CM, CPL.
  std::string table() const;
};

}  // namespace flm
