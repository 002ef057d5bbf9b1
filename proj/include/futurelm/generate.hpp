#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/lm.hpp"
#include "futurelm/rng.hpp"

namespace flm {

enum class DecodeMode { kGreedy, kSample, kBeamSample };

std::string to_string(DecodeMode mode);
DecodeMode decode_mode_from_string(std::string_view name);

struct DecodingConfig {
  DecodeMode mode = DecodeMode::kBeamSample;
  std::size_t beam = 5;
  std::size_t top_k = 50;
  double top_p = 0.92;
  std::size_t max_tokens = 64;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DecodingConfig from_json(const nlohmann::json& j);
};

// Next-token distribution given a prefix that starts with the end token.
using NextTokenFn = std::function<std::vector<double>(std::span<const TokenId> prefix)>;

struct Generation {
  std::vector<TokenId> tokens;  // without the leading and trailing end tokens
  double log_prob = 0.0;        // model log-probability of the emitted tokens
  bool finished = false;        // the end token was emitted
};

// Probabilities restricted to the k most likely tokens (ties by lower id), then
// to the shortest head of that list holding at least `top_p` of its mass,
// renormalized. Other entries are 0.
std::vector<double> filter_top_k_top_p(std::span<const double> probs, std::size_t top_k, double top_p);

// Decoding starts from the end token and stops when it is emitted again or
// after max_tokens tokens. Beam-sample draws up to `beam` distinct candidates
// per beam from the filtered distribution, keeps the `beam` continuations with
// the highest cumulative log-probability, and returns the finished beam with
// the best per-token log-probability.
Generation generate(const NextTokenFn& next, const DecodingConfig& config);

Generation generate(const DecoderLM& model, const BiasProvider& provider, int year,
                    const DecodingConfig& config);

}  // namespace flm
