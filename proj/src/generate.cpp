#include "futurelm/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "futurelm/errors.hpp"

namespace flm {

std::string to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kGreedy:
      return "greedy";
    case DecodeMode::kSample:
      return "sample";
    case DecodeMode::kBeamSample:
      return "beam-sample";
  }
  return "?";
}

DecodeMode decode_mode_from_string(std::string_view name) {
  if (name == "greedy") return DecodeMode::kGreedy;
  if (name == "sample") return DecodeMode::kSample;
  if (name == "beam-sample") return DecodeMode::kBeamSample;
  throw ConfigError("unknown decoding mode '" + std::string(name) + "'");
}

void DecodingConfig::validate() const {
  if (beam < 1) throw ConfigError("beam must be >= 1");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0,1]");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

nlohmann::json DecodingConfig::to_json() const {
  return {{"mode", to_string(mode)}, {"beam", beam},       {"top_k", top_k},
          {"top_p", top_p},          {"max_tokens", max_tokens}, {"temperature", temperature},
          {"seed", seed}};
}

DecodingConfig DecodingConfig::from_json(const nlohmann::json& j) {
  DecodingConfig c;
  if (j.contains("mode")) c.mode = decode_mode_from_string(j.at("mode").get<std::string>());
  c.beam = j.value("beam", c.beam);
  c.top_k = j.value("top_k", c.top_k);
  c.top_p = j.value("top_p", c.top_p);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.temperature = j.value("temperature", c.temperature);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::vector<double> filter_top_k_top_p(std::span<const double> probs, std::size_t top_k, double top_p) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  const std::size_t k = std::min(top_k, order.size());
  double head = 0.0;
  for (std::size_t i = 0; i < k; ++i) head += probs[order[i]];
  std::vector<double> out(probs.size(), 0.0);
  double kept = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out[order[i]] = probs[order[i]];
    kept += probs[order[i]];
    if (kept >= top_p * head) break;
  }
  for (auto& v : out) v /= kept;
  return out;
}

namespace {

std::vector<double> checked_dist(const NextTokenFn& next, std::span<const TokenId> prefix) {
  auto p = next(prefix);
  if (p.empty()) throw ContractError("next-token function returned an empty distribution");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("next-token distribution has an invalid entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ContractError("next-token distribution sums to " + std::to_string(total));
  }
  return p;
}

std::vector<double> tempered(std::vector<double> p, double temperature) {
  if (temperature == 1.0) return p;
  double total = 0.0;
  for (auto& v : p) {
    v = v > 0.0 ? std::pow(v, 1.0 / temperature) : 0.0;
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

TokenId draw(std::span<const double> q, Rng& rng) {
  double u = rng.uniform();
  TokenId last = -1;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    last = static_cast<TokenId>(i);
    if (u < q[i]) return last;
    u -= q[i];
  }
  return last;  // round-off at the top end
}

// Up to n distinct tokens, each drawn from q with earlier draws removed.
std::vector<TokenId> draw_distinct(std::vector<double> q, std::size_t n, Rng& rng) {
  std::vector<TokenId> out;
  double mass = 1.0;
  while (out.size() < n && mass > 1e-12) {
    for (auto& v : q) v /= mass;
    TokenId t = draw(q, rng);
    if (t < 0) break;
    out.push_back(t);
    mass = 1.0 - q[t];
    q[t] = 0.0;
  }
  return out;
}

struct Beam {
  std::vector<TokenId> seq;  // starts with the end token
  double log_prob = 0.0;
  bool finished = false;
};

Generation to_generation(const Beam& b) {
  Generation g;
  g.tokens.assign(b.seq.begin() + 1, b.seq.end());
  if (b.finished) g.tokens.pop_back();
  g.log_prob = b.log_prob;
  g.finished = b.finished;
  return g;
}

Generation decode_single(const NextTokenFn& next, const DecodingConfig& config, Rng& rng) {
  Beam b{{kEosId}, 0.0, false};
  while (!b.finished && b.seq.size() - 1 < config.max_tokens) {
    auto p = checked_dist(next, b.seq);
    TokenId t;
    if (config.mode == DecodeMode::kGreedy) {
      t = static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
    } else {
      t = draw(filter_top_k_top_p(tempered(p, config.temperature), config.top_k, config.top_p), rng);
    }
    b.log_prob += std::log(p[t]);
    b.seq.push_back(t);
    b.finished = t == kEosId;
  }
  return to_generation(b);
}

Generation decode_beam_sample(const NextTokenFn& next, const DecodingConfig& config, Rng& rng) {
  std::vector<Beam> beams{{{kEosId}, 0.0, false}};
  for (std::size_t step = 0; step < config.max_tokens; ++step) {
    if (std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; })) break;
    std::vector<Beam> candidates;
    for (const auto& b : beams) {
      if (b.finished) {
        candidates.push_back(b);
        continue;
      }
      auto p = checked_dist(next, b.seq);
      auto q = filter_top_k_top_p(tempered(p, config.temperature), config.top_k, config.top_p);
      for (TokenId t : draw_distinct(std::move(q), config.beam, rng)) {
        Beam c = b;
        c.seq.push_back(t);
        c.log_prob += std::log(p[t]);
        c.finished = t == kEosId;
        candidates.push_back(std::move(c));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Beam& a, const Beam& b) { return a.log_prob > b.log_prob; });
    if (candidates.size() > config.beam) candidates.resize(config.beam);
    beams = std::move(candidates);
  }
  const bool any_finished = std::any_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; });
  const Beam* best = nullptr;
  double best_score = 0.0;
  for (const auto& b : beams) {
    if (any_finished && !b.finished) continue;
    const double score = b.log_prob / static_cast<double>(b.seq.size() - 1);
    if (best == nullptr || score > best_score) {
      best = &b;
      best_score = score;
    }
  }
  return to_generation(*best);
}

}  // namespace

Generation generate(const NextTokenFn& next, const DecodingConfig& config) {
  config.validate();
  Rng rng(config.seed);
  if (config.mode == DecodeMode::kBeamSample) return decode_beam_sample(next, config, rng);
  return decode_single(next, config, rng);
}

Generation generate(const DecoderLM& model, const BiasProvider& provider, int year,
                    const DecodingConfig& config) {
  DecodingConfig c = config;
  c.max_tokens = std::min(c.max_tokens, model.config().max_len - 1);
  return generate(
      [&](std::span<const TokenId> prefix) { return next_token_dist(model, prefix, provider, year); }, c);
}

}  // namespace flm
