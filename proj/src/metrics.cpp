#include "futurelm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "futurelm/errors.hpp"

namespace flm {

namespace {

PerplexityResult ppl_over(const std::vector<ScoredDocument>& scored, const StopwordList* stopwords) {
  double log2_sum = 0.0;
  std::size_t m = 0;
  for (const auto& doc : scored) {
    for (std::size_t i = 0; i < doc.targets.size(); ++i) {
      if (stopwords != nullptr && stopwords->contains(doc.targets[i])) continue;
      log2_sum += doc.log_probs[i] / std::log(2.0);
      ++m;
    }
  }
  if (m == 0) {
    throw ContractError(stopwords != nullptr ? "content perplexity undefined: every target is a stopword"
                                             : "perplexity of an empty corpus slice");
  }
  return {std::exp2(-log2_sum / static_cast<double>(m)), m};
}

}  // namespace

PerplexityResult perplexity(const std::vector<ScoredDocument>& scored) { return ppl_over(scored, nullptr); }

PerplexityResult content_perplexity(const std::vector<ScoredDocument>& scored, const StopwordList& stopwords) {
  return ppl_over(scored, &stopwords);
}

PerplexityResult perplexity(const DecoderLM& model, const BiasProvider& provider, const TemporalCorpus& corpus) {
  return perplexity(score_corpus(model, provider, corpus));
}

PerplexityResult content_perplexity(const DecoderLM& model, const BiasProvider& provider,
                                    const TemporalCorpus& corpus, const StopwordList& stopwords) {
  return content_perplexity(score_corpus(model, provider, corpus), stopwords);
}

void MeteorParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0) || !(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("Meteor alpha and gamma must lie in [0,1]");
  }
  if (!(beta >= 1.0)) throw ConfigError("Meteor penalty exponent must be >= 1");
}

namespace {

// Branch and bound over which candidate positions match which reference
// positions. Every word type contributes exactly min(count in candidate,
// count in reference) matches; the search maximizes the number of adjacent
// match pairs (i -> j, i+1 -> j+1), which minimizes chunks = matches - pairs.
class ChunkSearch {
 public:
  ChunkSearch(std::span<const TokenId> cand, std::span<const TokenId> ref, std::size_t node_limit)
      : cand_(cand), ref_(ref), used_(ref.size(), false), node_limit_(node_limit) {
    std::map<TokenId, std::size_t> cc, rc;
    for (TokenId t : cand) ++cc[t];
    for (TokenId t : ref) ++rc[t];
    for (const auto& [t, n] : cc) {
      auto it = rc.find(t);
      const std::size_t k = it == rc.end() ? 0 : std::min(n, it->second);
      if (k > 0) need_[t] = k;
      matches_ += k;
    }
    for (std::size_t j = 0; j < ref.size(); ++j) positions_[ref[j]].push_back(j);
    // remaining_[i][t]: occurrences of t in cand[i..]
    left_.assign(cand.size() + 1, {});
    for (std::size_t i = cand.size(); i-- > 0;) {
      left_[i] = left_[i + 1];
      if (need_.count(cand[i])) ++left_[i][cand[i]];
    }
  }

  MeteorAlignment run() {
    if (matches_ == 0) return {0, 0, true};
    search(0, kNone, 0, 0);
    return {matches_, matches_ - best_pairs_, nodes_ <= node_limit_};
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  void search(std::size_t i, std::size_t prev, std::size_t made, std::size_t pairs) {
    if (++nodes_ > node_limit_ && found_) return;
    if (made == matches_) {
      if (!found_ || pairs > best_pairs_) {
        best_pairs_ = pairs;
        found_ = true;
      }
      return;
    }
    if (i == cand_.size()) return;
    // Each further match adds at most one pair.
    if (found_ && pairs + (matches_ - made) <= best_pairs_) return;
    const TokenId t = cand_[i];
    auto need = need_.find(t);
    if (need != need_.end() && need->second > 0) {
      auto& pos = positions_[t];
      // Try the position that continues the current chunk first.
      std::vector<std::size_t> order;
      if (prev != kNone && prev + 1 < ref_.size() && ref_[prev + 1] == t && !used_[prev + 1]) {
        order.push_back(prev + 1);
      }
      for (std::size_t j : pos) {
        if (!used_[j] && (order.empty() || j != order.front())) order.push_back(j);
      }
      for (std::size_t j : order) {
        used_[j] = true;
        --need->second;
        search(i + 1, j, made + 1, pairs + (prev != kNone && j == prev + 1 ? 1 : 0));
        ++need->second;
        used_[j] = false;
      }
      // Leaving this occurrence unmatched is only possible if enough later
      // occurrences remain.
      if (left_[i + 1].count(t) ? left_[i + 1].at(t) >= need->second : need->second == 0) {
        search(i + 1, kNone, made, pairs);
      }
    } else {
      search(i + 1, kNone, made, pairs);
    }
  }

  std::span<const TokenId> cand_;
  std::span<const TokenId> ref_;
  std::vector<bool> used_;
  std::map<TokenId, std::size_t> need_;
  std::map<TokenId, std::vector<std::size_t>> positions_;
  std::vector<std::map<TokenId, std::size_t>> left_;
  std::size_t matches_ = 0;
  std::size_t best_pairs_ = 0;
  bool found_ = false;
  std::size_t nodes_ = 0;
  std::size_t node_limit_;
};

}  // namespace

MeteorAlignment meteor_align(std::span<const TokenId> candidate, std::span<const TokenId> reference,
                             std::size_t node_limit) {
  return ChunkSearch(candidate, reference, node_limit).run();
}

double meteor(std::span<const TokenId> candidate, std::span<const TokenId> reference, const MeteorParams& params) {
  params.validate();
  if (candidate.empty() || reference.empty()) throw ContractError("meteor of an empty sequence");
  const auto a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double f = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double penalty = params.gamma * std::pow(static_cast<double>(a.chunks) / m, params.beta);
  return f * (1.0 - penalty);
}

std::vector<TokenId> strip_stopwords(std::span<const TokenId> tokens, const StopwordList& stopwords) {
  std::vector<TokenId> out;
  for (TokenId t : tokens) {
    if (!stopwords.contains(t)) out.push_back(t);
  }
  return out;
}

ContentMeteorResult content_meteor_score(const std::vector<std::vector<TokenId>>& generations,
                                         const std::vector<std::vector<TokenId>>& references,
                                         const StopwordList& stopwords, const MeteorParams& params) {
  if (generations.empty()) throw ContractError("content meteor needs at least one generation");
  std::vector<std::vector<TokenId>> refs;
  for (const auto& r : references) {
    auto s = strip_stopwords(r, stopwords);
    if (!s.empty()) refs.push_back(std::move(s));
  }
  if (refs.empty()) throw ContractError("content meteor needs a reference with content words");
  ContentMeteorResult out;
  out.references = refs.size();
  double total = 0.0;
  for (std::size_t g = 0; g < generations.size(); ++g) {
    auto cand = strip_stopwords(generations[g], stopwords);
    double best = 0.0;
    if (cand.empty()) {
      ++out.empty_generations;
      out.warnings.push_back("generation " + std::to_string(g) + " has no content words; scored 0");
    } else {
      for (const auto& r : refs) best = std::max(best, meteor(cand, r, params));
    }
    out.per_generation.push_back(best);
    total += best;
  }
  out.cm = 100.0 * total / static_cast<double>(generations.size());
  return out;
}

std::vector<GeneratedText> generate_many(const DecoderLM& model, const BiasProvider& provider, int year,
                                         std::size_t n_generations, std::uint64_t seed,
                                         const DecodingConfig& decoding) {
  if (n_generations == 0) throw ConfigError("number of generations must be >= 1");
  std::vector<GeneratedText> out;
  for (std::size_t i = 0; i < n_generations; ++i) {
    DecodingConfig c = decoding;
    c.seed = seed + i;
    out.push_back({c.seed, generate(model, provider, year, c).tokens});
  }
  return out;
}

SignTestResult sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("sign test over sequences of different lengths");
  SignTestResult r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++r.wins;
    } else if (a[i] < b[i]) {
      ++r.losses;
    } else {
      ++r.ties;
    }
  }
  const std::size_t n = r.wins + r.losses;
  if (n == 0) return r;
  const std::size_t k = std::min(r.wins, r.losses);
  // P(X <= k), X ~ Binomial(n, 1/2)
  double tail = 0.0;
  const double ln_half_n = static_cast<double>(n) * std::log(0.5);
  for (std::size_t i = 0; i <= k; ++i) {
    const double ln_choose = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                             std::lgamma(static_cast<double>(n - i) + 1);
    tail += std::exp(ln_choose + ln_half_n);
  }
  r.p_value = std::min(1.0, 2.0 * tail);
  return r;
}

std::vector<double> document_log_probs(const std::vector<ScoredDocument>& scored) {
  std::vector<double> out;
  for (const auto& d : scored) {
    double s = 0.0;
    for (double lp : d.log_probs) s += lp;
    out.push_back(s);
  }
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"ppl", ppl},
                   {"cpl", cpl},
                   {"cm", cm ? nlohmann::json(*cm) : nlohmann::json(nullptr)},
                   {"tokens", tokens},
                   {"content_tokens", content_tokens},
                   {"generations", generations},
                   {"references", references},
                   {"checkpoint_id", checkpoint_id},
                   {"head", head},
                   {"years", years},
                   {"seed", seed}};
  if (sign_test) {
    j["sign_test"] = {{"wins", sign_test->wins},
                      {"losses", sign_test->losses},
                      {"ties", sign_test->ties},
                      {"p_value", sign_test->p_value}};
  }
  return j;
}

std::string EvalReport::table() const {
  char buf[256];
  std::ostringstream out;
  out << "model        PPL        CM         CPL\n";
  const std::string cm_text = cm ? (std::snprintf(buf, sizeof(buf), "%.2f", *cm), std::string(buf)) : "-";
  std::snprintf(buf, sizeof(buf), "%-12s %-10.2f %-10s %-10.2f\n", head.c_str(), ppl, cm_text.c_str(), cpl);
  out << buf;
  return out.str();
}

}  // namespace flm
