#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/corpus.hpp"
#include "futurelm/ops.hpp"
#include "futurelm/rng.hpp"
#include "futurelm/tape.hpp"

namespace flm {

struct DecoderConfig {
  std::size_t vocab_size = 0;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t max_len = 128;
  double dropout = 0.1;
  double init_std = 0.02;

  void validate() const;
  nlohmann::json to_json() const;
  static DecoderConfig from_json(const nlohmann::json& j);
};

// Pre-norm decoder-only transformer. The token embedding matrix doubles as
// the output projection, so logits_k = E H_k.
class DecoderLM {
 public:
  DecoderLM(DecoderConfig config, std::uint64_t seed);

  const DecoderConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Parameter& embedding() const { return params_[embedding_]; }

  struct Output {
    Var embedding;  // E on this tape, [vocab, d]
    Var hidden;     // last-layer states H_1..H_n, [n, d]
    Var logits;     // H E^T, [n, vocab]
  };

  // A non-null rng enables dropout (training mode).
  Output forward(Tape& tape, std::span<const TokenId> tokens, Rng* dropout_rng = nullptr) const;

 private:
  struct Layer {
    std::size_t ln1_gain, ln1_shift, qkv_w, qv_b, proj_w, proj_b;
    std::size_t ln2_gain, ln2_shift, ff1_w, ff1_b, ff2_w, ff2_b;
  };

  Var p(Tape& tape, std::size_t idx) const { return tape.param(params_[idx]); }

  DecoderConfig config_;
  ParameterSet params_;
  std::size_t embedding_ = 0;
  std::size_t positions_ = 0;
  std::size_t lnf_gain_ = 0;
  std::size_t lnf_shift_ = 0;
  std::vector<Layer> layers_;
};

// Bias for one year recorded on one tape: nothing (zero bias), one static row
// B_i [1, vocab], or a function of the decoder states giving B_ik [n, vocab].
struct YearBias {
  std::optional<Var> row;
  std::function<Var(Var hidden)> per_position;

  bool is_zero() const { return !row && !per_position; }
  // Adds the bias to `logits` [n, vocab]; checks the vocabulary length.
  Var apply(Var logits, Var hidden) const;
};

// Supplies temporal softmax biases. Implementations must be pure functions of
// their parameters and of data from years strictly before the queried year.
class BiasProvider {
 public:
  virtual ~BiasProvider() = default;

  // `embedding` is the model's E on the same tape (needed by heads that tie
  // to the word embeddings).
  virtual YearBias prepare(Tape& tape, Var embedding, int year) const = 0;
  // Parameter sets trained jointly with the language model.
  virtual std::vector<ParameterSet*> trainable() { return {}; }
  // Called after parameters change; drops any cached per-year values.
  virtual void invalidate() const {}
  virtual std::string kind() const = 0;
};

class NoBias final : public BiasProvider {
 public:
  YearBias prepare(Tape&, Var, int) const override { return {}; }
  std::string kind() const override { return "none"; }
};

// Fixed per-year bias vectors; years without a vector get zero bias.
class StaticBiasProvider final : public BiasProvider {
 public:
  explicit StaticBiasProvider(std::map<int, std::vector<double>> by_year)
      : by_year_(std::move(by_year)) {}
  YearBias prepare(Tape& tape, Var embedding, int year) const override;
  std::string kind() const override { return "static"; }

 private:
  std::map<int, std::vector<double>> by_year_;
};

// Sums the biases of two providers (additive combination of heads).
class SumBiasProvider final : public BiasProvider {
 public:
  SumBiasProvider(BiasProvider& a, BiasProvider& b) : a_(a), b_(b) {}
  YearBias prepare(Tape& tape, Var embedding, int year) const override;
  std::vector<ParameterSet*> trainable() override;
  void invalidate() const override {
    a_.invalidate();
    b_.invalidate();
  }
  std::string kind() const override { return a_.kind() + "+" + b_.kind(); }

 private:
  BiasProvider& a_;
  BiasProvider& b_;
};

// Inputs [<eos>, x_1..x_L] and targets [x_1..x_L, <eos>] for one document,
// truncated so that the input fits `max_len` (a truncated document loses its
// final end target).
struct Sequence {
  std::vector<TokenId> inputs;
  std::vector<TokenId> targets;
};
Sequence make_sequence(std::span<const TokenId> doc, std::size_t max_len);

// Logits with the year's bias added, [n, vocab].
Var biased_logits(Tape& tape, const DecoderLM& model, const BiasProvider& provider, int year,
                  std::span<const TokenId> inputs, Rng* dropout_rng = nullptr);

// p(w | prefix) = softmax(E H_k + B)_w at the last prefix position.
std::vector<double> next_token_dist(const DecoderLM& model, std::span<const TokenId> prefix,
                                    const BiasProvider& provider, int year);

// Natural-log probability of each target of the document's sequence.
std::vector<double> target_log_probs(const DecoderLM& model, const BiasProvider& provider, int year,
                                     const Sequence& seq);

// Per-document target log-probabilities (natural log) and target ids for
// every document of a tokenized corpus, in year then document order.
struct ScoredDocument {
  int year = 0;
  std::vector<TokenId> targets;
  std::vector<double> log_probs;
};
std::vector<ScoredDocument> score_corpus(const DecoderLM& model, const BiasProvider& provider,
                                         const TemporalCorpus& corpus);

}  // namespace flm
