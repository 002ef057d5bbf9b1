#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/corpus.hpp"
#include "futurelm/lm.hpp"
#include "futurelm/train.hpp"

namespace flm {

// Single-layer LSTM applied to a batch of independent rows. Gates are laid
// out as [input, forget, cell, output] in the 4h columns of the weights.
class Lstm {
 public:
  Lstm() = default;
  // Adds `<prefix>.wx` [in,4h], `<prefix>.wh` [h,4h] and `<prefix>.b` [1,4h].
  Lstm(ParameterSet& params, const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng);

  std::size_t input_size() const { return input_; }
  std::size_t hidden_size() const { return hidden_; }

  // Final hidden state [batch, h] after feeding `steps` in order, each
  // [batch, in], from zero initial state.
  Var run(Tape& tape, const ParameterSet& params, const std::vector<Var>& steps) const;

 private:
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  std::size_t wx_ = 0;
  std::size_t wh_ = 0;
  std::size_t b_ = 0;
};

enum class HeadKind { kNone, kFrequency, kContextual, kGated };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(std::string_view name);

struct HeadConfig {
  HeadKind kind = HeadKind::kNone;
  std::size_t window = 3;            // m, number of preceding years
  std::size_t frequency_hidden = 64;  // contextual heads use the model dimension
  double alpha = 1.0;                // gate scale of the gated head
  bool learn_alpha = false;
  // Zero bias for years without a full window of history; otherwise such
  // years raise HistoryError.
  bool zero_fallback = true;
  // With a contextual head, also add a frequency head's bias.
  bool combine_frequency = false;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static HeadConfig from_json(const nlohmann::json& j);
};

// Years i-m..i-1.
std::vector<int> history_years(int year, std::size_t window);

// B_iw = A . LSTM(log(1+f_{i-m,w}), ..., log(1+f_{i-1,w})), one cell shared by
// every word.
class FrequencyHead {
 public:
  FrequencyHead(std::size_t window, std::size_t hidden, std::uint64_t seed, bool zero_fallback = true);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Lstm& lstm() const { return lstm_; }
  std::size_t window() const { return window_; }

  bool has_history(const FrequencyTable& freq, int year) const;
  // [1, vocab] bias, or nothing when the history is short and the fallback is on.
  std::optional<Var> bias(Tape& tape, const FrequencyTable& freq, int year) const;
  // Bias values; all zero under the fallback.
  std::vector<double> bias_values(const FrequencyTable& freq, int year) const;

 private:
  std::size_t window_;
  bool zero_fallback_;
  ParameterSet params_;
  Lstm lstm_;
  std::size_t a_ = 0;
};

// Per-year means of contextual vectors: V_iw is the average of the encoder's
// last-layer states at every occurrence of word w in year i.
class YearWordEmbeddings {
 public:
  YearWordEmbeddings() = default;
  YearWordEmbeddings(std::size_t vocab_size, std::size_t dim);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t dim() const { return dim_; }
  std::vector<int> years() const;
  bool has_year(int year) const { return years_.count(year) != 0; }

  // `vectors` is [vocab, dim]; rows of words with count 0 must be zero.
  void set_year(int year, Tensor vectors, std::vector<std::uint64_t> counts);
  // [vocab, dim]; absent words are zero rows.
  const Tensor& vectors(int year) const;
  std::uint64_t count(int year, TokenId w) const;
  // Nothing when the word does not occur in that year.
  std::optional<std::span<const double>> vector(int year, TokenId w) const;

  nlohmann::json metadata = nlohmann::json::object();

  friend bool operator==(const YearWordEmbeddings& a, const YearWordEmbeddings& b) {
    return a.vocab_size_ == b.vocab_size_ && a.dim_ == b.dim_ && a.years_ == b.years_;
  }

 private:
  struct Year {
    Tensor vectors;
    std::vector<std::uint64_t> counts;
    friend bool operator==(const Year& a, const Year& b) {
      return a.vectors == b.vectors && a.counts == b.counts;
    }
  };
  const Year& year_data(int year) const;

  std::size_t vocab_size_ = 0;
  std::size_t dim_ = 0;
  std::map<int, Year> years_;
};

// Layout (little-endian): magic "FLMYEMB\0", u32 version, u64 metadata length,
// metadata JSON, u64 vocab, u64 dim, u64 year count, then per year: i32 year,
// u64 counts[vocab], f64 vectors[vocab * dim].
inline constexpr std::uint32_t kYearEmbeddingsVersion = 1;
void write_year_embeddings(const std::filesystem::path& path, const YearWordEmbeddings& emb);
YearWordEmbeddings read_year_embeddings(const std::filesystem::path& path);

// Supplies the encoder whose hidden states represent one year.
class EncoderSource {
 public:
  virtual ~EncoderSource() = default;
  // `year_slice` holds only that year's documents.
  virtual const DecoderLM& encoder(int year, const TemporalCorpus& year_slice) = 0;
};

// Pre-built encoders per year, or one encoder for every year.
class SnapshotEncoders final : public EncoderSource {
 public:
  explicit SnapshotEncoders(std::map<int, const DecoderLM*> by_year) : by_year_(std::move(by_year)) {}
  explicit SnapshotEncoders(const DecoderLM& every_year) : every_year_(&every_year) {}
  const DecoderLM& encoder(int year, const TemporalCorpus& year_slice) override;

 private:
  std::map<int, const DecoderLM*> by_year_;
  const DecoderLM* every_year_ = nullptr;
};

// For each year, a decoder built from one fixed seed and fine-tuned on that
// year's documents only, so that V_i never sees text from other years.
class FineTunedEncoders final : public EncoderSource {
 public:
  FineTunedEncoders(DecoderConfig config, std::uint64_t init_seed, TrainConfig train_config);
  const DecoderLM& encoder(int year, const TemporalCorpus& year_slice) override;

 private:
  DecoderConfig config_;
  std::uint64_t init_seed_;
  TrainConfig train_config_;
  std::map<int, std::unique_ptr<DecoderLM>> built_;
};

// Year i's encoder is year i-1's encoder fine-tuned on year i's documents
// (the first year starts from a fixed seed). V_i then depends on years <= i
// only, and consecutive years share one representation space.
class ChainedEncoders final : public EncoderSource {
 public:
  // `corpus` supplies the earlier years and must outlive the source.
  ChainedEncoders(DecoderConfig config, std::uint64_t init_seed, TrainConfig train_config,
                  const TemporalCorpus& corpus);
  const DecoderLM& encoder(int year, const TemporalCorpus& year_slice) override;

 private:
  DecoderConfig config_;
  std::uint64_t init_seed_;
  TrainConfig train_config_;
  const TemporalCorpus& corpus_;
  std::map<int, std::unique_ptr<DecoderLM>> built_;
};

// Builds V_i for every listed year of a tokenized corpus.
YearWordEmbeddings build_year_embeddings(const TemporalCorpus& corpus, EncoderSource& source,
                                         const std::vector<int>& years);

// B_iw = A . LSTM(V_{i-m,w}, ..., V_{i-1,w}); absent words feed zero vectors.
class ContextualHead {
 public:
  // Without `projection` the head only exposes final_hidden() (the gated
  // head uses it that way).
  ContextualHead(std::size_t dim, std::size_t window, std::uint64_t seed, bool zero_fallback = true,
                 const std::string& prefix = "ctx", bool projection = true);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  std::size_t dim() const { return lstm_.input_size(); }
  std::size_t window() const { return window_; }

  bool has_history(const YearWordEmbeddings& emb, int year) const;
  // Final hidden state h_iw for every word, [vocab, dim].
  std::optional<Var> final_hidden(Tape& tape, const YearWordEmbeddings& emb, int year) const;
  std::optional<Var> bias(Tape& tape, const YearWordEmbeddings& emb, int year) const;
  std::vector<double> bias_values(const YearWordEmbeddings& emb, int year) const;

 private:
  std::size_t window_;
  bool zero_fallback_;
  ParameterSet params_;
  Lstm lstm_;
  std::optional<std::size_t> a_;
};

// B_ikw = alpha * sigmoid(H_k C A~_iw) * (E_w D A~_iw) with A~_iw = (E_w . h_iw) A.
// Since A~_iw is a scalar multiple of A, with s_w = E_w . h_iw this is
// alpha * sigmoid(s_w * (H_k C A)) * s_w * (E_w D A).
// E [vocab,d], h [vocab,d], H [n,d], A [d,1], C and D [d,d], alpha [1,1].
Var gated_bias(Var E, Var h, Var H, Var A, Var C, Var D, Var alpha);

class GatedHead {
 public:
  GatedHead(std::size_t dim, std::size_t window, double alpha, bool learn_alpha, std::uint64_t seed,
            bool zero_fallback = true);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const ContextualHead& trajectory() const { return trajectory_; }
  ContextualHead& trajectory() { return trajectory_; }
  std::size_t dim() const { return trajectory_.dim(); }
  double alpha() const;
  bool learn_alpha() const { return learn_alpha_; }
  void set_alpha(double alpha);

  Var A(Tape& tape) const { return tape.param(params_[a_]); }
  Var C(Tape& tape) const { return tape.param(params_[c_]); }
  Var D(Tape& tape) const { return tape.param(params_[d_]); }
  Var alpha_var(Tape& tape) const;

 private:
  ContextualHead trajectory_;
  ParameterSet params_;
  std::size_t a_ = 0;
  std::size_t c_ = 0;
  std::size_t d_ = 0;
  std::size_t alpha_ = 0;
  bool learn_alpha_;
  double fixed_alpha_;
};

// Providers hold references; the head and its inputs must outlive them.
// Values computed on gradient-free tapes are cached per year until
// invalidate() is called.
class FrequencyBiasProvider final : public BiasProvider {
 public:
  FrequencyBiasProvider(FrequencyHead& head, const FrequencyTable& freq) : head_(head), freq_(freq) {}
  YearBias prepare(Tape& tape, Var embedding, int year) const override;
  std::vector<ParameterSet*> trainable() override { return {&head_.params()}; }
  void invalidate() const override;
  std::string kind() const override { return "frequency"; }

 private:
  FrequencyHead& head_;
  const FrequencyTable& freq_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::optional<Tensor>> cache_;
};

class ContextualBiasProvider final : public BiasProvider {
 public:
  ContextualBiasProvider(ContextualHead& head, const YearWordEmbeddings& emb) : head_(head), emb_(emb) {}
  YearBias prepare(Tape& tape, Var embedding, int year) const override;
  std::vector<ParameterSet*> trainable() override { return {&head_.params()}; }
  void invalidate() const override;
  std::string kind() const override { return "contextual"; }

 private:
  ContextualHead& head_;
  const YearWordEmbeddings& emb_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::optional<Tensor>> cache_;
};

class GatedBiasProvider final : public BiasProvider {
 public:
  GatedBiasProvider(GatedHead& head, const YearWordEmbeddings& emb) : head_(head), emb_(emb) {}
  YearBias prepare(Tape& tape, Var embedding, int year) const override;
  std::vector<ParameterSet*> trainable() override {
    return {&head_.trajectory().params(), &head_.params()};
  }
  void invalidate() const override;
  std::string kind() const override { return "gated"; }

 private:
  GatedHead& head_;
  const YearWordEmbeddings& emb_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::optional<Tensor>> cache_;  // h_iw per year
};

// Wire a head to a model, checking vocabulary sizes and dimensions: the
// contextual head must match the year embeddings, the gated head must match
// both the embeddings and the model (it ties to E and reads H_k).
std::unique_ptr<BiasProvider> attach(FrequencyHead& head, const FrequencyTable& freq,
                                     const DecoderLM& model);
std::unique_ptr<BiasProvider> attach(ContextualHead& head, const YearWordEmbeddings& emb,
                                     const DecoderLM& model);
std::unique_ptr<BiasProvider> attach(GatedHead& head, const YearWordEmbeddings& emb,
                                     const DecoderLM& model);

// CSV with header `word,bias`, one row per vocabulary word, preceded by a
// `# ` comment line when `comment` is non-empty.
void write_bias_csv(const std::filesystem::path& path, const Vocabulary& vocab, std::span<const double> bias,
                    const std::string& comment = {});

}  // namespace flm
