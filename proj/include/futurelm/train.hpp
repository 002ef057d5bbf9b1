#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/corpus.hpp"
#include "futurelm/lm.hpp"
#include "futurelm/optim.hpp"

namespace flm {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 2;
  std::size_t grad_accum = 2;
  double lr = 3e-4;
  // Learning rate of the bias head parameters; 0 means `lr`.
  double head_lr = 0.0;
  // Epochs without dev improvement before stopping; 0 disables early stopping.
  std::size_t patience = 2;
  // Keep only the n most recent training years (a recency baseline); 0 keeps all.
  std::size_t year_window = 0;
  // Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;
  // Train only the bias head parameters.
  bool freeze_lm = false;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_loss = 0.0;  // mean per-token cross-entropy (nats)
  std::optional<double> dev_ppl;

  nlohmann::json to_json() const;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t total_steps = 0;
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_dev_ppl;
  std::vector<int> years_used;
  std::size_t documents_used = 0;
  AdamState optimizer;
};

// The training years kept by a year window (all years when window is 0).
std::vector<int> window_years(const TemporalCorpus& train, std::size_t window);

// Minimizes mean next-token cross-entropy of `model` with the provider's bias
// added, jointly updating the provider's trainable parameters. Each optimizer
// step takes batch_size * grad_accum documents of a single year, so the year's
// bias is evaluated once per step. With a non-empty dev corpus, the
// parameters with the best dev perplexity are restored at the end.
// `log`, when given, receives one JSON line per epoch.
TrainReport train(DecoderLM& model, BiasProvider& provider, const TemporalCorpus& train_corpus,
                  const TemporalCorpus& dev_corpus, const TrainConfig& config,
                  std::ostream* log = nullptr);

// exp(-mean natural-log probability) over every target of the corpus, which
// equals 2^(-mean log2 p).
double corpus_perplexity(const DecoderLM& model, const BiasProvider& provider,
                         const TemporalCorpus& corpus);

}  // namespace flm
