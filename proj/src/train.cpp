#include "futurelm/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "futurelm/errors.hpp"

namespace flm {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0 || grad_accum == 0) throw ConfigError("batch_size and grad_accum must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(head_lr >= 0.0)) throw ConfigError("head learning rate must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},           {"batch_size", batch_size}, {"grad_accum", grad_accum},
          {"lr", lr},                   {"head_lr", head_lr},       {"patience", patience},     {"year_window", year_window},
          {"max_steps", max_steps},     {"freeze_lm", freeze_lm},   {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_accum = j.value("grad_accum", c.grad_accum);
  c.lr = j.value("lr", c.lr);
  c.head_lr = j.value("head_lr", c.head_lr);
  c.patience = j.value("patience", c.patience);
  c.year_window = j.value("year_window", c.year_window);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.freeze_lm = j.value("freeze_lm", c.freeze_lm);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json EpochRecord::to_json() const {
  nlohmann::json j{{"epoch", epoch}, {"steps", steps}, {"train_loss", train_loss}};
  j["dev_ppl"] = dev_ppl ? nlohmann::json(*dev_ppl) : nlohmann::json(nullptr);
  return j;
}

std::vector<int> window_years(const TemporalCorpus& train, std::size_t window) {
  std::vector<int> years;
  for (int y : train.years()) {
    if (!train.docs(y).empty()) years.push_back(y);
  }
  if (window > 0 && years.size() > window) {
    years.erase(years.begin(), years.end() - static_cast<std::ptrdiff_t>(window));
  }
  return years;
}

double corpus_perplexity(const DecoderLM& model, const BiasProvider& provider,
                         const TemporalCorpus& corpus) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& doc : score_corpus(model, provider, corpus)) {
    for (double lp : doc.log_probs) total += lp;
    count += doc.log_probs.size();
  }
  if (count == 0) throw ContractError("perplexity of an empty corpus slice");
  return std::exp(-total / static_cast<double>(count));
}

namespace {

struct Batch {
  int year;
  std::vector<const Document*> docs;
};

std::vector<Batch> plan_epoch(const TemporalCorpus& corpus, const std::vector<int>& years,
                              std::size_t per_step, Rng& rng) {
  std::vector<Batch> batches;
  for (int y : years) {
    std::vector<const Document*> docs;
    for (const auto& d : corpus.docs(y)) docs.push_back(&d);
    rng.shuffle(docs.begin(), docs.end());
    for (std::size_t i = 0; i < docs.size(); i += per_step) {
      const auto end = std::min(docs.size(), i + per_step);
      batches.push_back({y, {docs.begin() + static_cast<std::ptrdiff_t>(i),
                             docs.begin() + static_cast<std::ptrdiff_t>(end)}});
    }
  }
  rng.shuffle(batches.begin(), batches.end());
  return batches;
}

using Snapshot = std::vector<std::vector<Tensor>>;

Snapshot take_snapshot(const std::vector<ParameterSet*>& sets) {
  Snapshot s;
  for (const auto* set : sets) {
    std::vector<Tensor> values;
    for (const auto& p : *set) values.push_back(p.value);
    s.push_back(std::move(values));
  }
  return s;
}

void restore_snapshot(const std::vector<ParameterSet*>& sets, const Snapshot& s) {
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::size_t j = 0;
    for (auto& p : *sets[i]) p.value = s[i][j++];
  }
}

}  // namespace

TrainReport train(DecoderLM& model, BiasProvider& provider, const TemporalCorpus& train_corpus,
                  const TemporalCorpus& dev_corpus, const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (!train_corpus.tokenized()) throw ContractError("training needs a tokenized corpus");
  if (train_corpus.vocabulary().size() != model.config().vocab_size) {
    throw ContractError("training corpus vocabulary size " +
                        std::to_string(train_corpus.vocabulary().size()) +
                        " does not match the model's " + std::to_string(model.config().vocab_size));
  }
  TrainReport report;
  report.years_used = window_years(train_corpus, config.year_window);
  for (int y : report.years_used) report.documents_used += train_corpus.docs(y).size();
  if (report.documents_used == 0) throw ConfigError("empty training slice");

  // Every set that receives updates; the model's set stays in the snapshot
  // even when frozen so that restoring is uniform.
  std::vector<ParameterSet*> all_sets{&model.params()};
  for (auto* s : provider.trainable()) all_sets.push_back(s);
  std::vector<ParameterSet*> updated = all_sets;
  if (config.freeze_lm) updated.erase(updated.begin());
  if (updated.empty()) throw ConfigError("freeze_lm with a bias provider that has no parameters");
  std::vector<double> lr_scale(updated.size(), config.head_lr > 0.0 ? config.head_lr / config.lr : 1.0);
  if (!config.freeze_lm) lr_scale[0] = 1.0;

  report.optimizer.lr = config.lr;
  report.optimizer.validate();
  Rng order_rng(derive_seed(config.seed, 1));
  Rng dropout_rng(derive_seed(config.seed, 2));
  const bool has_dev = !dev_corpus.empty() && dev_corpus.document_count() > 0;
  const std::size_t per_step = config.batch_size * config.grad_accum;
  const std::size_t max_len = model.config().max_len;

  Snapshot best;
  std::size_t since_best = 0;
  bool done = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    for (const auto& batch : plan_epoch(train_corpus, report.years_used, per_step, order_rng)) {
      for (auto* s : all_sets) s->zero_grad();
      Tape tape(true);
      Var E = tape.param(model.embedding());
      YearBias bias = provider.prepare(tape, E, batch.year);
      std::vector<Var> losses;
      std::size_t tokens = 0;
      for (const Document* doc : batch.docs) {
        Sequence seq = make_sequence(doc->tokens, max_len);
        auto out = model.forward(tape, seq.inputs, &dropout_rng);
        Var logits = bias.is_zero() ? out.logits : bias.apply(out.logits, out.hidden);
        losses.push_back(ops::softmax_cross_entropy(logits, seq.targets));
        tokens += seq.targets.size();
      }
      Var total = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i) total = ops::add(total, losses[i]);
      Var loss = ops::scale(total, 1.0 / static_cast<double>(tokens));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw ContractError("non-finite training loss at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(report.total_steps + 1));
      }
      tape.backward(loss);
      adam_step(updated, report.optimizer, lr_scale);
      provider.invalidate();
      loss_sum += total.value().item();
      token_sum += tokens;
      ++rec.steps;
      ++report.total_steps;
      if (config.max_steps > 0 && report.total_steps >= config.max_steps) {
        done = true;
        break;
      }
    }
    rec.train_loss = loss_sum / static_cast<double>(token_sum);
    if (has_dev) {
      rec.dev_ppl = corpus_perplexity(model, provider, dev_corpus);
      if (!report.best_dev_ppl || *rec.dev_ppl < *report.best_dev_ppl) {
        report.best_dev_ppl = rec.dev_ppl;
        report.best_epoch = epoch;
        best = take_snapshot(all_sets);
        since_best = 0;
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        done = true;
      }
    }
    if (log != nullptr) *log << rec.to_json().dump() << '\n';
    report.epochs.push_back(rec);
  }
  if (!best.empty()) {
    restore_snapshot(all_sets, best);
    provider.invalidate();
  }
  return report;
}

}  // namespace flm
