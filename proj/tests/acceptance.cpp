// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Per-seed experiment results are written to
// <out>/drift_results.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "futurelm/checkpoint.hpp"
#include "futurelm/errors.hpp"
#include "futurelm/metrics.hpp"
#include "futurelm/optim.hpp"
#include "futurelm/pipeline.hpp"
#include "futurelm/synth.hpp"
#include "futurelm/temporal.hpp"
#include "futurelm/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// Small helpers shared by several criteria.

DecoderConfig small_config(std::size_t vocab, std::size_t d = 16) {
  DecoderConfig c;
  c.vocab_size = vocab;
  c.layers = 2;
  c.heads = 2;
  c.d_model = d;
  c.d_ff = 4 * d;
  c.max_len = 24;
  c.dropout = 0.0;
  return c;
}

std::vector<TokenId> random_prefix(Rng& rng, std::size_t vocab, std::size_t max_len) {
  std::vector<TokenId> p{kEosId};
  const std::size_t n = 1 + rng.below(max_len - 1);
  while (p.size() < n) p.push_back(static_cast<TokenId>(kSpecialTokenCount + rng.below(vocab - kSpecialTokenCount)));
  return p;
}

FrequencyTable random_frequencies(Rng& rng, std::size_t vocab, const std::vector<int>& years) {
  FrequencyTable f(years, vocab);
  for (int y : years) {
    for (std::size_t w = 0; w < vocab; ++w) f.add(y, static_cast<TokenId>(w), rng.below(50));
  }
  return f;
}

YearWordEmbeddings random_embeddings(Rng& rng, std::size_t vocab, std::size_t dim, const std::vector<int>& years) {
  YearWordEmbeddings e(vocab, dim);
  for (int y : years) {
    Tensor v(vocab, dim);
    std::vector<std::uint64_t> counts(vocab, 0);
    for (std::size_t w = 0; w < vocab; ++w) {
      if (rng.uniform() < 0.2) continue;
      counts[w] = 1 + rng.below(9);
      for (std::size_t j = 0; j < dim; ++j) v(w, j) = rng.normal();
    }
    e.set_year(y, std::move(v), std::move(counts));
  }
  return e;
}

// 1. Gradients through the full biased-softmax loss.

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const std::size_t vocab = 12;
  const std::size_t d = 16;
  Rng rng(101);
  const std::vector<int> years{1, 2, 3};
  const int year = 4;
  FrequencyTable freq = random_frequencies(rng, vocab, years);
  YearWordEmbeddings emb = random_embeddings(rng, vocab, d, years);
  const std::vector<TokenId> inputs{kEosId, 3, 7, 2, 9, 5};
  const std::vector<TokenId> targets{3, 7, 2, 9, 5, kEosId};

  DecoderConfig cfg = small_config(vocab, d);
  cfg.init_std = 0.3;
  FrequencyHead fh(3, 64, 11);
  ContextualHead ch(d, 3, 12);
  GatedHead gh(d, 3, 1.0, true, 13);

  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  auto check = [&](const std::string& name, DecoderLM& model, BiasProvider& provider) {
    std::vector<Parameter*> params = all_parameters(model.params());
    for (auto* set : provider.trainable()) {
      for (auto* p : all_parameters(*set)) params.push_back(p);
    }
    auto loss = [&](Tape& tape) {
      provider.invalidate();
      Var logits = biased_logits(tape, model, provider, year, inputs);
      return ops::softmax_cross_entropy(logits, targets);
    };
    GradCheckResult r = grad_check(loss, params);
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = name + ":" + r.worst_parameter + "[" + std::to_string(r.worst_index) + "] (analytic " +
              fmt(r.worst_analytic, 6) + ", numeric " + fmt(r.worst_numeric, 6) + ")";
    }
  };
  {
    DecoderLM m(cfg, 1);
    NoBias none;
    check("baseline", m, none);
  }
  {
    DecoderLM m(cfg, 2);
    auto p = attach(fh, freq, m);
    check("frequency", m, *p);
  }
  {
    DecoderLM m(cfg, 3);
    auto p = attach(ch, emb, m);
    check("contextual", m, *p);
  }
  {
    DecoderLM m(cfg, 4);
    auto p = attach(gh, emb, m);
    check("gated", m, *p);
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 120.0, "max relative error " + fmt(worst, 3) + " at " + where + " over " +
                                            std::to_string(checked) + " entries, " + fmt(secs, 3) + " s"};
}

// 2. Reductions to the baseline.

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Outcome reduction_suite() {
  const std::size_t vocab = 30;
  const std::size_t d = 16;
  Rng rng(202);
  DecoderLM model(small_config(vocab, d), 5);
  NoBias none;
  StaticBiasProvider zero({{4, std::vector<double>(vocab, 0.0)}});

  YearWordEmbeddings emb = random_embeddings(rng, vocab, d, {1, 2, 3});
  GatedHead gh(d, 3, 0.0, false, 21);
  auto gated = attach(gh, emb, model);

  std::vector<double> noise(vocab);
  for (auto& v : noise) v = rng.normal();
  std::vector<double> shifted = noise;
  for (auto& v : shifted) v += 7.25;
  StaticBiasProvider plain({{4, noise}});
  StaticBiasProvider shift({{4, shifted}});
  StaticBiasProvider flat({{4, std::vector<double>(vocab, -3.5)}});

  double a = 0.0, b = 0.0, c = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto prefix = random_prefix(rng, vocab, 24);
    Tape tape(false);
    const auto out = model.forward(tape, prefix);
    const auto base = ops::softmax(out.logits.value().row_span(prefix.size() - 1));
    a = std::max(a, max_abs_diff(base, next_token_dist(model, prefix, zero, 4)));
    a = std::max(a, max_abs_diff(base, next_token_dist(model, prefix, none, 4)));
    b = std::max(b, max_abs_diff(base, next_token_dist(model, prefix, *gated, 4)));
    c = std::max(c, max_abs_diff(base, next_token_dist(model, prefix, flat, 4)));
    c = std::max(c, max_abs_diff(next_token_dist(model, prefix, plain, 4), next_token_dist(model, prefix, shift, 4)));
  }
  return {a <= 1e-12 && b <= 1e-12 && c <= 1e-12,
          "zero " + fmt(a, 3) + ", gated alpha=0 " + fmt(b, 3) + ", constant shift " + fmt(c, 3) + " over 100 prefixes"};
}

// 3-5. The drift experiment.

struct SeedResult {
  std::uint64_t seed = 0;
  double baseline_ppl = 0, frequency_ppl = 0, gated_ppl = 0;
  double baseline_cpl = 0, frequency_cpl = 0, gated_cpl = 0;
  double rising_bias = 0, falling_bias = 0;
  double gated_alpha = 0;
  double frequency_seconds = 0;  // baseline + frequency runs
  double seconds = 0;

  json to_json() const {
    return {{"seed", seed},
            {"test_ppl", {{"baseline", baseline_ppl}, {"frequency", frequency_ppl}, {"gated", gated_ppl}}},
            {"test_cpl", {{"baseline", baseline_cpl}, {"frequency", frequency_cpl}, {"gated", gated_cpl}}},
            {"frequency_bias", {{"rising", rising_bias}, {"falling", falling_bias}}},
            {"gated_alpha", gated_alpha},
            {"frequency_seconds", frequency_seconds},
            {"seconds", seconds}};
  }
};

double mean_bias(const std::vector<double>& bias, const Vocabulary& vocab, const std::vector<std::string>& words) {
  double s = 0.0;
  for (const auto& w : words) s += bias[static_cast<std::size_t>(vocab.id(w))];
  return s / static_cast<double>(words.size());
}

SeedResult drift_experiment(std::uint64_t seed) {
  const auto t0 = Clock::now();
  SeedResult r;
  r.seed = seed;
  DriftSpec spec;
  spec.seed = seed;
  DriftCorpus dc = generate_drift_corpus(spec);
  YearSplit split = split_by_year(dc.corpus, {1, 2, 3, 4, 5, 6}, 7, 8);
  const TemporalCorpus all = dc.corpus.tokenized_with(split.vocab);
  const FrequencyTable freq = frequency_table(all);
  StopwordList stop = stopwords_from_words(*split.vocab, dc.function_words);
  stop.ids.insert(kEosId);

  DecoderConfig cfg;
  cfg.vocab_size = split.vocab->size();
  cfg.d_model = 32;
  cfg.d_ff = 128;
  cfg.max_len = 32;
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = derive_seed(seed, 3);
  const std::uint64_t init = derive_seed(seed, 1);
  const std::uint64_t head_seed = derive_seed(seed, 2);

  {
    DecoderLM model(cfg, init);
    NoBias none;
    train(model, none, split.train, split.dev, tc);
    const auto scored = score_corpus(model, none, split.test);
    r.baseline_ppl = perplexity(scored).value;
    r.baseline_cpl = content_perplexity(scored, stop).value;
  }
  {
    DecoderLM model(cfg, init);
    FrequencyHead head(spec.window, 8, head_seed);
    auto provider = attach(head, freq, model);
    train(model, *provider, split.train, split.dev, tc);
    const auto scored = score_corpus(model, *provider, split.test);
    r.frequency_ppl = perplexity(scored).value;
    r.frequency_cpl = content_perplexity(scored, stop).value;
    const auto bias = head.bias_values(freq, 8);
    r.rising_bias = mean_bias(bias, *split.vocab, dc.labels.rising);
    r.falling_bias = mean_bias(bias, *split.vocab, dc.labels.falling);
  }
  r.frequency_seconds = seconds_since(t0);
  {
    TrainConfig ec;
    ec.epochs = 4;
    ec.patience = 0;
    ec.seed = derive_seed(seed, 5);
    ChainedEncoders encoders(cfg, derive_seed(seed, 4), ec, all);
    const YearWordEmbeddings emb = build_year_embeddings(all, encoders, {1, 2, 3, 4, 5, 6, 7});
    DecoderLM model(cfg, init);
    GatedHead head(cfg.d_model, spec.window, 1.0, true, head_seed);
    auto provider = attach(head, emb, model);
    train(model, *provider, split.train, split.dev, tc);
    const auto scored = score_corpus(model, *provider, split.test);
    r.gated_ppl = perplexity(scored).value;
    r.gated_cpl = content_perplexity(scored, stop).value;
    r.gated_alpha = head.alpha();
  }
  r.seconds = seconds_since(t0);
  return r;
}

// 6. No leakage: biases for year i from data edited at year i and later.

TemporalCorpus edit_corpus(const TemporalCorpus& base, int from_year, int mode) {
  TemporalCorpus out;
  for (int y : base.years()) {
    std::vector<std::string> texts;
    for (const auto& d : base.docs(y)) texts.push_back(d.raw_text);
    if (y >= from_year) {
      if (mode == 0) {
        std::reverse(texts.begin(), texts.end());
      } else if (mode == 1) {
        for (auto& t : texts) t += " the the the";
        texts.front() = "entirely different words appear here";
      } else {
        texts.resize(texts.size() / 3);
      }
    }
    for (auto& t : texts) out.add(y, t);
  }
  return out;
}

Outcome leakage_suite() {
  DriftSpec spec;
  spec.seed = 77;
  spec.docs_per_year = 30;
  DriftCorpus dc = generate_drift_corpus(spec);
  YearSplit split = split_by_year(dc.corpus, {1, 2, 3, 4, 5, 6}, 7, 8);
  const std::size_t vocab = split.vocab->size();
  DecoderConfig cfg = small_config(vocab, 16);
  TrainConfig ec;
  ec.epochs = 1;
  ec.patience = 0;
  ec.seed = 5;
  DecoderLM model(cfg, 9);
  FrequencyHead fh(3, 16, 31);
  ContextualHead ch(16, 3, 32);
  GatedHead gh(16, 3, 1.0, false, 33);
  const std::vector<TokenId> prefix{kEosId, 4, 9, 12};

  struct Biases {
    std::vector<double> frequency, contextual;
    Tensor gated;
  };
  auto compute = [&](const TemporalCorpus& raw, int year) {
    const TemporalCorpus all = raw.tokenized_with(split.vocab);
    const FrequencyTable freq = frequency_table(all);
    ChainedEncoders enc(cfg, 4, ec, all);
    std::vector<int> years;
    for (int y : all.years()) {
      if (y < year) years.push_back(y);
    }
    const YearWordEmbeddings emb = build_year_embeddings(all, enc, years);
    Biases b;
    b.frequency = fh.bias_values(freq, year);
    b.contextual = ch.bias_values(emb, year);
    auto gp = attach(gh, emb, model);
    Tape tape(false);
    b.gated = biased_logits(tape, model, *gp, year, prefix).value();
    return b;
  };

  std::size_t checks = 0;
  std::string first_failure;
  for (int year : {5, 7}) {
    const Biases ref = compute(dc.corpus, year);
    for (int mode = 0; mode < 3; ++mode) {
      const Biases got = compute(edit_corpus(dc.corpus, year, mode), year);
      ++checks;
      const char* what = got.frequency != ref.frequency     ? "frequency"
                         : got.contextual != ref.contextual ? "contextual"
                         : !(got.gated == ref.gated)        ? "gated"
                                                            : nullptr;
      if (what && first_failure.empty()) {
        first_failure = std::string(what) + " year " + std::to_string(year) + " edit " + std::to_string(mode);
      }
    }
  }
  if (!first_failure.empty()) return {false, "bias changed: " + first_failure};
  return {true, std::to_string(checks) + " edits (shuffle, edit, delete) x 3 heads bit-identical"};
}

// 7. Metric oracles.

// Brute-force Meteor: every injective matching of equal tokens, maximum
// matches then minimum chunks.
double brute_meteor(const std::vector<TokenId>& c, const std::vector<TokenId>& r) {
  std::size_t best_m = 0, best_ch = 0;
  std::vector<int> match(c.size(), -1);
  std::vector<bool> used(r.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == c.size()) {
      std::size_t m = 0, ch = 0;
      int prev = -2;
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (match[k] < 0) {
          prev = -2;
          continue;
        }
        ++m;
        if (!(prev >= 0 && match[k] == prev + 1 && match[k - 1] >= 0)) ++ch;
        prev = match[k];
      }
      if (m > best_m || (m == best_m && ch < best_ch)) {
        best_m = m;
        best_ch = ch;
      }
      return;
    }
    rec(i + 1);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && r[j] == c[i]) {
        used[j] = true;
        match[i] = static_cast<int>(j);
        rec(i + 1);
        match[i] = -1;
        used[j] = false;
      }
    }
  };
  rec(0);
  if (best_m == 0) return 0.0;
  const double p = static_cast<double>(best_m) / static_cast<double>(c.size());
  const double rc = static_cast<double>(best_m) / static_cast<double>(r.size());
  const double f = 10.0 * p * rc / (rc + 9.0 * p);
  const double pen = 0.5 * std::pow(static_cast<double>(best_ch) / static_cast<double>(best_m), 3.0);
  return f * (1.0 - pen);
}

Outcome metric_oracles() {
  std::vector<std::string> fails;
  // (a) and (b)
  DriftSpec spec;
  spec.seed = 3;
  spec.docs_per_year = 10;
  DriftCorpus dc = generate_drift_corpus(spec);
  YearSplit split = split_by_year(dc.corpus, {1, 2, 3, 4, 5, 6}, 7, 8);
  const std::size_t vocab = split.vocab->size();
  DecoderLM model(small_config(vocab), 8);
  NoBias none;
  const auto scored = score_corpus(model, none, split.test);
  const double ppl = perplexity(scored).value;
  const double cpl = content_perplexity(scored, StopwordList{}).value;
  if (ppl != cpl) fails.push_back("CPL " + fmt(cpl, 17) + " != PPL " + fmt(ppl, 17));

  DecoderLM uniform(small_config(vocab), 8);
  for (auto& p : uniform.params()) {
    if (p.name == "tok_emb") p.value.fill(0.0);
  }
  const double uppl = perplexity(uniform, none, split.test).value;
  if (std::abs(uppl - static_cast<double>(vocab)) > 1e-9) {
    fails.push_back("uniform PPL " + fmt(uppl, 17) + " vs " + std::to_string(vocab));
  }

  // (c) two generations against three references
  const std::vector<std::vector<TokenId>> gens{{2, 3, 4, 5, 3, 6}, {7, 8, 2, 9}};
  const std::vector<std::vector<TokenId>> refs{{3, 4, 5, 2, 3}, {9, 7, 8, 6, 2}, {2, 3, 6, 4, 5, 3}};
  StopwordList stop;
  stop.ids = {2};
  const auto cm = content_meteor_score(gens, refs, stop);
  double oracle = 0.0;
  for (const auto& g : gens) {
    const auto gs = strip_stopwords(g, stop);
    double best = 0.0;
    for (const auto& r : refs) best = std::max(best, brute_meteor(gs, strip_stopwords(r, stop)));
    oracle += best;
  }
  oracle = 100.0 * oracle / static_cast<double>(gens.size());
  if (cm.cm != oracle) fails.push_back("CM " + fmt(cm.cm, 17) + " vs brute force " + fmt(oracle, 17));

  // (d)
  for (std::size_t n : {1, 2, 5, 20}) {
    std::vector<TokenId> x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(static_cast<TokenId>(i + 2));
    const double want = 1.0 - 0.5 * std::pow(static_cast<double>(n), -3.0);
    const double got = meteor(x, x);
    if (std::abs(got - want) > 1e-15) fails.push_back("meteor(x,x) |x|=" + std::to_string(n) + " " + fmt(got, 17));
  }
  if (fails.empty()) {
    return {true, "CPL==PPL, uniform PPL=" + fmt(uppl, 15) + ", CM=" + fmt(cm.cm, 8) + " matches brute force, meteor(x,x)"};
  }
  std::string d;
  for (const auto& f : fails) d += (d.empty() ? "" : "; ") + f;
  return {false, d};
}

// 8. Memorization canary.

Outcome canary() {
  const auto t0 = Clock::now();
  TemporalCorpus raw;
  raw.add(1, "the quick brown fox jumps over the lazy dog near the river bank today");
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(raw, 100, 1));
  const TemporalCorpus corpus = raw.tokenized_with(vocab);
  DecoderConfig cfg = small_config(vocab->size());
  DecoderLM model(cfg, 1);
  NoBias none;
  TrainConfig tc;
  tc.epochs = 200;
  tc.max_steps = 200;
  tc.batch_size = 1;
  tc.grad_accum = 1;
  tc.lr = 1e-2;
  tc.patience = 0;
  tc.seed = 1;
  const TrainReport rep = train(model, none, corpus, TemporalCorpus{}, tc);
  const double ppl = corpus_perplexity(model, none, corpus);
  const double secs = seconds_since(t0);
  return {ppl < 1.5 && rep.total_steps <= 200 && secs < 60.0,
          "training PPL " + fmt(ppl) + " after " + std::to_string(rep.total_steps) + " steps, " + fmt(secs, 3) + " s"};
}

// 9. End-to-end determinism through the command layer.

std::map<std::string, std::string> tree_digests(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = file_sha256(e.path());
  }
  return out;
}

void run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  std::ostringstream msg;
  auto cfg = [](const json& j) {
    json c = j;
    c["seed"] = 17;
    return c;
  };
  pipeline::run("synth", cfg({{"synth", {{"docs_per_year", 25}}}}), dir / "synth", msg);
  pipeline::run("ingest",
                cfg({{"ingest",
                      {{"input", (dir / "synth" / "corpus.jsonl").string()},
                       {"train_years", {1, 2, 3, 4, 5, 6}},
                       {"dev_year", 7},
                       {"test_year", 8},
                       {"stopwords",
                        {{"override", (dir / "synth" / "stopwords.txt").string()}, {"source", "file"}, {"include_eos", true}}}}}}),
                dir / "data", msg);
  const json model{{"d_model", 16}, {"layers", 2}, {"heads", 2}, {"d_ff", 32}, {"max_len", 24}};
  const std::string data = (dir / "data").string();
  pipeline::run("train",
                cfg({{"dataset", data}, {"model", model}, {"train", {{"epochs", 1}}}, {"head", {{"kind", "frequency"}, {"frequency_hidden", 8}}}}),
                dir / "train", msg);
  const std::string ckpt = (dir / "train" / "model.ckpt").string();
  pipeline::run("eval", cfg({{"dataset", data}, {"checkpoint", ckpt}, {"eval", {{"generations", 4}}}}), dir / "eval", msg);
  pipeline::run("generate", cfg({{"dataset", data}, {"checkpoint", ckpt}, {"generate", {{"count", 3}}}}), dir / "generate", msg);
}

Outcome determinism(const fs::path& out) {
  // Both runs use the same directory, since resolved configs record paths.
  const fs::path dir = out / "determinism";
  run_pipeline(dir);
  const auto da = tree_digests(dir);
  run_pipeline(dir);
  const auto db = tree_digests(dir);
  if (da.size() != db.size()) return {false, "runs produced different file sets"};
  for (const auto& [name, digest] : da) {
    auto it = db.find(name);
    if (it == db.end() || it->second != digest) return {false, name + " differs between runs"};
  }
  for (const char* needed : {"eval/eval_report.json", "generate/generations.txt"}) {
    if (!da.count(needed)) return {false, std::string("missing ") + needed};
  }
  return {true, std::to_string(da.size()) + " artifacts byte-identical across two runs"};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"futurelm acceptance suite"};
  std::string out = "acceptance_runs";
  std::size_t seeds = 5;
  std::vector<int> only;
  app.add_option("--out", out, "Directory for run artifacts");
  app.add_option("--seeds", seeds, "Seeds for the drift experiment");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  std::map<int, Outcome> results;
  auto report = [&](int c, const std::string& title, const Outcome& o) {
    results[c] = o;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << c << "] " << title << ": " << o.detail << std::endl;
  };

  if (wanted(1)) report(1, "gradient check", guarded(gradient_suite));
  if (wanted(2)) report(2, "baseline reductions", guarded(reduction_suite));

  if (wanted(3) || wanted(4) || wanted(5)) {
    std::vector<SeedResult> runs;
    json all = json::array();
    std::string error;
    try {
      for (std::uint64_t s = 1; s <= seeds; ++s) {
        runs.push_back(drift_experiment(s));
        const auto& r = runs.back();
        all.push_back(r.to_json());
        std::cout << "      seed " << s << ": test PPL base " << fmt(r.baseline_ppl) << " freq " << fmt(r.frequency_ppl)
                  << " gated " << fmt(r.gated_ppl) << " | test CPL base " << fmt(r.baseline_cpl) << " freq "
                  << fmt(r.frequency_cpl) << " gated " << fmt(r.gated_cpl) << " | bias rising " << fmt(r.rising_bias)
                  << " falling " << fmt(r.falling_bias) << " | " << fmt(r.seconds, 3) << " s" << std::endl;
      }
      std::ofstream(fs::path(out) / "drift_results.json") << all.dump(2) << '\n';
    } catch (const std::exception& e) {
      error = std::string("error: ") + e.what();
    }
    const std::string n = std::to_string(seeds);
    std::size_t ppl_wins = 0, chain = 0, gated_wins = 0, trend = 0;
    double slowest = 0.0;
    for (const auto& r : runs) {
      ppl_wins += r.frequency_ppl < r.baseline_ppl;
      chain += r.gated_cpl <= r.frequency_cpl && r.frequency_cpl <= r.baseline_cpl;
      gated_wins += r.gated_cpl < r.baseline_cpl;
      trend += r.rising_bias > r.falling_bias;
      slowest = std::max(slowest, r.frequency_seconds);
    }
    const bool ok = error.empty() && runs.size() == seeds;
    if (wanted(3)) {
      report(3, "frequency PPL below baseline",
             ok ? Outcome{ppl_wins >= 4 && slowest <= 900.0,
                          std::to_string(ppl_wins) + "/" + n + " seeds, slowest seed " + fmt(slowest, 3) + " s"}
                : Outcome{false, error});
    }
    if (wanted(4)) {
      report(4, "CPL ordering gated <= frequency <= baseline",
             ok ? Outcome{chain >= 3 && gated_wins >= 4, "full ordering " + std::to_string(chain) + "/" + n +
                                                              ", gated < baseline " + std::to_string(gated_wins) + "/" + n}
                : Outcome{false, error});
    }
    if (wanted(5)) {
      report(5, "rising bias above falling bias",
             ok ? Outcome{trend >= 4, std::to_string(trend) + "/" + n + " seeds"} : Outcome{false, error});
    }
  }

  if (wanted(6)) report(6, "no leakage", guarded(leakage_suite));
  if (wanted(7)) report(7, "metric oracles", guarded(metric_oracles));
  if (wanted(8)) report(8, "memorization canary", guarded(canary));
  if (wanted(9)) report(9, "end-to-end determinism", guarded([&] { return determinism(out); }));

  bool all_pass = true;
  for (const auto& [c, o] : results) all_pass = all_pass && o.pass;
  return all_pass ? 0 : 1;
}
