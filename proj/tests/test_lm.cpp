#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "futurelm/errors.hpp"
#include "futurelm/generate.hpp"
#include "futurelm/lm.hpp"
#include "futurelm/train.hpp"
#include "test_util.hpp"

using namespace flm;

namespace {

DecoderConfig tiny(std::size_t vocab) {
  DecoderConfig c;
  c.vocab_size = vocab;
  c.layers = 2;
  c.heads = 2;
  c.d_model = 16;
  c.d_ff = 64;
  c.max_len = 16;
  return c;
}

TemporalCorpus years_corpus(const std::map<int, std::vector<std::string>>& docs) {
  TemporalCorpus raw;
  for (const auto& [y, texts] : docs) {
    for (const auto& t : texts) raw.add(y, t);
  }
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(raw, 100, 1));
  return raw.tokenized_with(vocab);
}

}  // namespace

TEST(Forward, SingleTokenShapes) {
  DecoderLM m(tiny(10), 1);
  Tape tape(false);
  const std::vector<TokenId> t{kEosId};
  auto out = m.forward(tape, t);
  EXPECT_EQ(out.hidden.rows(), 1u);
  EXPECT_EQ(out.hidden.cols(), 16u);
  EXPECT_EQ(out.logits.rows(), 1u);
  EXPECT_EQ(out.logits.cols(), 10u);
}

TEST(Forward, LogitsAreHiddenTimesEmbedding) {
  DecoderLM m(tiny(10), 2);
  Tape tape(false);
  const std::vector<TokenId> t{kEosId, 4, 7};
  auto out = m.forward(tape, t);
  const Tensor& H = out.hidden.value();
  const Tensor& E = m.embedding().value;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t w = 0; w < 10; ++w) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 16; ++j) dot += H(k, j) * E(w, j);
      EXPECT_NEAR(out.logits.value()(k, w), dot, 1e-12);
    }
  }
}

TEST(Forward, Causality) {
  DecoderLM m(tiny(10), 3);
  const std::vector<TokenId> a{kEosId, 4, 7, 2, 9};
  std::vector<TokenId> b = a;
  b[3] = 5;
  b[4] = 6;
  Tape ta(false), tb(false);
  const Tensor ha = m.forward(ta, a).hidden.value();
  const Tensor hb = m.forward(tb, b).hidden.value();
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(ha(k, j), hb(k, j));
  }
  bool changed = false;
  for (std::size_t j = 0; j < 16; ++j) changed = changed || ha(3, j) != hb(3, j);
  EXPECT_TRUE(changed);
}

TEST(Forward, Errors) {
  DecoderLM m(tiny(10), 4);
  Tape tape(false);
  std::vector<TokenId> tooLong(17, 3);
  EXPECT_THROW(m.forward(tape, tooLong), ContractError);
  std::vector<TokenId> bad{kEosId, 10};
  EXPECT_THROW(m.forward(tape, bad), ContractError);
  std::vector<TokenId> empty;
  EXPECT_THROW(m.forward(tape, empty), ContractError);
}

TEST(Forward, ConfigValidation) {
  DecoderConfig c = tiny(10);
  c.heads = 3;
  EXPECT_THROW(DecoderLM(c, 1), ConfigError);
  c = tiny(10);
  c.max_len = 1;
  EXPECT_THROW(DecoderLM(c, 1), ConfigError);
}

TEST(Forward, GoldenLogits) {
  std::ifstream in(test::data_path("golden_logits_d16.json"));
  ASSERT_TRUE(in) << "missing golden file";
  const auto golden = nlohmann::json::parse(in);
  DecoderLM m(DecoderConfig::from_json(golden.at("config")), golden.at("seed").get<std::uint64_t>());
  const auto tokens = golden.at("tokens").get<std::vector<TokenId>>();
  Tape tape(false);
  const Tensor logits = m.forward(tape, tokens).logits.value();
  const auto want = golden.at("logits").get<std::vector<std::vector<double>>>();
  ASSERT_EQ(want.size(), logits.rows());
  for (std::size_t k = 0; k < logits.rows(); ++k) {
    for (std::size_t w = 0; w < logits.cols(); ++w) EXPECT_EQ(logits(k, w), want[k][w]) << k << "," << w;
  }
}

TEST(Forward, SameSeedSameLogits) {
  DecoderLM a(tiny(12), 9), b(tiny(12), 9);
  const std::vector<TokenId> t{kEosId, 3, 4};
  Tape ta(false), tb(false);
  const Tensor la = a.forward(ta, t).logits.value();
  EXPECT_EQ(la, b.forward(tb, t).logits.value());
}

TEST(TiedEmbeddings, GradientFlowsThroughBothPaths) {
  // Token 5 appears only as an input, token 6 only as a target: both rows of
  // E receive gradient.
  DecoderLM m(tiny(10), 5);
  for (auto& p : m.params()) p.zero_grad();
  Tape tape(true);
  const std::vector<TokenId> in{kEosId, 5};
  const std::vector<TokenId> target{6, 6};
  auto out = m.forward(tape, in);
  tape.backward(ops::softmax_cross_entropy(out.logits, target));
  const Tensor& g = m.embedding().grad;
  double row5 = 0.0, row6 = 0.0;
  for (std::size_t j = 0; j < 16; ++j) {
    row5 += std::abs(g(5, j));
    row6 += std::abs(g(6, j));
  }
  EXPECT_GT(row5, 0.0);
  EXPECT_GT(row6, 0.0);
}

TEST(BiasedSoftmax, HandComputedExample) {
  Tape tape(false);
  Var logits = tape.constant(Tensor::row({1.0, 0.0, -1.0}));
  YearBias bias{tape.constant(Tensor::row({0.0, std::log(2.0), 0.0})), {}};
  const auto p = ops::softmax(bias.apply(logits, logits).value().row_span(0));
  // Proportional to [e, 2, 1/e].
  const double z = std::exp(1.0) + 2.0 + std::exp(-1.0);
  EXPECT_NEAR(p[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / z, 1e-15);
  EXPECT_NEAR(p[2], std::exp(-1.0) / z, 1e-15);
  EXPECT_NEAR(p[0], 0.53445, 5e-6);
  EXPECT_NEAR(p[1], 0.39322, 5e-6);
  EXPECT_NEAR(p[2], 0.07233, 5e-6);
}

TEST(BiasedSoftmax, ZeroBiasEqualsBaseline) {
  DecoderLM m(tiny(10), 6);
  NoBias none;
  StaticBiasProvider zero({{3, std::vector<double>(10, 0.0)}});
  const std::vector<TokenId> prefix{kEosId, 2, 8};
  const auto a = next_token_dist(m, prefix, none, 3);
  const auto b = next_token_dist(m, prefix, zero, 3);
  for (std::size_t w = 0; w < 10; ++w) EXPECT_NEAR(a[w], b[w], 1e-15);
}

TEST(BiasedSoftmax, ShiftInvarianceAndNormalization) {
  DecoderLM m(tiny(10), 7);
  Rng rng(3);
  std::vector<double> b(10), shifted(10);
  for (std::size_t w = 0; w < 10; ++w) {
    b[w] = rng.normal();
    shifted[w] = b[w] - 4.5;
  }
  StaticBiasProvider p1({{2, b}}), p2({{2, shifted}});
  const std::vector<TokenId> prefix{kEosId, 3};
  const auto a = next_token_dist(m, prefix, p1, 2);
  const auto c = next_token_dist(m, prefix, p2, 2);
  for (std::size_t w = 0; w < 10; ++w) EXPECT_NEAR(a[w], c[w], 1e-12);
  EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 1.0, 1e-9);
}

TEST(BiasedSoftmax, YearWithoutBiasIsBaseline) {
  DecoderLM m(tiny(10), 8);
  NoBias none;
  StaticBiasProvider other({{5, std::vector<double>(10, 1.0)}});
  const std::vector<TokenId> prefix{kEosId, 3};
  EXPECT_EQ(next_token_dist(m, prefix, none, 2), next_token_dist(m, prefix, other, 2));
}

TEST(BiasedSoftmax, WrongLengthBias) {
  DecoderLM m(tiny(10), 8);
  StaticBiasProvider bad({{2, std::vector<double>(9, 0.0)}});
  const std::vector<TokenId> prefix{kEosId, 3};
  EXPECT_THROW(next_token_dist(m, prefix, bad, 2), ContractError);
  EXPECT_THROW(next_token_dist(m, std::vector<TokenId>{}, bad, 2), ContractError);
}

TEST(Sequence, ShiftAndTruncation) {
  const std::vector<TokenId> doc{4, 5, 6};
  auto s = make_sequence(doc, 8);
  EXPECT_EQ(s.inputs, (std::vector<TokenId>{kEosId, 4, 5, 6}));
  EXPECT_EQ(s.targets, (std::vector<TokenId>{4, 5, 6, kEosId}));
  s = make_sequence(doc, 3);
  EXPECT_EQ(s.inputs, (std::vector<TokenId>{kEosId, 4, 5}));
  EXPECT_EQ(s.targets, (std::vector<TokenId>{4, 5, 6}));
}

TEST(Train, MemorizationCanary) {
  const TemporalCorpus c = years_corpus({{1, {"a small closed corpus with one document to learn by heart"}}});
  DecoderConfig cfg = tiny(c.vocabulary().size());
  cfg.dropout = 0.0;
  DecoderLM m(cfg, 1);
  NoBias none;
  TrainConfig tc;
  tc.epochs = 200;
  tc.max_steps = 200;
  tc.batch_size = 1;
  tc.grad_accum = 1;
  tc.lr = 1e-2;
  tc.patience = 0;
  auto rep = train(m, none, c, TemporalCorpus{}, tc);
  EXPECT_EQ(rep.total_steps, 200u);
  EXPECT_LT(corpus_perplexity(m, none, c), 1.5);
}

TEST(Train, YearWindowSelectsRecentYears) {
  const TemporalCorpus c = years_corpus({{1, {"one a"}},
                                         {2, {"two b"}},
                                         {3, {"three c", "three d"}},
                                         {4, {"four e", "four f"}},
                                         {5, {"five g"}}});
  EXPECT_EQ(window_years(c, 2), (std::vector<int>{4, 5}));
  EXPECT_EQ(window_years(c, 0), (std::vector<int>{1, 2, 3, 4, 5}));
  DecoderLM m(tiny(c.vocabulary().size()), 1);
  NoBias none;
  TrainConfig tc;
  tc.epochs = 1;
  tc.year_window = 2;
  tc.patience = 0;
  auto rep = train(m, none, c, TemporalCorpus{}, tc);
  EXPECT_EQ(rep.years_used, (std::vector<int>{4, 5}));
  EXPECT_EQ(rep.documents_used, 3u);
}

TEST(Train, SameSeedBitIdentical) {
  const TemporalCorpus c = years_corpus({{1, {"x y z", "y z x w"}}, {2, {"z w", "x x y"}}});
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 4;
  tc.patience = 0;
  NoBias none;
  DecoderLM a(tiny(c.vocabulary().size()), 2), b(tiny(c.vocabulary().size()), 2);
  train(a, none, c, TemporalCorpus{}, tc);
  train(b, none, c, TemporalCorpus{}, tc);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
}

TEST(Train, EarlyStoppingRestoresBest) {
  const TemporalCorpus all = years_corpus({{1, {"p q r s", "q r s p", "r s p q"}}, {2, {"p q s r", "s r q p"}}});
  const TemporalCorpus tr = all.subset({1});
  const TemporalCorpus dev = all.subset({2});
  DecoderLM m(tiny(all.vocabulary().size()), 3);
  NoBias none;
  TrainConfig tc;
  tc.epochs = 6;
  tc.lr = 3e-2;
  tc.patience = 1;
  std::ostringstream log;
  auto rep = train(m, none, tr, dev, tc, &log);
  ASSERT_TRUE(rep.best_dev_ppl.has_value());
  EXPECT_NEAR(*rep.best_dev_ppl, corpus_perplexity(m, none, dev), 1e-9);
  double best = 1e300;
  for (const auto& e : rep.epochs) best = std::min(best, *e.dev_ppl);
  EXPECT_EQ(best, *rep.best_dev_ppl);
  EXPECT_FALSE(log.str().empty());
}

TEST(Train, Errors) {
  const TemporalCorpus c = years_corpus({{1, {"a b"}}});
  DecoderLM m(tiny(c.vocabulary().size()), 1);
  NoBias none;
  TrainConfig tc;
  EXPECT_THROW(train(m, none, c.subset({}), TemporalCorpus{}, tc), ConfigError);
  tc.lr = 0.0;
  EXPECT_THROW(train(m, none, c, TemporalCorpus{}, tc), ConfigError);
  tc = TrainConfig{};
  tc.freeze_lm = true;
  EXPECT_THROW(train(m, none, c, TemporalCorpus{}, tc), ConfigError);
}

TEST(Train, NonFiniteLossHalts) {
  const TemporalCorpus c = years_corpus({{1, {"a b c"}}});
  DecoderLM m(tiny(c.vocabulary().size()), 1);
  m.params()[0].value(2, 0) = std::numeric_limits<double>::infinity();
  NoBias none;
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_THROW(train(m, none, c, TemporalCorpus{}, tc), ContractError);
}

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig tc;
  tc.epochs = 7;
  tc.head_lr = 1e-3;
  tc.year_window = 2;
  tc.freeze_lm = true;
  tc.seed = 99;
  const auto back = TrainConfig::from_json(tc.to_json());
  EXPECT_EQ(back.to_json(), tc.to_json());
}

namespace {

// a -> b -> end as the argmax chain over {<eos>, <unk>, a, b}.
std::vector<double> chain(std::span<const TokenId> prefix) {
  switch (prefix.back()) {
    case kEosId: return {0.1, 0.0, 0.6, 0.3};
    case 2: return {0.2, 0.0, 0.1, 0.7};
    default: return {0.5, 0.0, 0.3, 0.2};
  }
}

}  // namespace

TEST(Generate, GreedyFollowsArgmaxChain) {
  DecodingConfig dc;
  dc.mode = DecodeMode::kGreedy;
  const auto g = generate(chain, dc);
  Vocabulary v({"a", "b"});
  EXPECT_EQ(v.decode(g.tokens), "a b");
  EXPECT_TRUE(g.finished);
  EXPECT_NEAR(g.log_prob, std::log(0.6) + std::log(0.7) + std::log(0.5), 1e-12);
}

TEST(Generate, StopsAtMaxTokens) {
  DecodingConfig dc;
  dc.mode = DecodeMode::kGreedy;
  dc.max_tokens = 1;
  const auto g = generate(chain, dc);
  EXPECT_EQ(g.tokens, (std::vector<TokenId>{2}));
  EXPECT_FALSE(g.finished);
}

TEST(Generate, SameSeedSameOutput) {
  DecoderLM m(tiny(12), 4);
  NoBias none;
  for (auto mode : {DecodeMode::kSample, DecodeMode::kBeamSample}) {
    DecodingConfig dc;
    dc.mode = mode;
    dc.max_tokens = 10;
    dc.seed = 21;
    const auto a = generate(m, none, 1, dc);
    const auto b = generate(m, none, 1, dc);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.log_prob, b.log_prob);
  }
}

TEST(Generate, UnfilteredBeamOneIsAncestralSampling) {
  const std::vector<double> p{0.05, 0.0, 0.4, 0.25, 0.2, 0.1};
  auto next = [&](std::span<const TokenId>) { return p; };
  DecodingConfig dc;
  dc.mode = DecodeMode::kBeamSample;
  dc.beam = 1;
  dc.top_k = p.size();
  dc.top_p = 1.0;
  dc.max_tokens = 1;
  std::vector<double> counts(p.size(), 0.0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    dc.seed = static_cast<std::uint64_t>(i);
    const auto g = generate(next, dc);
    counts[g.tokens.empty() ? kEosId : g.tokens[0]] += 1.0;
  }
  double chi2 = 0.0;
  for (std::size_t w = 0; w < p.size(); ++w) {
    if (p[w] == 0.0) {
      EXPECT_EQ(counts[w], 0.0);
      continue;
    }
    const double e = p[w] * n;
    chi2 += (counts[w] - e) * (counts[w] - e) / e;
  }
  // 4 degrees of freedom; 13.277 is the 0.99 quantile.
  EXPECT_LT(chi2, 13.277);
}

TEST(Generate, TopKTopPFilter) {
  const std::vector<double> p{0.1, 0.4, 0.3, 0.2};
  auto f = filter_top_k_top_p(p, 3, 1.0);
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_NEAR(f[1], 0.4 / 0.9, 1e-15);
  f = filter_top_k_top_p(p, 4, 0.65);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[3], 0.0);
  EXPECT_NEAR(f[1], 0.4 / 0.7, 1e-15);
  EXPECT_NEAR(f[2], 0.3 / 0.7, 1e-15);
  // Ties go to the lower id.
  f = filter_top_k_top_p(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2, 1.0);
  EXPECT_EQ(f, (std::vector<double>{0.5, 0.5, 0.0, 0.0}));
}

TEST(Generate, ConfigValidation) {
  DecodingConfig dc;
  dc.beam = 0;
  EXPECT_THROW(dc.validate(), ConfigError);
  dc = DecodingConfig{};
  dc.top_p = 0.0;
  EXPECT_THROW(dc.validate(), ConfigError);
  dc = DecodingConfig{};
  dc.top_k = 0;
  EXPECT_THROW(dc.validate(), ConfigError);
  EXPECT_EQ(decode_mode_from_string("beam-sample"), DecodeMode::kBeamSample);
  EXPECT_THROW(decode_mode_from_string("nucleus"), ConfigError);
}
