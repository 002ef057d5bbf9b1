#include "futurelm/lm.hpp"

#include <cmath>

#include "futurelm/errors.hpp"

namespace flm {

void DecoderConfig::validate() const {
  if (vocab_size < kSpecialTokenCount + 1) throw ConfigError("decoder vocab_size must be >= 3");
  if (layers == 0 || heads == 0 || d_model == 0 || d_ff == 0) {
    throw ConfigError("decoder layers, heads, d_model and d_ff must be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
}

nlohmann::json DecoderConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"layers", layers},   {"heads", heads},
          {"d_model", d_model},       {"d_ff", d_ff},       {"max_len", max_len},
          {"dropout", dropout},       {"init_std", init_std}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.d_model = j.value("d_model", c.d_model);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.max_len = j.value("max_len", c.max_len);
  c.dropout = j.value("dropout", c.dropout);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double std, Rng& rng) {
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = std * rng.normal();
  return t;
}

}  // namespace

DecoderLM::DecoderLM(DecoderConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const auto d = config_.d_model;
  const double s = config_.init_std;
  const double resid = s / std::sqrt(2.0 * static_cast<double>(config_.layers));
  embedding_ = params_.add("tok_emb", gaussian(config_.vocab_size, d, s, rng));
  positions_ = params_.add("pos_emb", gaussian(config_.max_len, d, s / 2, rng));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    Layer layer{};
    layer.ln1_gain = params_.add(pre + "ln1.gain", Tensor(1, d, 1.0));
    layer.ln1_shift = params_.add(pre + "ln1.shift", Tensor(1, d));
    layer.qkv_w = params_.add(pre + "attn.qkv.w", gaussian(d, 3 * d, s, rng));
    // Query and value biases only: a key bias shifts every score in a row
    // equally and softmax cancels it.
    layer.qv_b = params_.add(pre + "attn.qv.b", Tensor(1, 2 * d));
    layer.proj_w = params_.add(pre + "attn.proj.w", gaussian(d, d, resid, rng));
    layer.proj_b = params_.add(pre + "attn.proj.b", Tensor(1, d));
    layer.ln2_gain = params_.add(pre + "ln2.gain", Tensor(1, d, 1.0));
    layer.ln2_shift = params_.add(pre + "ln2.shift", Tensor(1, d));
    layer.ff1_w = params_.add(pre + "ff1.w", gaussian(d, config_.d_ff, s, rng));
    layer.ff1_b = params_.add(pre + "ff1.b", Tensor(1, config_.d_ff));
    layer.ff2_w = params_.add(pre + "ff2.w", gaussian(config_.d_ff, d, resid, rng));
    layer.ff2_b = params_.add(pre + "ff2.b", Tensor(1, d));
    layers_.push_back(layer);
  }
  lnf_gain_ = params_.add("lnf.gain", Tensor(1, d, 1.0));
  lnf_shift_ = params_.add("lnf.shift", Tensor(1, d));
}

DecoderLM::Output DecoderLM::forward(Tape& tape, std::span<const TokenId> tokens,
                                     Rng* dropout_rng) const {
  using namespace ops;
  const std::size_t n = tokens.size();
  if (n == 0) throw ContractError("forward() on an empty token sequence");
  if (n > config_.max_len) {
    throw ContractError("sequence of length " + std::to_string(n) + " exceeds max_len " +
                        std::to_string(config_.max_len));
  }
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size) {
      throw ContractError("token id " + std::to_string(t) + " outside vocabulary of size " +
                          std::to_string(config_.vocab_size));
    }
  }
  const double rate = config_.dropout;
  const std::size_t d = config_.d_model;
  const std::size_t hd = d / config_.heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Var E = p(tape, embedding_);
  Var x = add(ops::embedding(E, tokens), slice_rows(p(tape, positions_), 0, n));
  x = dropout(x, rate, dropout_rng);
  for (const auto& L : layers_) {
    Var h = layer_norm(x, p(tape, L.ln1_gain), p(tape, L.ln1_shift));
    Var qv_b = p(tape, L.qv_b);
    Var qkv_b = concat_cols({slice_cols(qv_b, 0, d), tape.constant(Tensor(1, d)), slice_cols(qv_b, d, d)});
    Var qkv = add_rowvec(matmul(h, p(tape, L.qkv_w)), qkv_b);
    std::vector<Var> heads;
    heads.reserve(config_.heads);
    for (std::size_t i = 0; i < config_.heads; ++i) {
      Var q = slice_cols(qkv, i * hd, hd);
      Var k = slice_cols(qkv, d + i * hd, hd);
      Var v = slice_cols(qkv, 2 * d + i * hd, hd);
      Var att = causal_softmax(scale(matmul_nt(q, k), att_scale));
      heads.push_back(matmul(att, v));
    }
    Var merged = heads.size() == 1 ? heads[0] : concat_cols(heads);
    Var proj = add_rowvec(matmul(merged, p(tape, L.proj_w)), p(tape, L.proj_b));
    x = add(x, dropout(proj, rate, dropout_rng));
    Var m = layer_norm(x, p(tape, L.ln2_gain), p(tape, L.ln2_shift));
    Var f = gelu(add_rowvec(matmul(m, p(tape, L.ff1_w)), p(tape, L.ff1_b)));
    f = add_rowvec(matmul(f, p(tape, L.ff2_w)), p(tape, L.ff2_b));
    x = add(x, dropout(f, rate, dropout_rng));
  }
  Var H = layer_norm(x, p(tape, lnf_gain_), p(tape, lnf_shift_));
  return {E, H, matmul_nt(H, E)};
}

Var YearBias::apply(Var logits, Var hidden) const {
  Var out = logits;
  const std::size_t vocab = logits.cols();
  if (row) {
    if (row->rows() != 1 || row->cols() != vocab) {
      throw ContractError("bias provider returned a bias of shape " + row->value().shape_string() +
                          " for a vocabulary of " + std::to_string(vocab));
    }
    out = ops::add_rowvec(out, *row);
  }
  if (per_position) {
    Var b = per_position(hidden);
    if (b.rows() != logits.rows() || b.cols() != vocab) {
      throw ContractError("bias provider returned a per-position bias of shape " +
                          b.value().shape_string() + " for logits " + logits.value().shape_string());
    }
    out = ops::add(out, b);
  }
  return out;
}

YearBias StaticBiasProvider::prepare(Tape& tape, Var, int year) const {
  auto it = by_year_.find(year);
  if (it == by_year_.end()) return {};
  return {tape.constant(Tensor::row(it->second)), {}};
}

YearBias SumBiasProvider::prepare(Tape& tape, Var embedding, int year) const {
  YearBias a = a_.prepare(tape, embedding, year);
  YearBias b = b_.prepare(tape, embedding, year);
  YearBias out;
  if (a.row && b.row) {
    out.row = ops::add(*a.row, *b.row);
  } else {
    out.row = a.row ? a.row : b.row;
  }
  if (a.per_position && b.per_position) {
    out.per_position = [pa = a.per_position, pb = b.per_position](Var h) {
      return ops::add(pa(h), pb(h));
    };
  } else {
    out.per_position = a.per_position ? a.per_position : b.per_position;
  }
  return out;
}

std::vector<ParameterSet*> SumBiasProvider::trainable() {
  auto out = a_.trainable();
  for (auto* p : b_.trainable()) out.push_back(p);
  return out;
}

Sequence make_sequence(std::span<const TokenId> doc, std::size_t max_len) {
  Sequence s;
  const std::size_t keep = std::min(doc.size(), max_len - 1);
  s.inputs.reserve(keep + 1);
  s.inputs.push_back(kEosId);
  s.inputs.insert(s.inputs.end(), doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(keep));
  s.targets.assign(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(keep));
  if (keep == doc.size()) {
    s.targets.push_back(kEosId);
  } else {
    s.targets.push_back(doc[keep]);
  }
  return s;
}

Var biased_logits(Tape& tape, const DecoderLM& model, const BiasProvider& provider, int year,
                  std::span<const TokenId> inputs, Rng* dropout_rng) {
  auto out = model.forward(tape, inputs, dropout_rng);
  YearBias bias = provider.prepare(tape, out.embedding, year);
  if (bias.is_zero()) return out.logits;
  return bias.apply(out.logits, out.hidden);
}

std::vector<double> next_token_dist(const DecoderLM& model, std::span<const TokenId> prefix,
                                    const BiasProvider& provider, int year) {
  if (prefix.empty()) throw ContractError("next_token_dist needs a non-empty prefix");
  Tape tape(false);
  Var logits = biased_logits(tape, model, provider, year, prefix);
  return ops::softmax(logits.value().row_span(logits.rows() - 1));
}

std::vector<double> target_log_probs(const DecoderLM& model, const BiasProvider& provider, int year,
                                     const Sequence& seq) {
  Tape tape(false);
  Var logits = biased_logits(tape, model, provider, year, seq.inputs);
  std::vector<double> out;
  out.reserve(seq.targets.size());
  for (std::size_t r = 0; r < seq.targets.size(); ++r) {
    out.push_back(ops::log_softmax(logits.value().row_span(r))[seq.targets[r]]);
  }
  return out;
}

std::vector<ScoredDocument> score_corpus(const DecoderLM& model, const BiasProvider& provider,
                                         const TemporalCorpus& corpus) {
  if (!corpus.tokenized()) throw ContractError("scoring needs a tokenized corpus");
  if (corpus.vocabulary().size() != model.config().vocab_size) {
    throw ContractError("corpus vocabulary size " + std::to_string(corpus.vocabulary().size()) +
                        " does not match the model's " + std::to_string(model.config().vocab_size));
  }
  std::vector<ScoredDocument> out;
  for (int year : corpus.years()) {
    for (const auto& doc : corpus.docs(year)) {
      Sequence seq = make_sequence(doc.tokens, model.config().max_len);
      ScoredDocument s{year, seq.targets, target_log_probs(model, provider, year, seq)};
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace flm
