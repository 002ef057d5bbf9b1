#include "futurelm/temporal.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "futurelm/errors.hpp"

namespace flm {

namespace {

Tensor uniform_init(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_init(std::size_t rows, std::size_t cols, double std, Rng& rng) {
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = std * rng.normal();
  return t;
}

}  // namespace

Lstm::Lstm(ParameterSet& params, const std::string& prefix, std::size_t input, std::size_t hidden,
           Rng& rng)
    : input_(input), hidden_(hidden) {
  if (input == 0 || hidden == 0) throw ConfigError("LSTM sizes must be positive");
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  wx_ = params.add(prefix + ".wx", uniform_init(input, 4 * hidden, k, rng));
  wh_ = params.add(prefix + ".wh", uniform_init(hidden, 4 * hidden, k, rng));
  b_ = params.add(prefix + ".b", uniform_init(1, 4 * hidden, k, rng));
}

Var Lstm::run(Tape& tape, const ParameterSet& params, const std::vector<Var>& steps) const {
  using namespace ops;
  if (steps.empty()) throw ContractError("LSTM run over zero steps");
  const std::size_t batch = steps.front().rows();
  const std::size_t h = hidden_;
  Var wx = tape.param(params[wx_]);
  Var wh = tape.param(params[wh_]);
  Var b = tape.param(params[b_]);
  Var hs = tape.constant(Tensor(batch, h));
  Var cs = tape.constant(Tensor(batch, h));
  for (const Var& x : steps) {
    if (x.cols() != input_ || x.rows() != batch) {
      throw DimensionError("LSTM step input " + x.value().shape_string() + " does not match [" +
                           std::to_string(batch) + "x" + std::to_string(input_) + "]");
    }
    Var z = add_rowvec(add(matmul(x, wx), matmul(hs, wh)), b);
    Var i = sigmoid(slice_cols(z, 0, h));
    Var f = sigmoid(slice_cols(z, h, h));
    Var g = tanh(slice_cols(z, 2 * h, h));
    Var o = sigmoid(slice_cols(z, 3 * h, h));
    cs = add(mul(f, cs), mul(i, g));
    hs = mul(o, tanh(cs));
  }
  return hs;
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kNone:
      return "none";
    case HeadKind::kFrequency:
      return "frequency";
    case HeadKind::kContextual:
      return "contextual";
    case HeadKind::kGated:
      return "gated";
  }
  return "?";
}

HeadKind head_kind_from_string(std::string_view name) {
  if (name == "none") return HeadKind::kNone;
  if (name == "frequency") return HeadKind::kFrequency;
  if (name == "contextual") return HeadKind::kContextual;
  if (name == "gated") return HeadKind::kGated;
  throw ConfigError("unknown head type '" + std::string(name) + "'");
}

void HeadConfig::validate() const {
  if (window < 1) throw ConfigError("window must be >= 1");
  if (frequency_hidden < 1) throw ConfigError("frequency_hidden must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
}

nlohmann::json HeadConfig::to_json() const {
  return {{"kind", to_string(kind)},   {"window", window},         {"frequency_hidden", frequency_hidden},
          {"alpha", alpha},            {"learn_alpha", learn_alpha}, {"zero_fallback", zero_fallback},
          {"combine_frequency", combine_frequency}, {"seed", seed}};
}

HeadConfig HeadConfig::from_json(const nlohmann::json& j) {
  HeadConfig c;
  if (j.contains("kind")) c.kind = head_kind_from_string(j.at("kind").get<std::string>());
  c.window = j.value("window", c.window);
  c.frequency_hidden = j.value("frequency_hidden", c.frequency_hidden);
  c.alpha = j.value("alpha", c.alpha);
  c.learn_alpha = j.value("learn_alpha", c.learn_alpha);
  c.zero_fallback = j.value("zero_fallback", c.zero_fallback);
  c.combine_frequency = j.value("combine_frequency", c.combine_frequency);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::vector<int> history_years(int year, std::size_t window) {
  std::vector<int> out;
  for (std::size_t k = window; k >= 1; --k) out.push_back(year - static_cast<int>(k));
  return out;
}

// ---- frequency head

FrequencyHead::FrequencyHead(std::size_t window, std::size_t hidden, std::uint64_t seed, bool zero_fallback)
    : window_(window), zero_fallback_(zero_fallback) {
  if (window < 1) throw ConfigError("window must be >= 1");
  Rng rng(seed);
  lstm_ = Lstm(params_, "freq.lstm", 1, hidden, rng);
  a_ = params_.add("freq.A", uniform_init(hidden, 1, 1.0 / std::sqrt(static_cast<double>(hidden)), rng));
}

bool FrequencyHead::has_history(const FrequencyTable& freq, int year) const {
  for (int y : history_years(year, window_)) {
    if (!freq.has_year(y)) return false;
  }
  return true;
}

std::optional<Var> FrequencyHead::bias(Tape& tape, const FrequencyTable& freq, int year) const {
  if (!has_history(freq, year)) {
    if (zero_fallback_) return std::nullopt;
    throw HistoryError("frequency bias for year " + std::to_string(year) + " needs years " +
                       std::to_string(year - static_cast<int>(window_)) + ".." +
                       std::to_string(year - 1));
  }
  const std::size_t vocab = freq.vocab_size();
  std::vector<Var> steps;
  for (int y : history_years(year, window_)) {
    Tensor x(vocab, 1);
    const auto counts = freq.year_counts(y);
    for (std::size_t w = 0; w < vocab; ++w) x[w] = std::log1p(static_cast<double>(counts[w]));
    steps.push_back(tape.constant(std::move(x)));
  }
  Var h = lstm_.run(tape, params_, steps);
  return ops::transpose(ops::matmul(h, tape.param(params_[a_])));
}

std::vector<double> FrequencyHead::bias_values(const FrequencyTable& freq, int year) const {
  Tape tape(false);
  auto b = bias(tape, freq, year);
  if (!b) return std::vector<double>(freq.vocab_size(), 0.0);
  auto v = b->value().values();
  return {v.begin(), v.end()};
}

// ---- year embeddings

YearWordEmbeddings::YearWordEmbeddings(std::size_t vocab_size, std::size_t dim)
    : vocab_size_(vocab_size), dim_(dim) {}

std::vector<int> YearWordEmbeddings::years() const {
  std::vector<int> out;
  for (const auto& [y, _] : years_) out.push_back(y);
  return out;
}

void YearWordEmbeddings::set_year(int year, Tensor vectors, std::vector<std::uint64_t> counts) {
  if (vectors.rows() != vocab_size_ || vectors.cols() != dim_) {
    throw DimensionError("year vectors " + vectors.shape_string() + " do not match [" +
                         std::to_string(vocab_size_) + "x" + std::to_string(dim_) + "]");
  }
  if (counts.size() != vocab_size_) throw DimensionError("year counts do not match the vocabulary");
  if (!vectors.all_finite()) throw ContractError("non-finite year embedding for year " + std::to_string(year));
  for (std::size_t w = 0; w < vocab_size_; ++w) {
    if (counts[w] != 0) continue;
    for (double v : vectors.row_span(w)) {
      if (v != 0.0) {
        throw ContractError("year " + std::to_string(year) + ": word " + std::to_string(w) +
                            " has count 0 but a non-zero vector");
      }
    }
  }
  years_[year] = Year{std::move(vectors), std::move(counts)};
}

const YearWordEmbeddings::Year& YearWordEmbeddings::year_data(int year) const {
  auto it = years_.find(year);
  if (it == years_.end()) throw ContractError("no year embeddings for year " + std::to_string(year));
  return it->second;
}

const Tensor& YearWordEmbeddings::vectors(int year) const { return year_data(year).vectors; }

std::uint64_t YearWordEmbeddings::count(int year, TokenId w) const {
  auto it = years_.find(year);
  if (it == years_.end()) return 0;
  return it->second.counts.at(static_cast<std::size_t>(w));
}

std::optional<std::span<const double>> YearWordEmbeddings::vector(int year, TokenId w) const {
  if (count(year, w) == 0) return std::nullopt;
  return year_data(year).vectors.row_span(static_cast<std::size_t>(w));
}

namespace {

constexpr char kYembMagic[8] = {'F', 'L', 'M', 'Y', 'E', 'M', 'B', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError("truncated year-embeddings file " + path.string());
  }
  return v;
}

}  // namespace

void write_year_embeddings(const std::filesystem::path& path, const YearWordEmbeddings& emb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kYembMagic, sizeof(kYembMagic));
  put<std::uint32_t>(out, kYearEmbeddingsVersion);
  const std::string meta = emb.metadata.dump();
  put<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(out, emb.vocab_size());
  put<std::uint64_t>(out, emb.dim());
  const auto years = emb.years();
  put<std::uint64_t>(out, years.size());
  for (int y : years) {
    put<std::int32_t>(out, y);
    for (std::size_t w = 0; w < emb.vocab_size(); ++w) put<std::uint64_t>(out, emb.count(y, static_cast<TokenId>(w)));
    const auto& v = emb.vectors(y);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

YearWordEmbeddings read_year_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kYembMagic, sizeof(magic)) != 0) {
    throw ContractError(path.string() + " is not a year-embeddings file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kYearEmbeddingsVersion) {
    throw ContractError("year-embeddings version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kYearEmbeddingsVersion) + ")");
  }
  std::string meta(get<std::uint64_t>(in, path), '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta.size()))) throw IoError("truncated " + path.string());
  const auto vocab = get<std::uint64_t>(in, path);
  const auto dim = get<std::uint64_t>(in, path);
  YearWordEmbeddings emb(vocab, dim);
  emb.metadata = nlohmann::json::parse(meta);
  const auto n_years = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < n_years; ++i) {
    const auto year = get<std::int32_t>(in, path);
    std::vector<std::uint64_t> counts(vocab);
    for (auto& c : counts) c = get<std::uint64_t>(in, path);
    Tensor v(vocab, dim);
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)))) {
      throw IoError("truncated " + path.string());
    }
    emb.set_year(year, std::move(v), std::move(counts));
  }
  return emb;
}

const DecoderLM& SnapshotEncoders::encoder(int year, const TemporalCorpus&) {
  if (every_year_ != nullptr) return *every_year_;
  auto it = by_year_.find(year);
  if (it == by_year_.end() || it->second == nullptr) {
    throw ContractError("no encoder snapshot for year " + std::to_string(year));
  }
  return *it->second;
}

FineTunedEncoders::FineTunedEncoders(DecoderConfig config, std::uint64_t init_seed, TrainConfig train_config)
    : config_(config), init_seed_(init_seed), train_config_(train_config) {
  config_.validate();
  train_config_.validate();
}

const DecoderLM& FineTunedEncoders::encoder(int year, const TemporalCorpus& year_slice) {
  auto& slot = built_[year];
  if (!slot) {
    auto model = std::make_unique<DecoderLM>(config_, init_seed_);
    TrainConfig tc = train_config_;
    tc.seed = derive_seed(train_config_.seed, static_cast<std::uint64_t>(year));
    tc.year_window = 0;
    NoBias none;
    train(*model, none, year_slice, TemporalCorpus{}, tc);
    slot = std::move(model);
  }
  return *slot;
}

ChainedEncoders::ChainedEncoders(DecoderConfig config, std::uint64_t init_seed, TrainConfig train_config,
                                 const TemporalCorpus& corpus)
    : config_(config), init_seed_(init_seed), train_config_(train_config), corpus_(corpus) {
  config_.validate();
  train_config_.validate();
}

const DecoderLM& ChainedEncoders::encoder(int year, const TemporalCorpus&) {
  if (auto it = built_.find(year); it != built_.end()) return *it->second;
  if (!corpus_.has_year(year)) throw ContractError("no documents to build an encoder for year " + std::to_string(year));
  std::unique_ptr<DecoderLM> model;
  int from = std::numeric_limits<int>::min();
  if (auto it = built_.lower_bound(year); it != built_.begin()) {
    --it;
    from = it->first;
    model = std::make_unique<DecoderLM>(*it->second);
  } else {
    model = std::make_unique<DecoderLM>(config_, init_seed_);
  }
  for (int y : corpus_.years()) {
    if (y <= from || y > year) continue;
    TrainConfig tc = train_config_;
    tc.seed = derive_seed(train_config_.seed, static_cast<std::uint64_t>(y));
    tc.year_window = 0;
    NoBias none;
    train(*model, none, corpus_.subset({y}), TemporalCorpus{}, tc);
    built_[y] = std::make_unique<DecoderLM>(*model);
  }
  return *built_.at(year);
}

YearWordEmbeddings build_year_embeddings(const TemporalCorpus& corpus, EncoderSource& source,
                                         const std::vector<int>& years) {
  if (!corpus.tokenized()) throw ContractError("year embeddings need a tokenized corpus");
  const std::size_t vocab = corpus.vocabulary().size();
  std::optional<YearWordEmbeddings> out;
  for (int year : years) {
    const auto& docs = corpus.docs(year);
    if (docs.empty()) continue;
    const DecoderLM& enc = source.encoder(year, corpus.subset({year}));
    if (enc.config().vocab_size != vocab) {
      throw ContractError("encoder vocabulary size " + std::to_string(enc.config().vocab_size) +
                          " does not match the corpus's " + std::to_string(vocab));
    }
    const std::size_t d = enc.config().d_model;
    if (!out) out.emplace(vocab, d);
    if (out->dim() != d) throw DimensionError("encoders of different dimensions");
    Tensor sums(vocab, d);
    std::vector<std::uint64_t> counts(vocab, 0);
    for (const auto& doc : docs) {
      const Sequence seq = make_sequence(doc.tokens, enc.config().max_len);
      Tape tape(false);
      const Tensor& H = enc.forward(tape, seq.inputs).hidden.value();
      for (std::size_t k = 0; k < seq.inputs.size(); ++k) {
        const auto w = static_cast<std::size_t>(seq.inputs[k]);
        ++counts[w];
        auto dst = sums.row_span(w);
        auto src = H.row_span(k);
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    }
    for (std::size_t w = 0; w < vocab; ++w) {
      if (counts[w] == 0) continue;
      for (auto& v : sums.row_span(w)) v /= static_cast<double>(counts[w]);
    }
    out->set_year(year, std::move(sums), std::move(counts));
  }
  if (!out) throw ContractError("no documents in the requested years for year embeddings");
  return std::move(*out);
}

// ---- contextual head

ContextualHead::ContextualHead(std::size_t dim, std::size_t window, std::uint64_t seed, bool zero_fallback,
                               const std::string& prefix, bool projection)
    : window_(window), zero_fallback_(zero_fallback) {
  if (window < 1) throw ConfigError("window must be >= 1");
  Rng rng(seed);
  lstm_ = Lstm(params_, prefix + ".lstm", dim, dim, rng);
  if (projection) {
    a_ = params_.add(prefix + ".A", uniform_init(dim, 1, 1.0 / std::sqrt(static_cast<double>(dim)), rng));
  }
}

bool ContextualHead::has_history(const YearWordEmbeddings& emb, int year) const {
  for (int y : history_years(year, window_)) {
    if (!emb.has_year(y)) return false;
  }
  return true;
}

std::optional<Var> ContextualHead::final_hidden(Tape& tape, const YearWordEmbeddings& emb, int year) const {
  if (emb.dim() != dim()) {
    throw DimensionError("year embeddings of dimension " + std::to_string(emb.dim()) +
                         " fed to a head of dimension " + std::to_string(dim()));
  }
  if (!has_history(emb, year)) {
    if (zero_fallback_) return std::nullopt;
    throw HistoryError("contextual bias for year " + std::to_string(year) + " needs embeddings for years " +
                       std::to_string(year - static_cast<int>(window_)) + ".." + std::to_string(year - 1));
  }
  std::vector<Var> steps;
  for (int y : history_years(year, window_)) steps.push_back(tape.constant(emb.vectors(y)));
  return lstm_.run(tape, params_, steps);
}

std::optional<Var> ContextualHead::bias(Tape& tape, const YearWordEmbeddings& emb, int year) const {
  if (!a_) throw ContractError("this contextual head has no output projection");
  auto h = final_hidden(tape, emb, year);
  if (!h) return std::nullopt;
  return ops::transpose(ops::matmul(*h, tape.param(params_[*a_])));
}

std::vector<double> ContextualHead::bias_values(const YearWordEmbeddings& emb, int year) const {
  Tape tape(false);
  auto b = bias(tape, emb, year);
  if (!b) return std::vector<double>(emb.vocab_size(), 0.0);
  auto v = b->value().values();
  return {v.begin(), v.end()};
}

// ---- gated head

Var gated_bias(Var E, Var h, Var H, Var A, Var C, Var D, Var alpha) {
  using namespace ops;
  Var s = rowwise_dot(E, h);                            // [V,1]
  Var g = matmul(H, matmul(C, A));                      // [n,1]
  Var gate = sigmoid(matmul_nt(g, s));                  // [n,V]
  Var value = transpose(mul(s, matmul(E, matmul(D, A))));  // [1,V]
  return mul_scalar(mul_rowvec(gate, value), alpha);
}

GatedHead::GatedHead(std::size_t dim, std::size_t window, double alpha, bool learn_alpha, std::uint64_t seed,
                     bool zero_fallback)
    : trajectory_(dim, window, derive_seed(seed, 1), zero_fallback, "gated.ctx", false),
      learn_alpha_(learn_alpha),
      fixed_alpha_(alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("gate scale alpha must be finite and >= 0");
  Rng rng(derive_seed(seed, 2));
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  a_ = params_.add("gated.A", normal_init(dim, 1, s, rng));
  c_ = params_.add("gated.C", normal_init(dim, dim, s, rng));
  d_ = params_.add("gated.D", normal_init(dim, dim, s, rng));
  if (learn_alpha_) alpha_ = params_.add("gated.alpha", Tensor::scalar(alpha));
}

double GatedHead::alpha() const { return learn_alpha_ ? params_[alpha_].value.item() : fixed_alpha_; }

void GatedHead::set_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("gate scale alpha must be finite and >= 0");
  if (learn_alpha_) {
    params_[alpha_].value = Tensor::scalar(alpha);
  } else {
    fixed_alpha_ = alpha;
  }
}

Var GatedHead::alpha_var(Tape& tape) const {
  return learn_alpha_ ? tape.param(params_[alpha_]) : tape.constant(Tensor::scalar(fixed_alpha_));
}

// ---- providers

namespace {

// Looks up or fills a per-year cache on gradient-free tapes; computes
// directly (and differentiably) otherwise.
template <typename Compute>
std::optional<Var> cached(Tape& tape, std::mutex& mutex, std::map<int, std::optional<Tensor>>& cache, int year,
                          Compute compute) {
  if (tape.grad_enabled()) return compute(tape);
  std::lock_guard lock(mutex);
  auto it = cache.find(year);
  if (it == cache.end()) {
    Tape scratch(false);
    auto v = compute(scratch);
    it = cache.emplace(year, v ? std::optional<Tensor>(v->value()) : std::nullopt).first;
  }
  if (!it->second) return std::nullopt;
  return tape.constant(*it->second);
}

}  // namespace

YearBias FrequencyBiasProvider::prepare(Tape& tape, Var, int year) const {
  auto row = cached(tape, mutex_, cache_, year, [&](Tape& t) { return head_.bias(t, freq_, year); });
  YearBias out;
  out.row = row;
  return out;
}

void FrequencyBiasProvider::invalidate() const {
  std::lock_guard lock(mutex_);
  cache_.clear();
}

YearBias ContextualBiasProvider::prepare(Tape& tape, Var, int year) const {
  auto row = cached(tape, mutex_, cache_, year, [&](Tape& t) { return head_.bias(t, emb_, year); });
  YearBias out;
  out.row = row;
  return out;
}

void ContextualBiasProvider::invalidate() const {
  std::lock_guard lock(mutex_);
  cache_.clear();
}

YearBias GatedBiasProvider::prepare(Tape& tape, Var embedding, int year) const {
  auto h = cached(tape, mutex_, cache_, year,
                  [&](Tape& t) { return head_.trajectory().final_hidden(t, emb_, year); });
  YearBias out;
  if (!h) return out;
  Var A = head_.A(tape);
  Var C = head_.C(tape);
  Var D = head_.D(tape);
  Var alpha = head_.alpha_var(tape);
  out.per_position = [=](Var H) { return gated_bias(embedding, *h, H, A, C, D, alpha); };
  return out;
}

void GatedBiasProvider::invalidate() const {
  std::lock_guard lock(mutex_);
  cache_.clear();
}

namespace {

void check_vocab(std::size_t head_vocab, const DecoderLM& model, const char* what) {
  if (head_vocab != model.config().vocab_size) {
    throw ContractError(std::string(what) + " covers " + std::to_string(head_vocab) +
                        " words but the model's vocabulary has " + std::to_string(model.config().vocab_size));
  }
}

void check_dim(std::size_t head_dim, std::size_t emb_dim, const DecoderLM& model) {
  if (head_dim != model.config().d_model || emb_dim != model.config().d_model) {
    throw DimensionError("head dimension " + std::to_string(head_dim) + " and embedding dimension " +
                         std::to_string(emb_dim) + " must equal the model dimension " +
                         std::to_string(model.config().d_model));
  }
}

}  // namespace

std::unique_ptr<BiasProvider> attach(FrequencyHead& head, const FrequencyTable& freq, const DecoderLM& model) {
  check_vocab(freq.vocab_size(), model, "frequency table");
  return std::make_unique<FrequencyBiasProvider>(head, freq);
}

std::unique_ptr<BiasProvider> attach(ContextualHead& head, const YearWordEmbeddings& emb, const DecoderLM& model) {
  check_vocab(emb.vocab_size(), model, "year embeddings");
  if (head.dim() != emb.dim()) {
    throw DimensionError("contextual head of dimension " + std::to_string(head.dim()) +
                         " and year embeddings of dimension " + std::to_string(emb.dim()));
  }
  return std::make_unique<ContextualBiasProvider>(head, emb);
}

std::unique_ptr<BiasProvider> attach(GatedHead& head, const YearWordEmbeddings& emb, const DecoderLM& model) {
  check_vocab(emb.vocab_size(), model, "year embeddings");
  check_dim(head.dim(), emb.dim(), model);
  return std::make_unique<GatedBiasProvider>(head, emb);
}

void write_bias_csv(const std::filesystem::path& path, const Vocabulary& vocab, std::span<const double> bias,
                    const std::string& comment) {
  if (bias.size() != vocab.size()) {
    throw DimensionError("bias of length " + std::to_string(bias.size()) + " for a vocabulary of " +
                         std::to_string(vocab.size()));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "word,bias\n";
  for (std::size_t w = 0; w < bias.size(); ++w) {
    out << csv_field(vocab.word(static_cast<TokenId>(w))) << ',' << bias[w] << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace flm
