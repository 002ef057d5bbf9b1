#include "futurelm/pipeline.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "futurelm/checkpoint.hpp"
#include "futurelm/errors.hpp"
#include "futurelm/generate.hpp"
#include "futurelm/metrics.hpp"
#include "futurelm/synth.hpp"
#include "futurelm/train.hpp"

namespace flm::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kArtifactVersion = 1;

json section(const json& config, const char* name) {
  if (!config.contains(name) || config.at(name).is_null()) return json::object();
  const auto& s = config.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  return s;
}

std::uint64_t seed_of(const json& config) {
  const bool ok = config.contains("seed") && config.at("seed").is_number_integer() &&
                  (config.at("seed").is_number_unsigned() || config.at("seed").get<std::int64_t>() >= 0);
  if (!ok) {
    throw ConfigError("a non-negative integer seed is required (config \"seed\" or --seed)");
  }
  return config.at("seed").get<std::uint64_t>();
}

fs::path path_of(const json& config, const char* key) {
  if (!config.contains(key) || !config.at(key).is_string()) {
    throw ConfigError(std::string("config needs a path \"") + key + "\"");
  }
  return config.at(key).get<std::string>();
}

std::optional<fs::path> optional_path(const json& config, const char* key) {
  if (!config.contains(key) || config.at(key).is_null()) return std::nullopt;
  return path_of(config, key);
}

json header(const char* format, const std::string& digest) {
  return {{"format", format}, {"version", kArtifactVersion}, {"config_digest", digest}};
}

void check_header(const json& meta, const char* format, const fs::path& path) {
  if (meta.value("format", "") != format) {
    throw ContractError(path.string() + " is not a " + format + " artifact");
  }
  if (meta.value("version", -1) != kArtifactVersion) {
    throw ContractError(path.string() + " has " + format + " version " + meta.value("version", json(nullptr)).dump() +
                        ", expected " + std::to_string(kArtifactVersion));
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ContractError(path.string() + " is not valid JSON: " + e.what());
  }
}

// The config with every input path replaced by the digest of what it names,
// so that the same inputs give the same digest wherever they live.
std::string provenance_digest(json config, const std::vector<std::pair<std::string, std::string>>& inputs) {
  for (const auto& [key, digest] : inputs) {
    json* node = &config;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> keys;
    while (std::getline(parts, part, '.')) keys.push_back(part);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) node = &(*node)[keys[i]];
    (*node)[keys.back()] = "sha256:" + digest;
  }
  return sha256_hex(config.dump());
}

void prepare_out(const fs::path& out, const json& config, const std::string& digest) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  json resolved = config;
  resolved["config_digest"] = digest;
  write_json(out / "resolved_config.json", resolved);
}

void warn_all(std::ostream& msg, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) msg << "warning: " << w << '\n';
}

DecoderConfig model_config(const json& config, std::size_t vocab_size) {
  DecoderConfig c = DecoderConfig::from_json(section(config, "model"));
  c.vocab_size = vocab_size;
  c.validate();
  return c;
}

DecodingConfig decoding_config(const json& j, std::uint64_t seed) {
  DecodingConfig c = DecodingConfig::from_json(j);
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace

json resolve_config(const std::optional<fs::path>& config_path, std::optional<std::uint64_t> seed,
                    const std::vector<std::string>& overrides) {
  json config = config_path ? read_json(*config_path) : json::object();
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    json* node = &config;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> keys;
    while (std::getline(parts, part, '.')) keys.push_back(part);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      node = &(*node)[keys[i]];
      if (!node->is_object()) *node = json::object();
    }
    (*node)[keys.back()] = value;
  }
  if (seed) config["seed"] = *seed;
  seed_of(config);
  return config;
}

// ---- datasets

Dataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "dataset.json";
  Dataset d;
  d.meta = read_json(meta_path);
  check_header(d.meta, "futurelm-dataset", meta_path);
  d.digest = file_sha256(meta_path);
  const fs::path corpus_path = dir / d.meta.at("corpus_file").get<std::string>();
  if (file_sha256(corpus_path) != d.meta.at("corpus_digest").get<std::string>()) {
    throw ContractError(corpus_path.string() + " does not match the digest recorded in " + meta_path.string());
  }
  auto ingested = ingest_jsonl(corpus_path);
  auto vocab = std::make_shared<const Vocabulary>(d.meta.at("vocab").get<std::vector<std::string>>());
  if (vocab->digest() != d.meta.at("vocab_digest").get<std::string>()) {
    throw ContractError("vocabulary in " + meta_path.string() + " does not match its digest");
  }
  d.vocab = vocab;
  d.all = ingested.corpus.tokenized_with(vocab);
  d.train_years = d.meta.at("train_years").get<std::vector<int>>();
  d.dev_year = d.meta.at("dev_year").get<int>();
  d.test_year = d.meta.at("test_year").get<int>();
  d.train = d.all.subset({d.train_years.begin(), d.train_years.end()});
  d.dev = d.all.subset({d.dev_year});
  d.test = d.all.subset({d.test_year});
  d.stopwords = stopwords_from_words(*vocab, d.meta.at("stopwords").get<std::vector<std::string>>());
  if (d.meta.value("stopwords_include_eos", false)) d.stopwords.ids.insert(kEosId);
  d.freq = frequency_table(d.all);
  return d;
}

void cmd_synth(const json& config, const fs::path& out, std::ostream& msg) {
  DriftSpec spec = DriftSpec::from_json(section(config, "synth"));
  spec.seed = seed_of(config);
  const std::string digest = provenance_digest(config, {});
  prepare_out(out, config, digest);
  const DriftCorpus dc = generate_drift_corpus(spec);
  json h = header("futurelm-corpus", digest);
  h["source"] = "synth";
  write_jsonl(out / "corpus.jsonl", dc.corpus, h);
  json labels = dc.labels.to_json();
  labels.update(header("futurelm-labels", digest));
  write_json(out / "labels.json", labels);
  std::ofstream sw(out / "stopwords.txt", std::ios::trunc);
  if (!sw) throw IoError("cannot write " + (out / "stopwords.txt").string());
  sw << "# futurelm-stopwords version " << kArtifactVersion << " config_digest " << digest << '\n';
  for (const auto& w : dc.function_words) sw << '+' << w << '\n';
  msg << "synth: " << dc.corpus.document_count() << " documents over " << spec.years << " years, "
      << dc.labels.rising.size() << " rising / " << dc.labels.falling.size() << " falling / "
      << dc.labels.stable.size() << " stable words\n";
}

void cmd_ingest(const json& config, const fs::path& out, std::ostream& msg) {
  const json ing = section(config, "ingest");
  const fs::path input = path_of(ing, "input");
  const std::string format = ing.value("format", "jsonl");
  const json sw = ing.value("stopwords", json::object());
  const auto override_file = optional_path(sw, "override");
  std::vector<std::pair<std::string, std::string>> inputs{{"ingest.input", file_sha256(input)}};
  if (override_file) inputs.emplace_back("ingest.stopwords.override", file_sha256(*override_file));
  const std::string digest = provenance_digest(config, inputs);

  IngestResult r;
  if (format == "jsonl") {
    r = ingest_jsonl(input, ing.value("year_field", "year"), ing.value("text_field", "text"));
  } else if (format == "bibtex") {
    r = ingest_bibtex(input);
  } else {
    throw ConfigError("unknown ingest format '" + format + "'");
  }
  warn_all(msg, r.report.warnings);
  if (!ing.contains("train_years") || !ing.contains("dev_year") || !ing.contains("test_year")) {
    throw ConfigError("ingest needs train_years, dev_year and test_year");
  }
  const auto train_years = ing.at("train_years").get<std::set<int>>();
  const int dev_year = ing.at("dev_year").get<int>();
  const int test_year = ing.at("test_year").get<int>();
  const json vj = ing.value("vocab", json::object());
  VocabOptions vo;
  vo.max_size = vj.value("max_size", vo.max_size);
  vo.min_count = vj.value("min_count", vo.min_count);
  YearSplit split = split_by_year(r.corpus, train_years, dev_year, test_year, vo);

  const std::string source = sw.value("source", override_file ? "merged" : "threshold");
  std::uint64_t threshold = sw.value("threshold", std::uint64_t{100});
  if (source == "file") {
    if (!override_file) throw ConfigError("stopword source 'file' needs an override file");
    threshold = std::numeric_limits<std::uint64_t>::max();
  } else if (source != "threshold" && source != "merged") {
    throw ConfigError("unknown stopword source '" + source + "'");
  }
  std::vector<std::string> warnings;
  StopwordList stop =
      curate_stopwords(frequency_table(split.train), *split.vocab, threshold, override_file, &warnings);
  warn_all(msg, warnings);
  std::vector<std::string> stop_words;
  for (TokenId id : stop.ids) stop_words.push_back(split.vocab->word(id));

  prepare_out(out, config, digest);
  std::set<int> kept(train_years);
  kept.insert(dev_year);
  kept.insert(test_year);
  json ch = header("futurelm-corpus", digest);
  ch["source"] = "ingest";
  write_jsonl(out / "corpus.jsonl", r.corpus.subset(kept), ch);

  const auto& words = split.vocab->words();
  json meta = header("futurelm-dataset", digest);
  meta["corpus_file"] = "corpus.jsonl";
  meta["corpus_digest"] = file_sha256(out / "corpus.jsonl");
  meta["vocab"] = std::vector<std::string>(words.begin() + kSpecialTokenCount, words.end());
  meta["vocab_digest"] = split.vocab->digest();
  meta["train_years"] = std::vector<int>(train_years.begin(), train_years.end());
  meta["dev_year"] = dev_year;
  meta["test_year"] = test_year;
  meta["stopwords"] = stop_words;
  meta["stopwords_include_eos"] = sw.value("include_eos", false);
  meta["stopword_source"] = source;
  meta["ingest"] = {{"accepted", r.report.accepted},
                    {"malformed", r.report.malformed},
                    {"missing_fields", r.report.missing_fields},
                    {"dropped_non_english", r.report.dropped_non_english}};
  write_json(out / "dataset.json", meta);
  msg << "ingest: " << r.report.accepted << " documents accepted, " << r.report.malformed << " malformed, "
      << r.report.missing_fields << " missing fields, " << r.report.dropped_non_english
      << " dropped as non-English; vocabulary " << split.vocab->size() << ", " << stop_words.size()
      << " stopwords\n";
}

// ---- models

std::unique_ptr<ModelBundle> make_bundle(const DecoderConfig& config, std::uint64_t seed, const HeadConfig& head,
                                         const Dataset& data, const std::optional<fs::path>& embeddings) {
  head.validate();
  auto b = std::unique_ptr<ModelBundle>(new ModelBundle{DecoderLM(config, seed), head, {}, {}, {}, {}, {}, {}, {},
                                                         json::object(), {}});
  const std::size_t d = config.d_model;
  const bool needs_embeddings = head.kind == HeadKind::kContextual || head.kind == HeadKind::kGated;
  if (needs_embeddings) {
    if (!embeddings) throw ConfigError("head '" + to_string(head.kind) + "' needs an \"embeddings\" file");
    b->embeddings = read_year_embeddings(*embeddings);
    b->embeddings_digest = file_sha256(*embeddings);
    check_header(b->embeddings->metadata, "futurelm-year-embeddings", *embeddings);
    if (b->embeddings->metadata.value("vocab_digest", "") != data.vocab->digest()) {
      throw ContractError("year embeddings " + embeddings->string() + " were built with a different vocabulary");
    }
  }
  switch (head.kind) {
    case HeadKind::kNone:
      b->provider = std::make_unique<NoBias>();
      break;
    case HeadKind::kFrequency:
      b->frequency = std::make_unique<FrequencyHead>(head.window, head.frequency_hidden, derive_seed(head.seed, 1),
                                                     head.zero_fallback);
      b->provider = attach(*b->frequency, data.freq, b->model);
      break;
    case HeadKind::kContextual:
      b->contextual = std::make_unique<ContextualHead>(d, head.window, derive_seed(head.seed, 2), head.zero_fallback);
      if (head.combine_frequency) {
        b->frequency = std::make_unique<FrequencyHead>(head.window, head.frequency_hidden,
                                                       derive_seed(head.seed, 1), head.zero_fallback);
        b->parts.push_back(attach(*b->frequency, data.freq, b->model));
        b->parts.push_back(attach(*b->contextual, *b->embeddings, b->model));
        b->provider = std::make_unique<SumBiasProvider>(*b->parts[0], *b->parts[1]);
      } else {
        b->provider = attach(*b->contextual, *b->embeddings, b->model);
      }
      break;
    case HeadKind::kGated:
      b->gated = std::make_unique<GatedHead>(d, head.window, head.alpha, head.learn_alpha, derive_seed(head.seed, 3),
                                             head.zero_fallback);
      b->provider = attach(*b->gated, *b->embeddings, b->model);
      break;
  }
  return b;
}

namespace {

std::vector<ParameterSet*> head_sets(ModelBundle& b) {
  std::vector<ParameterSet*> out;
  if (b.frequency) out.push_back(&b.frequency->params());
  if (b.contextual) out.push_back(&b.contextual->params());
  if (b.gated) {
    out.push_back(&b.gated->trajectory().params());
    out.push_back(&b.gated->params());
  }
  return out;
}

}  // namespace

std::unique_ptr<ModelBundle> load_bundle(const fs::path& checkpoint, const Dataset& data,
                                         const std::optional<fs::path>& embeddings) {
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  check_header(ckpt.metadata, "futurelm-checkpoint", checkpoint);
  if (ckpt.metadata.value("vocab_digest", "") != data.vocab->digest()) {
    throw ContractError("checkpoint " + checkpoint.string() + " was trained with a different vocabulary");
  }
  DecoderConfig cfg = DecoderConfig::from_json(ckpt.metadata.at("model"));
  HeadConfig head = HeadConfig::from_json(ckpt.metadata.at("head"));
  auto b = make_bundle(cfg, 0, head, data, embeddings);
  const std::string want = ckpt.metadata.value("embeddings_digest", "");
  if (!want.empty() && want != b->embeddings_digest) {
    throw ContractError("checkpoint " + checkpoint.string() + " was trained with different year embeddings");
  }
  ckpt.load_into(b->model.params(), "lm.");
  for (auto* set : head_sets(*b)) ckpt.load_into(*set);
  b->provider->invalidate();
  b->checkpoint_meta = ckpt.metadata;
  b->checkpoint_id = file_sha256(checkpoint);
  return b;
}

void cmd_train(const json& config, const fs::path& out, std::ostream& msg) {
  const std::uint64_t seed = seed_of(config);
  const fs::path dataset_dir = path_of(config, "dataset");
  const auto embeddings = optional_path(config, "embeddings");
  const Dataset data = load_dataset(dataset_dir);
  std::vector<std::pair<std::string, std::string>> inputs{{"dataset", data.digest}};
  if (embeddings) inputs.emplace_back("embeddings", file_sha256(*embeddings));
  const std::string digest = provenance_digest(config, inputs);

  const DecoderConfig mc = model_config(config, data.vocab->size());
  TrainConfig tc = TrainConfig::from_json(section(config, "train"));
  tc.seed = derive_seed(seed, 3);
  HeadConfig hc = HeadConfig::from_json(section(config, "head"));
  hc.seed = derive_seed(seed, 2);
  auto b = make_bundle(mc, derive_seed(seed, 1), hc, data, embeddings);

  prepare_out(out, config, digest);
  std::ofstream log(out / "train_log.jsonl", std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out / "train_log.jsonl").string());
  log << header("futurelm-train-log", digest).dump() << '\n';
  const TrainReport report = train(b->model, *b->provider, data.train, data.dev, tc, &log);

  Checkpoint ckpt;
  ckpt.metadata = header("futurelm-checkpoint", digest);
  ckpt.metadata["model"] = mc.to_json();
  ckpt.metadata["head"] = hc.to_json();
  ckpt.metadata["train"] = tc.to_json();
  ckpt.metadata["vocab_digest"] = data.vocab->digest();
  ckpt.metadata["dataset_digest"] = data.digest;
  if (!b->embeddings_digest.empty()) ckpt.metadata["embeddings_digest"] = b->embeddings_digest;
  json summary{{"total_steps", report.total_steps},
               {"years_used", report.years_used},
               {"documents_used", report.documents_used},
               {"best_epoch", report.best_epoch ? json(*report.best_epoch) : json(nullptr)},
               {"best_dev_ppl", report.best_dev_ppl ? json(*report.best_dev_ppl) : json(nullptr)}};
  ckpt.metadata["report"] = summary;
  ckpt.add_parameters(b->model.params(), "lm.");
  for (auto* set : head_sets(*b)) ckpt.add_parameters(*set);
  ckpt.optimizer = report.optimizer;
  write_checkpoint(out / "model.ckpt", ckpt);

  json rep = header("futurelm-train-report", digest);
  rep.update(summary);
  rep["checkpoint_id"] = file_sha256(out / "model.ckpt");
  rep["epochs"] = json::array();
  for (const auto& e : report.epochs) rep["epochs"].push_back(e.to_json());
  write_json(out / "train_report.json", rep);
  msg << "train: head " << to_string(hc.kind) << ", " << report.total_steps << " steps over years";
  for (int y : report.years_used) msg << ' ' << y;
  if (report.best_dev_ppl) msg << ", best dev PPL " << *report.best_dev_ppl << " at epoch " << *report.best_epoch;
  msg << '\n';
}

void cmd_build_embeddings(const json& config, const fs::path& out, std::ostream& msg) {
  const std::uint64_t seed = seed_of(config);
  const Dataset data = load_dataset(path_of(config, "dataset"));
  const std::string digest = provenance_digest(config, {{"dataset", data.digest}});
  const DecoderConfig mc = model_config(config, data.vocab->size());
  json ej = section(config, "encoder");
  const std::string mode = ej.value("mode", std::string("chained"));
  if (mode != "chained" && mode != "independent") {
    throw ConfigError("encoder.mode must be 'chained' or 'independent', got '" + mode + "'");
  }
  ej.erase("mode");
  if (!ej.contains("epochs")) ej["epochs"] = mode == "chained" ? 4 : 2;
  if (!ej.contains("patience")) ej["patience"] = 0;
  TrainConfig tc = TrainConfig::from_json(ej);
  tc.seed = derive_seed(seed, 5);
  std::vector<int> years;
  if (config.contains("years")) {
    years = config.at("years").get<std::vector<int>>();
  } else {
    for (int y : data.all.years()) {
      if (y < data.test_year) years.push_back(y);
    }
  }
  prepare_out(out, config, digest);
  std::unique_ptr<EncoderSource> source;
  if (mode == "chained") {
    source = std::make_unique<ChainedEncoders>(mc, derive_seed(seed, 4), tc, data.all);
  } else {
    source = std::make_unique<FineTunedEncoders>(mc, derive_seed(seed, 4), tc);
  }
  YearWordEmbeddings emb = build_year_embeddings(data.all, *source, years);
  emb.metadata = header("futurelm-year-embeddings", digest);
  emb.metadata["vocab_digest"] = data.vocab->digest();
  emb.metadata["dataset_digest"] = data.digest;
  emb.metadata["years"] = emb.years();
  emb.metadata["encoder_mode"] = mode;
  write_year_embeddings(out / "year_embeddings.bin", emb);
  msg << "build-embeddings: " << emb.years().size() << " years, dimension " << emb.dim() << '\n';
}

namespace {

const TemporalCorpus& split_of(const Dataset& data, const std::string& split) {
  if (split == "train") return data.train;
  if (split == "dev") return data.dev;
  if (split == "test") return data.test;
  throw ConfigError("unknown split '" + split + "'");
}

int split_year(const Dataset& data, const std::string& split) {
  if (split == "dev") return data.dev_year;
  if (split == "test") return data.test_year;
  throw ConfigError("generation needs a single-year split (dev or test), got '" + split + "'");
}

}  // namespace

void cmd_eval(const json& config, const fs::path& out, std::ostream& msg) {
  const std::uint64_t seed = seed_of(config);
  const Dataset data = load_dataset(path_of(config, "dataset"));
  const fs::path ckpt = path_of(config, "checkpoint");
  const auto embeddings = optional_path(config, "embeddings");
  const json ev = section(config, "eval");
  const auto cmp_ckpt = optional_path(ev, "compare_checkpoint");
  const auto cmp_emb = optional_path(ev, "compare_embeddings");
  std::vector<std::pair<std::string, std::string>> inputs{{"dataset", data.digest}, {"checkpoint", file_sha256(ckpt)}};
  if (embeddings) inputs.emplace_back("embeddings", file_sha256(*embeddings));
  if (cmp_ckpt) inputs.emplace_back("eval.compare_checkpoint", file_sha256(*cmp_ckpt));
  if (cmp_emb) inputs.emplace_back("eval.compare_embeddings", file_sha256(*cmp_emb));
  const std::string digest = provenance_digest(config, inputs);

  auto b = load_bundle(ckpt, data, embeddings);
  const std::string split = ev.value("split", "test");
  const TemporalCorpus& slice = split_of(data, split);
  const auto scored = score_corpus(b->model, *b->provider, slice);
  EvalReport report;
  const auto ppl = perplexity(scored);
  const auto cpl = content_perplexity(scored, data.stopwords);
  report.ppl = ppl.value;
  report.tokens = ppl.tokens;
  report.cpl = cpl.value;
  report.content_tokens = cpl.tokens;
  report.checkpoint_id = b->checkpoint_id;
  report.head = to_string(b->head.kind);
  report.years = slice.years();
  report.seed = seed;

  const std::size_t n_gen = ev.value("generations", std::size_t{100});
  if (n_gen > 0 && split != "train") {
    const DecodingConfig dc = decoding_config(ev.value("decoding", json::object()), seed);
    const auto gens = generate_many(b->model, *b->provider, split_year(data, split), n_gen, seed, dc);
    std::vector<std::vector<TokenId>> g, refs;
    for (const auto& x : gens) g.push_back(x.tokens);
    for (const auto& d : slice.docs(split_year(data, split))) refs.push_back(d.tokens);
    const auto cm = content_meteor_score(g, refs, data.stopwords);
    warn_all(msg, cm.warnings);
    report.cm = cm.cm;
    report.generations = n_gen;
    report.references = cm.references;
  }
  if (cmp_ckpt) {
    auto other = load_bundle(*cmp_ckpt, data, cmp_emb);
    const auto other_scored = score_corpus(other->model, *other->provider, slice);
    report.sign_test = sign_test(document_log_probs(scored), document_log_probs(other_scored));
  }
  prepare_out(out, config, digest);
  json j = header("futurelm-eval-report", digest);
  j.update(report.to_json());
  write_json(out / "eval_report.json", j);
  msg << report.table();
}

void cmd_generate(const json& config, const fs::path& out, std::ostream& msg) {
  const std::uint64_t seed = seed_of(config);
  const Dataset data = load_dataset(path_of(config, "dataset"));
  const fs::path ckpt = path_of(config, "checkpoint");
  const auto embeddings = optional_path(config, "embeddings");
  std::vector<std::pair<std::string, std::string>> inputs{{"dataset", data.digest}, {"checkpoint", file_sha256(ckpt)}};
  if (embeddings) inputs.emplace_back("embeddings", file_sha256(*embeddings));
  const std::string digest = provenance_digest(config, inputs);

  auto b = load_bundle(ckpt, data, embeddings);
  const json gj = section(config, "generate");
  const int year = gj.value("year", data.test_year);
  const std::size_t count = gj.value("count", std::size_t{1});
  const DecodingConfig dc = decoding_config(gj.value("decoding", json::object()), seed);
  const auto gens = generate_many(b->model, *b->provider, year, count, seed, dc);
  prepare_out(out, config, digest);
  std::ofstream txt(out / "generations.txt", std::ios::trunc);
  if (!txt) throw IoError("cannot write " + (out / "generations.txt").string());
  txt << "# futurelm-generations version " << kArtifactVersion << " config_digest " << digest << '\n';
  for (const auto& g : gens) {
    const std::string text = data.vocab->decode(g.tokens);
    txt << text << '\n';
    msg << text << '\n';
  }
  if (!txt) throw IoError("failed writing " + (out / "generations.txt").string());
}

void cmd_freq_csv(const json& config, const fs::path& out, std::ostream& msg) {
  const Dataset data = load_dataset(path_of(config, "dataset"));
  const json fj = section(config, "freq_csv");
  const auto labels_path = optional_path(fj, "labels");
  std::vector<std::pair<std::string, std::string>> inputs{{"dataset", data.digest}};
  if (labels_path) inputs.emplace_back("freq_csv.labels", file_sha256(*labels_path));
  const std::string digest = provenance_digest(config, inputs);
  std::vector<std::string> words = fj.value("words", std::vector<std::string>{});
  if (labels_path) {
    const json lj = read_json(*labels_path);
    check_header(lj, "futurelm-labels", *labels_path);
    const TrendLabels labels = TrendLabels::from_json(lj);
    for (const auto* group : {&labels.rising, &labels.falling, &labels.stable}) {
      words.insert(words.end(), group->begin(), group->end());
    }
  }
  if (words.empty()) throw ConfigError("freq-csv needs freq_csv.words or freq_csv.labels");
  prepare_out(out, config, digest);
  std::vector<std::string> warnings;
  export_frequency_csv(out / "frequencies.csv", data.freq, *data.vocab, words, &warnings,
                       "futurelm-frequencies version " + std::to_string(kArtifactVersion) + " config_digest " + digest);
  warn_all(msg, warnings);
  msg << "freq-csv: " << words.size() << " words over " << data.freq.years().size() << " years\n";
}

void run(const std::string& command, const json& config, const fs::path& out, std::ostream& msg) {
  if (command == "ingest") return cmd_ingest(config, out, msg);
  if (command == "synth") return cmd_synth(config, out, msg);
  if (command == "train") return cmd_train(config, out, msg);
  if (command == "build-embeddings") return cmd_build_embeddings(config, out, msg);
  if (command == "eval") return cmd_eval(config, out, msg);
  if (command == "generate") return cmd_generate(config, out, msg);
  if (command == "freq-csv") return cmd_freq_csv(config, out, msg);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace flm::pipeline
