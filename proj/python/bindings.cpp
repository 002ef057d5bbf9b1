#include <memory>
#include <optional>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "futurelm/errors.hpp"
#include "futurelm/generate.hpp"
#include "futurelm/metrics.hpp"
#include "futurelm/pipeline.hpp"
#include "futurelm/synth.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using namespace flm;

std::vector<ScoredDocument> scored_from(const std::vector<std::vector<TokenId>>& targets,
                                        const std::vector<std::vector<double>>& log_probs) {
  if (targets.size() != log_probs.size()) throw DimensionError("targets and log_probs differ in length");
  std::vector<ScoredDocument> out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].size() != log_probs[i].size()) throw DimensionError("document " + std::to_string(i) + " length mismatch");
    out.push_back({0, targets[i], log_probs[i]});
  }
  return out;
}

StopwordList stopword_list(const std::vector<TokenId>& ids) {
  StopwordList s;
  s.ids.insert(ids.begin(), ids.end());
  return s;
}

MeteorParams meteor_params(double alpha, double gamma, double beta) {
  MeteorParams p{alpha, gamma, beta};
  p.validate();
  return p;
}

// A trained checkpoint loaded against its dataset.
class Model {
 public:
  Model(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
        const std::optional<std::filesystem::path>& embeddings)
      : data_(pipeline::load_dataset(dataset)), bundle_(pipeline::load_bundle(checkpoint, data_, embeddings)) {}

  const Vocabulary& vocab() const { return *data_.vocab; }

  py::dict evaluate(const std::string& split) const {
    const auto scored = score_corpus(bundle_->model, *bundle_->provider, slice(split));
    const auto ppl = perplexity(scored);
    const auto cpl = content_perplexity(scored, data_.stopwords);
    py::dict d;
    d["ppl"] = ppl.value;
    d["cpl"] = cpl.value;
    d["tokens"] = ppl.tokens;
    d["content_tokens"] = cpl.tokens;
    return d;
  }

  std::vector<double> next_token_distribution(const std::vector<TokenId>& prefix, int year) const {
    return next_token_dist(bundle_->model, prefix, *bundle_->provider, year);
  }

  std::string generate_text(int year, std::uint64_t seed, const std::string& decoding) const {
    DecodingConfig c = DecodingConfig::from_json(json::parse(decoding));
    c.seed = seed;
    c.validate();
    return data_.vocab->decode(generate(bundle_->model, *bundle_->provider, year, c).tokens);
  }

  std::string head() const { return to_string(bundle_->head.kind); }
  std::string checkpoint_id() const { return bundle_->checkpoint_id; }
  std::vector<TokenId> stopwords() const { return {data_.stopwords.ids.begin(), data_.stopwords.ids.end()}; }
  std::vector<int> years() const { return data_.all.years(); }

 private:
  const TemporalCorpus& slice(const std::string& split) const {
    if (split == "train") return data_.train;
    if (split == "dev") return data_.dev;
    if (split == "test") return data_.test;
    throw ConfigError("unknown split '" + split + "'");
  }

  pipeline::Dataset data_;
  std::unique_ptr<pipeline::ModelBundle> bundle_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "futurelm native core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto contract = py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", contract.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", contract.ptr());
  py::register_exception<HistoryError>(m, "HistoryError", contract.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.attr("EOS_ID") = kEosId;
  m.attr("UNK_ID") = kUnkId;

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<const std::vector<std::string>&>(), py::arg("words"))
      .def("__len__", &Vocabulary::size)
      .def_property_readonly("words", &Vocabulary::words)
      .def("id", [](const Vocabulary& v, const std::string& w) { return v.id(w); })
      .def("word", &Vocabulary::word)
      .def("encode", [](const Vocabulary& v, const std::string& t) { return v.encode(t); })
      .def("decode", [](const Vocabulary& v, const std::vector<TokenId>& ids) { return v.decode(ids); })
      .def_property_readonly("digest", &Vocabulary::digest);

  m.def("perplexity", [](const std::vector<std::vector<TokenId>>& targets, const std::vector<std::vector<double>>& lp) {
    return perplexity(scored_from(targets, lp)).value;
  }, py::arg("targets"), py::arg("log_probs"));
  m.def("content_perplexity",
        [](const std::vector<std::vector<TokenId>>& targets, const std::vector<std::vector<double>>& lp,
           const std::vector<TokenId>& stopwords) {
          return content_perplexity(scored_from(targets, lp), stopword_list(stopwords)).value;
        },
        py::arg("targets"), py::arg("log_probs"), py::arg("stopwords"));

  m.def("meteor_align", [](const std::vector<TokenId>& c, const std::vector<TokenId>& r) {
    const auto a = meteor_align(c, r);
    return py::make_tuple(a.matches, a.chunks, a.exact);
  }, py::arg("candidate"), py::arg("reference"));
  m.def("meteor",
        [](const std::vector<TokenId>& c, const std::vector<TokenId>& r, double alpha, double gamma, double beta) {
          return meteor(c, r, meteor_params(alpha, gamma, beta));
        },
        py::arg("candidate"), py::arg("reference"), py::arg("alpha") = 0.9, py::arg("gamma") = 0.5,
        py::arg("beta") = 3.0);
  m.def("content_meteor",
        [](const std::vector<std::vector<TokenId>>& gens, const std::vector<std::vector<TokenId>>& refs,
           const std::vector<TokenId>& stopwords) {
          const auto r = content_meteor_score(gens, refs, stopword_list(stopwords));
          py::dict d;
          d["cm"] = r.cm;
          d["per_generation"] = r.per_generation;
          d["empty_generations"] = r.empty_generations;
          d["references"] = r.references;
          d["warnings"] = r.warnings;
          return d;
        },
        py::arg("generations"), py::arg("references"), py::arg("stopwords"));
  m.def("sign_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = sign_test(a, b);
    py::dict d;
    d["wins"] = r.wins;
    d["losses"] = r.losses;
    d["ties"] = r.ties;
    d["p_value"] = r.p_value;
    return d;
  });

  m.def("generate_drift_corpus_json", [](const std::string& spec) {
    const auto dc = generate_drift_corpus(DriftSpec::from_json(json::parse(spec)));
    json docs = json::array();
    for (const auto* d : dc.corpus.all_docs()) docs.push_back({{"year", d->year}, {"text", d->raw_text}});
    return json{{"documents", docs}, {"labels", dc.labels.to_json()}, {"function_words", dc.function_words}}.dump();
  });

  m.def("resolve_config_json",
        [](const std::optional<std::filesystem::path>& path, std::optional<std::uint64_t> seed,
           const std::vector<std::string>& overrides) { return pipeline::resolve_config(path, seed, overrides).dump(); });
  m.def("run_json", [](const std::string& command, const std::string& config, const std::filesystem::path& out) {
    std::ostringstream msg;
    pipeline::run(command, json::parse(config), out, msg);
    return msg.str();
  });

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&, const std::filesystem::path&,
                    const std::optional<std::filesystem::path>&>(),
           py::arg("checkpoint"), py::arg("dataset"), py::arg("embeddings") = std::nullopt)
      .def_property_readonly("vocab", &Model::vocab, py::return_value_policy::reference_internal)
      .def_property_readonly("head", &Model::head)
      .def_property_readonly("checkpoint_id", &Model::checkpoint_id)
      .def_property_readonly("stopwords", &Model::stopwords)
      .def_property_readonly("years", &Model::years)
      .def("evaluate", &Model::evaluate, py::arg("split") = "test")
      .def("next_token_distribution", &Model::next_token_distribution, py::arg("prefix"), py::arg("year"))
      .def("generate_json", &Model::generate_text, py::arg("year"), py::arg("seed"), py::arg("decoding"));
}
