#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/corpus.hpp"
#include "futurelm/lm.hpp"
#include "futurelm/temporal.hpp"

// End-to-end commands over on-disk artifacts. Every command reads a resolved
// JSON config, writes its outputs plus resolved_config.json into an output
// directory, and stamps each artifact with a format version and the SHA-256
// of its provenance (the config with input paths replaced by the digests of
// the files they name), so reruns from identical inputs give identical bytes.
namespace flm::pipeline {

// Loads `config_path` (if any), applies `key.path=value` overrides (values are
// parsed as JSON, falling back to strings) and the seed flag. A seed is
// required.
nlohmann::json resolve_config(const std::optional<std::filesystem::path>& config_path,
                              std::optional<std::uint64_t> seed, const std::vector<std::string>& overrides);

struct Dataset {
  nlohmann::json meta;
  std::string digest;
  std::shared_ptr<const Vocabulary> vocab;
  TemporalCorpus all;  // tokenized, every year
  TemporalCorpus train;
  TemporalCorpus dev;
  TemporalCorpus test;
  std::vector<int> train_years;
  int dev_year = 0;
  int test_year = 0;
  StopwordList stopwords;
  FrequencyTable freq;  // every year of `all`
};

Dataset load_dataset(const std::filesystem::path& dir);

// A decoder with its bias head and provider wired together.
struct ModelBundle {
  DecoderLM model;
  HeadConfig head;
  std::unique_ptr<FrequencyHead> frequency;
  std::unique_ptr<ContextualHead> contextual;
  std::unique_ptr<GatedHead> gated;
  std::optional<YearWordEmbeddings> embeddings;
  std::string embeddings_digest;
  std::unique_ptr<BiasProvider> provider;
  std::vector<std::unique_ptr<BiasProvider>> parts;  // owned by a combined provider
  nlohmann::json checkpoint_meta;
  std::string checkpoint_id;
};

std::unique_ptr<ModelBundle> make_bundle(const DecoderConfig& config, std::uint64_t seed, const HeadConfig& head,
                                         const Dataset& data,
                                         const std::optional<std::filesystem::path>& embeddings);
std::unique_ptr<ModelBundle> load_bundle(const std::filesystem::path& checkpoint, const Dataset& data,
                                         const std::optional<std::filesystem::path>& embeddings);

void cmd_ingest(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& msg);
void cmd_synth(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& msg);
void cmd_train(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& msg);
void cmd_build_embeddings(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& msg);
void cmd_eval(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& msg);
void cmd_generate(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& msg);
void cmd_freq_csv(const nlohmann::json& config, const std::filesystem::path& out, std::ostream& msg);

// Dispatches by command name (ingest, synth, train, build-embeddings, eval,
// generate, freq-csv).
void run(const std::string& command, const nlohmann::json& config, const std::filesystem::path& out,
         std::ostream& msg);

}  // namespace flm::pipeline
