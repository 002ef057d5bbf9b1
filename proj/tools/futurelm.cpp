#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "futurelm/errors.hpp"
#include "futurelm/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"futurelm: temporal softmax-bias language modeling toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Random seed (required here or in the config)");
  app.add_option("--out", out, "Output directory");
  app.add_option("--set", overrides, "Config override key.path=value (repeatable)");

  const std::vector<std::pair<const char*, const char*>> commands{
      {"ingest", "Ingest a JSONL or bibliography corpus, build the vocabulary, splits and stopwords"},
      {"synth", "Generate a synthetic corpus with programmed word-frequency drift"},
      {"train", "Train a decoder, optionally with a temporal bias head"},
      {"build-embeddings", "Build per-year averaged contextual word vectors"},
      {"eval", "Report PPL, CPL and content Meteor for a checkpoint"},
      {"generate", "Generate text for a year"},
      {"freq-csv", "Export per-year word frequencies as CSV"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    std::optional<std::filesystem::path> cfg;
    if (!config_path.empty()) cfg = config_path;
    const auto config = flm::pipeline::resolve_config(cfg, seed, overrides);
    flm::pipeline::run(command, config, out, std::cout);
  } catch (const flm::IoError& e) {
    std::cerr << "futurelm " << command << ": I/O error: " << e.what() << '\n';
    return 2;
  } catch (const flm::ContractError& e) {
    std::cerr << "futurelm " << command << ": " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "futurelm " << command << ": invalid config or artifact: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "futurelm " << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
