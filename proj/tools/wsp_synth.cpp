// wsp-synth: writes a generated bilingual corpus, its sidecars, a held-out
// set with gold alignments and a ready-to-run config.json.

#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic corpus for wspalign"};
  std::string out;
  std::string params;
  wsp::synthetic::Config cfg;
  app.add_option("-o,--out", out, "Output directory")->required();
  app.add_option("--params", params, "JSON file with generator settings")->check(CLI::ExistingFile);
  app.add_option("--seed", cfg.seed, "Generator seed");
  app.add_option("--train-pairs", cfg.train_pairs, "Training sentence pairs");
  app.add_option("--heldout-pairs", cfg.heldout_pairs, "Held-out sentence pairs");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!params.empty()) {
      // flags given on the command line win over the file
      const auto given = cfg;
      cfg = wsp::synthetic::Config::from_json(nlohmann::json::parse(wsp::io::read_file(params)));
      if (app.count("--seed")) cfg.seed = given.seed;
      if (app.count("--train-pairs")) cfg.train_pairs = given.train_pairs;
      if (app.count("--heldout-pairs")) cfg.heldout_pairs = given.heldout_pairs;
    }
    const auto corpus = wsp::synthetic::generate(cfg);
    wsp::synthetic::write_corpus(corpus, cfg, out);
    // paths relative to the config file, so the directory can be moved
    auto run = wsp::synthetic::pipeline_config(cfg, ".");
    run.paths.work_dir = "work";
    const std::string config_path = (std::filesystem::path(out) / "config.json").string();
    wsp::io::write_file(config_path, run.to_json().dump(2) + "\n");
    std::printf("wrote %zu training and %zu held-out pairs to %s\n", corpus.train.size(), corpus.heldout.size(),
                out.c_str());
    std::printf("run: wspalign pipeline --config %s\n", config_path.c_str());
  } catch (const wsp::ConfigError& e) {
    std::fprintf(stderr, "wsp-synth: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "wsp-synth: %s\n", e.what());
    return 2;
  }
  return 0;
}
