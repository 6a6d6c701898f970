// wspalign: command-line entry point for the stages and the full pipeline.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "wsp/config.hpp"
#include "wsp/error.hpp"
#include "wsp/eval.hpp"
#include "wsp/io.hpp"
#include "wsp/log.hpp"
#include "wsp/stages.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> work_dir, raw, titles, token_embeddings, pos_tags, paragraph_embeddings,
      subword_counts, eval_pairs, eval_gold, model, alignments;
  std::optional<std::string> pairing_mode;
  std::optional<std::size_t> cap;
  std::optional<int> min_subwords, max_subwords;
  std::optional<double> sim_threshold, common_fraction;
  std::optional<std::size_t> steps, batch_size;
  std::optional<double> lr;
  std::optional<double> threshold;
  std::optional<std::string> strategy;
  bool quiet = false;
};

void add_options(CLI::App& app, Overrides& o) {
  app.add_option("-c,--config", o.config, "Run configuration (JSON)")->envname("WSPALIGN_CONFIG");
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("--threads", o.threads, "Worker threads for parallel stages")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", o.quiet, "No progress messages");

  const char* io = "Paths";
  app.add_option("--work-dir", o.work_dir, "Directory receiving every stage output")->group(io);
  app.add_option("--raw", o.raw, "Raw paragraphs JSONL (ingest)")->group(io);
  app.add_option("--titles", o.titles, "Title-to-entity map JSONL (ingest)")->group(io);
  app.add_option("--subword-counts", o.subword_counts, "Subword counts JSONL (filter)")->group(io);
  app.add_option("--paragraph-embeddings", o.paragraph_embeddings, "Paragraph embedding sidecar (filter)")
      ->group(io);
  app.add_option("--token-embeddings", o.token_embeddings, "Token embedding sidecar (annotate)")->group(io);
  app.add_option("--pos-tags", o.pos_tags, "POS tag JSONL (annotate)")->group(io);
  app.add_option("--model", o.model, "Checkpoint written by train, read by align")->group(io);
  app.add_option("--pairs", o.eval_pairs, "Sentence pairs TSV to align (align)")->group(io);
  app.add_option("--alignments", o.alignments, "Pharaoh alignments written by align, read by eval")->group(io);
  app.add_option("--gold", o.eval_gold, "Gold alignments (eval)")->group(io);

  const char* st = "Stage settings";
  app.add_option("--pairing-mode", o.pairing_mode, "any | cross_lingual | monolingual | english_centric")
      ->group(st);
  app.add_option("--cap", o.cap, "Maximum pairs per entity")->group(st);
  app.add_option("--min-subwords", o.min_subwords, "Length filter lower bound")->group(st);
  app.add_option("--max-subwords", o.max_subwords, "Length filter upper bound")->group(st);
  app.add_option("--sim-threshold", o.sim_threshold, "Paragraph cosine threshold")->group(st);
  app.add_option("--common-fraction", o.common_fraction, "Share of pairs contributing common-word examples")
      ->group(st);
  app.add_option("--steps", o.steps, "Training steps")->group(st);
  app.add_option("--lr", o.lr, "Learning rate")->group(st);
  app.add_option("--batch-size", o.batch_size, "Training batch size")->group(st);
  app.add_option("--threshold", o.threshold, "Alignment probability threshold")->group(st);
  app.add_option("--strategy", o.strategy, "Span-to-word strategy")->group(st);
}

template <typename T>
void set(const std::optional<T>& from, T& to) {
  if (from) to = *from;
}

wsp::RunConfig resolve(const Overrides& o) {
  wsp::RunConfig cfg = o.config.empty() ? wsp::RunConfig{} : wsp::load_config(o.config);
  set(o.seed, cfg.seed);
  set(o.threads, cfg.threads);
  set(o.work_dir, cfg.paths.work_dir);
  set(o.raw, cfg.paths.raw);
  set(o.titles, cfg.paths.titles);
  set(o.token_embeddings, cfg.paths.token_embeddings);
  set(o.pos_tags, cfg.paths.pos_tags);
  set(o.paragraph_embeddings, cfg.paths.paragraph_embeddings);
  set(o.subword_counts, cfg.paths.subword_counts);
  set(o.eval_pairs, cfg.paths.eval_pairs);
  set(o.eval_gold, cfg.paths.eval_gold);
  set(o.model, cfg.paths.model);
  set(o.alignments, cfg.paths.alignments);
  if (o.pairing_mode) {
    try {
      cfg.pairing.mode = wsp::parse_pairing_mode(*o.pairing_mode);
    } catch (const wsp::Error& e) {
      throw wsp::ConfigError("pairing.mode", e.what());
    }
  }
  if (o.cap) cfg.pairing.cap_per_entity = *o.cap;
  set(o.min_subwords, cfg.filter.min_subwords);
  set(o.max_subwords, cfg.filter.max_subwords);
  set(o.sim_threshold, cfg.filter.sim_threshold);
  set(o.common_fraction, cfg.annotate.common_fraction);
  set(o.steps, cfg.train.total_steps);
  set(o.lr, cfg.train.lr);
  set(o.batch_size, cfg.train.batch_size);
  set(o.threshold, cfg.align.threshold);
  if (o.strategy) cfg.align.strategy = wsp::parse_span_strategy(*o.strategy);
  cfg.validate();
  return cfg;
}

int fail(int code, const char* kind, const std::string& what) {
  std::fprintf(stderr, "wspalign: %s error: %s\n", kind, what.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised word alignment toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  add_options(app, o);

  const char* descriptions[][2] = {
      {"ingest", "Parse raw paragraphs and entity links"},
      {"index", "Build the entity-to-paragraph index"},
      {"pair", "Collect co-mention paragraph pairs"},
      {"filter", "Apply the length and similarity filters"},
      {"annotate", "Annotate wiki-word and common-word alignments"},
      {"emit", "Merge annotations into the training dataset"},
      {"train", "Train the span prediction model"},
      {"align", "Align sentence pairs with a trained model"},
      {"eval", "Score alignments against gold"},
      {"pipeline", "Run every stage in order"},
      {"stats", "Summarize the artifacts in the work directory"},
  };
  bool per_sentence = false;
  bool json_report = false;
  for (const auto& [name, desc] : descriptions) {
    auto* sub = app.add_subcommand(name, desc);
    if (std::string(name) == "eval") {
      sub->add_flag("--per-sentence", per_sentence, "Also print one row per sentence pair");
      sub->add_flag("--json", json_report, "Print the JSON report instead of text");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const wsp::RunConfig cfg = resolve(o);
    wsp::log::set_level(o.quiet ? wsp::log::Level::quiet : wsp::log::Level::info);
    if (command == "pipeline") {
      const auto results = wsp::stages::run_pipeline(cfg);
      std::printf("%s\n", results.back().message.c_str());
    } else {
      const auto r = wsp::stages::run(cfg, command);
      if (command == "eval") {
        const auto report =
            wsp::report_from_json(nlohmann::json::parse(wsp::io::read_file(wsp::stages::work_files(cfg).metrics)));
        if (json_report) {
          std::printf("%s\n", wsp::report_json(report).dump(2).c_str());
        } else {
          std::printf("%s", wsp::report_text(report, per_sentence).c_str());
        }
      } else if (command == "stats") {
        std::printf("%s\n", r.message.c_str());
      } else {
        std::printf("%s: %s\n", command.c_str(), r.message.c_str());
      }
    }
    return kOk;
  } catch (const wsp::ConfigError& e) {
    return fail(kUsage, "config", e.what());
  } catch (const wsp::DataError& e) {
    return fail(kData, "data", e.what());
  } catch (const wsp::Error& e) {
    return fail(kData, "data", e.what());
  } catch (const std::exception& e) {
    return fail(kInternal, "internal", e.what());
  }
}
