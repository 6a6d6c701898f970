#pragma once

// The pipeline stages as file-to-file steps over a work directory. Each
// stage reads its inputs from disk and writes its outputs to disk, so any
// one of them can be re-run alone.

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "wsp/config.hpp"

namespace wsp::stages {

/// Artifact locations inside the work directory.
struct WorkFiles {
  std::string paragraphs;  // paragraphs.jsonl
  std::string index;       // index.json
  std::string pairs;       // pairs.jsonl
  std::string filtered;    // filtered.jsonl
  std::string wiki;        // wiki.jsonl
  std::string common;      // common.jsonl
  std::string dataset;     // dataset.json
  std::string model;       // model.wspc unless paths.model is set
  std::string loss;        // loss.csv
  std::string alignments;  // alignments.txt unless paths.alignments is set
  std::string metrics;     // metrics.json
  std::string manifest;    // manifest.json
};

WorkFiles work_files(const RunConfig& cfg);

struct StageResult {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  std::string message;  // human-readable summary for the terminal
};

StageResult ingest(const RunConfig& cfg);
StageResult index(const RunConfig& cfg);
StageResult pair(const RunConfig& cfg);
StageResult filter(const RunConfig& cfg);
StageResult annotate(const RunConfig& cfg);
StageResult emit(const RunConfig& cfg);
StageResult train(const RunConfig& cfg);
StageResult align(const RunConfig& cfg);
StageResult eval(const RunConfig& cfg);

/// Summary of whatever artifacts exist in the work directory. Writes nothing.
StageResult stats(const RunConfig& cfg);

/// ingest, index, pair, filter, annotate, emit, train, align, eval.
const std::vector<std::string>& pipeline_order();

bool is_stage(std::string_view name);

/// Runs one stage by name and appends its manifest entry, including a
/// failed entry (with whatever outputs exist) before rethrowing.
StageResult run(const RunConfig& cfg, std::string_view name);

/// Resets the manifest, then runs every stage in order.
std::vector<StageResult> run_pipeline(const RunConfig& cfg);

}  // namespace wsp::stages
