#pragma once

// Run configuration shared by every stage, and the provenance manifest.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "wsp/align.hpp"
#include "wsp/annotate.hpp"
#include "wsp/filtering.hpp"
#include "wsp/pairing.hpp"
#include "wsp/spanpred.hpp"
#include "wsp/train.hpp"

namespace wsp {

inline constexpr std::string_view kFormatVersion = "wsp-1";

/// Input files and the directory that receives every stage output.
struct PathConfig {
  std::string work_dir = "wsp-work";
  std::string raw;                   // raw paragraphs (wikitext or paragraph schema)
  std::string titles;                // title -> entity map JSONL
  std::string token_embeddings;      // token-level sidecar
  std::string pos_tags;              // POS sidecar JSONL
  std::string paragraph_embeddings;  // optional; similarity filter is skipped when empty
  std::string subword_counts;        // optional; built-in counter when empty
  std::string eval_pairs;            // TSV sentence pairs to align
  std::string eval_gold;             // gold alignments for eval_pairs
  std::string model;                 // checkpoint; <work_dir>/model.wspc when empty
  std::string alignments;            // align output; <work_dir>/alignments.txt when empty
};

/// Model shape minus the vocabulary, which the train stage builds from the data.
struct ModelConfig {
  spanpred::Tokenization tokenization = spanpred::Tokenization::character;
  int dim = 64;
  int layers = 2;
  int heads = 2;
  int hidden = 128;
  int max_len = 256;
  std::size_t max_vocab = 0;  // 0 keeps every token

  spanpred::EncoderConfig encoder(std::vector<std::string> vocab, std::uint64_t seed) const;
};

struct RunConfig {
  std::string version = std::string(kFormatVersion);
  std::uint64_t seed = 1;
  int threads = 0;  // 0: OpenMP default
  PathConfig paths;
  PairingOptions pairing;
  FilterConfig filter;
  AnnotateConfig annotate;
  ModelConfig model;
  spanpred::TrainConfig train;
  AlignConfig align;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Parses a config document over the defaults. Unknown keys and invariant
/// violations raise ConfigError naming the dotted key.
RunConfig config_from_json(const nlohmann::json& j);

/// An empty (or whitespace-only) file yields the defaults. Relative paths
/// inside the file are resolved against the file's directory.
RunConfig load_config(const std::string& path);

/// Per-stage seed: the global seed hashed with the stage name.
std::uint64_t stage_seed(const RunConfig& cfg, std::string_view stage);

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct ManifestEntry {
  std::string stage;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  double wall_seconds = 0.0;
  bool ok = true;
  std::string error;

  nlohmann::ordered_json to_json() const;
};

/// Hashes the given files. Throws IoError for a missing input.
std::vector<FileDigest> digest_files(const std::vector<std::string>& paths);

/// manifest.json in a work directory: config snapshot plus one entry per
/// stage run, appended in order by a single writer.
class Manifest {
 public:
  explicit Manifest(std::string path) : path_(std::move(path)) {}

  /// Starts a new document (the pipeline command does this).
  void reset(const RunConfig& cfg);
  /// Appends an entry, creating the document if it does not exist yet.
  void append(const RunConfig& cfg, const ManifestEntry& entry);
  const std::string& path() const { return path_; }

 private:
  void write(const nlohmann::ordered_json& doc) const;
  std::string path_;
};

}  // namespace wsp
