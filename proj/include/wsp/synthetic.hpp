#pragma once

// Generated bilingual corpus over a bijective lexicon: the target side is a
// word-by-word substitution of the source with occasional adjacent swaps.
// Every sentence pair shares one named entity, linked in both paragraphs.
// Also produces the sidecars the pipeline needs (token embeddings, POS tags,
// paragraph embeddings) and a held-out set with gold alignments.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "wsp/align.hpp"
#include "wsp/config.hpp"

namespace wsp::synthetic {

struct Config {
  std::uint64_t seed = 7;
  std::size_t train_pairs = 2000;
  std::size_t heldout_pairs = 200;
  std::size_t min_words = 5;  // including the entity name
  std::size_t max_words = 12;
  std::size_t lexicon_size = 120;
  std::size_t min_word_len = 2;
  std::size_t max_word_len = 4;
  double swap_prob = 0.15;
  std::size_t emb_dim = 16;
  double emb_noise = 0.15;
  std::string src_lang = "xx";
  std::string tgt_lang = "yy";

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static Config from_json(const nlohmann::json& j);
};

struct SentencePairSample {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  std::vector<std::size_t> src_concepts;  // lexicon index, or npos for the entity name
  std::vector<std::size_t> tgt_concepts;
  AlignmentSet gold;
  std::string qid;
  std::string name;
  std::size_t name_src = 0;  // word index of the entity in each sentence
  std::size_t name_tgt = 0;
};

struct Corpus {
  std::vector<std::pair<std::string, std::string>> lexicon;
  std::vector<std::string> concept_tags;  // universal POS tag per lexicon entry
  std::vector<SentencePairSample> train;
  std::vector<SentencePairSample> heldout;
};

Corpus generate(const Config& cfg);

/// Paths of the files written by write_corpus, relative to its directory.
struct Files {
  static constexpr const char* raw = "raw.jsonl";
  static constexpr const char* titles = "titles.jsonl";
  static constexpr const char* token_embeddings = "tokens.wspe";
  static constexpr const char* pos_tags = "pos.jsonl";
  static constexpr const char* paragraph_embeddings = "paragraphs.wspe";
  static constexpr const char* heldout = "heldout.tsv";
  static constexpr const char* gold = "heldout.gold";
};

void write_corpus(const Corpus& corpus, const Config& cfg, const std::string& dir);

/// Run configuration for a corpus written to `dir`: cross-lingual pairing,
/// length bounds suited to short sentences, every pair contributing
/// common-word examples, and a small word-level encoder.
RunConfig pipeline_config(const Config& cfg, const std::string& dir);

}  // namespace wsp::synthetic
