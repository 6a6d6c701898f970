#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "wsp/corpus.hpp"

namespace wsp {

/// Inverted index entity -> paragraphs mentioning it.
struct EntityIndex {
  /// Posting lists in ingestion order; a paragraph appears once per entity.
  std::map<std::string, std::vector<std::string>> postings;
  std::unordered_map<std::string, std::string> lang_of;
  std::vector<std::string> paragraph_order;

  std::size_t num_paragraphs() const { return paragraph_order.size(); }
  const std::string& lang(const std::string& paragraph_id) const;

  nlohmann::ordered_json to_json() const;
  static EntityIndex from_json(const nlohmann::json& j);
};

/// Shard-and-merge index build. Throws DataError on a duplicate paragraph id.
EntityIndex build_index(std::span<const Paragraph> paragraphs);

struct ParagraphPair {
  std::string src_id;
  std::string tgt_id;
  std::string entity_id;
  std::string src_lang;
  std::string tgt_lang;

  bool operator==(const ParagraphPair&) const = default;
};

enum class PairingMode {
  any,              // every pairwise combination
  cross_lingual,    // the two paragraphs differ in language
  monolingual,      // same language; entity must also occur in another language
  english_centric,  // exactly one side is English
};

PairingMode parse_pairing_mode(const std::string& s);
std::string to_string(PairingMode m);

struct PairingOptions {
  PairingMode mode = PairingMode::english_centric;
  std::optional<std::size_t> cap_per_entity;
  std::uint64_t seed = 0;
  /// english_centric: put the English paragraph on the target side.
  bool english_as_target = true;
  /// monolingual: restrict pairs to this language (any language when unset).
  std::optional<std::string> mono_lang;
  std::string english_code = "en";
};

struct CollectStats {
  std::size_t entities = 0;
  std::size_t entities_with_pairs = 0;
  std::size_t entities_skipped_monolingual = 0;
  std::size_t entities_capped = 0;
  std::size_t combinations = 0;          // all C(n_e, 2) before any filter
  std::size_t after_mode_filter = 0;
  std::size_t after_cap = 0;             // co-mention relations before dedup
  std::size_t duplicates_dropped = 0;
  std::size_t emitted = 0;

  nlohmann::ordered_json to_json() const;
};

struct PairingResult {
  std::vector<ParagraphPair> pairs;
  CollectStats stats;
};

/// Emits co-mention pairs entity by entity (entities in sorted order),
/// filtered by mode, optionally capped per entity, then deduplicated on the
/// paragraph pair keeping the first entity.
PairingResult collect_pairs(const EntityIndex& index, const PairingOptions& opts);

struct PairStats {
  std::size_t pairs = 0;
  std::size_t entities = 0;
  std::map<std::string, std::size_t> by_lang_pair;  // "src-tgt"
  std::map<std::string, std::size_t> by_entity;

  nlohmann::ordered_json to_json() const;
};

PairStats pair_stats(std::span<const ParagraphPair> pairs);

std::string pair_to_jsonl(const ParagraphPair& p);
ParagraphPair pair_from_json(const nlohmann::json& j);
std::vector<ParagraphPair> load_pairs(const std::string& path);
void write_pairs(const std::string& path, std::span<const ParagraphPair> pairs);

}  // namespace wsp
