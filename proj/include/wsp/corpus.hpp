#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "wsp/io.hpp"

namespace wsp {

/// An entity mention. Offsets are inclusive Unicode scalar positions.
struct Mention {
  std::string entity_id;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::string surface;

  bool operator==(const Mention&) const = default;
};

struct Paragraph {
  std::string id;
  std::string lang;
  std::string text;
  std::vector<Mention> mentions;  // sorted by start, non-overlapping

  bool operator==(const Paragraph&) const = default;
};

/// Page title -> entity id, per language. Stands in for sitelink resolution.
class TitleEntityMap {
 public:
  void add(std::string_view lang, std::string_view title, std::string_view entity_id);

  /// Exact match on the normalized title, then a retry with the first
  /// character case-folded.
  std::optional<std::string> lookup(std::string_view lang, std::string_view title) const;

  std::size_t size() const { return map_.size(); }

  /// JSONL records {"lang": str, "title": str, "qid": str}.
  static TitleEntityMap load(const std::string& path);

  /// Underscores to spaces, outer whitespace trimmed.
  static std::string normalize(std::string_view title);

 private:
  std::map<std::pair<std::string, std::string>, std::string> map_;
};

struct ParsedWikitext {
  std::string text;
  std::vector<Mention> mentions;
};

/// Converts [[Title]] / [[Title|surface]] links into plain text plus mention
/// spans into the returned text. {{...}} blocks are deleted first
/// (non-greedy). Links with unknown titles become plain text.
ParsedWikitext parse_wikitext_links(std::string_view raw, std::string_view lang,
                                    const TitleEntityMap& map);

struct IngestStats {
  std::size_t paragraphs = 0;
  std::size_t mentions = 0;
  std::size_t overlaps_dropped = 0;
};

/// Sorts mentions (leftmost, then longest), drops overlapping ones and
/// checks every Mention/Paragraph invariant. Throws ValidationError.
Paragraph validate_paragraph(Paragraph p, IngestStats* stats = nullptr);

Paragraph paragraph_from_json(const nlohmann::json& j);
nlohmann::ordered_json paragraph_to_json(const Paragraph& p);
std::string paragraph_to_jsonl(const Paragraph& p);

/// Streams validated paragraphs from a Paragraph JSONL file in file order.
class ParagraphReader {
 public:
  explicit ParagraphReader(const std::string& path);
  std::optional<Paragraph> next();
  const IngestStats& stats() const { return stats_; }

 private:
  io::LineReader lines_;
  IngestStats stats_;
};

std::vector<Paragraph> load_paragraphs(const std::string& path, IngestStats* stats = nullptr);
void write_paragraphs(const std::string& path, std::span<const Paragraph> paragraphs);

/// Raw-input records: either the Paragraph schema, or
/// {"id", "lang", "wikitext"} which is run through parse_wikitext_links.
std::vector<Paragraph> ingest_raw(const std::string& path, const TitleEntityMap& map,
                                  IngestStats* stats = nullptr);

}  // namespace wsp
