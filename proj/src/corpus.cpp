#include "wsp/corpus.hpp"

#include <algorithm>
#include <cctype>

#include "wsp/error.hpp"
#include "wsp/json_util.hpp"
#include "wsp/utf8.hpp"

namespace wsp {

using nlohmann::json;

std::string TitleEntityMap::normalize(std::string_view title) {
  std::string t(title);
  std::replace(t.begin(), t.end(), '_', ' ');
  const auto first = t.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = t.find_last_not_of(" \t\r\n");
  return t.substr(first, last - first + 1);
}

void TitleEntityMap::add(std::string_view lang, std::string_view title, std::string_view entity_id) {
  map_[{std::string(lang), normalize(title)}] = std::string(entity_id);
}

std::optional<std::string> TitleEntityMap::lookup(std::string_view lang, std::string_view title) const {
  std::string key = normalize(title);
  if (key.empty()) return std::nullopt;
  if (auto it = map_.find({std::string(lang), key}); it != map_.end()) return it->second;
  const auto c = static_cast<unsigned char>(key[0]);
  if (std::islower(c)) {
    key[0] = static_cast<char>(std::toupper(c));
  } else if (std::isupper(c)) {
    key[0] = static_cast<char>(std::tolower(c));
  } else {
    return std::nullopt;
  }
  if (auto it = map_.find({std::string(lang), key}); it != map_.end()) return it->second;
  return std::nullopt;
}

TitleEntityMap TitleEntityMap::load(const std::string& path) {
  TitleEntityMap map;
  io::LineReader lines(path);
  while (auto line = lines.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, path, lines.line());
    try {
      map.add(jsonu::get_string(j, "lang"), jsonu::get_string(j, "title"), jsonu::get_string(j, "qid"));
    } catch (const ValidationError& e) {
      throw LineError(path, lines.line(), e.what());
    }
  }
  return map;
}

namespace {

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) {
  return s.compare(pos, prefix.size(), prefix) == 0;
}

}  // namespace

ParsedWikitext parse_wikitext_links(std::string_view raw, std::string_view lang,
                                    const TitleEntityMap& map) {
  ParsedWikitext out;
  std::size_t out_len = 0;  // scalar values emitted so far
  std::size_t pos = 0;
  while (pos < raw.size()) {
    if (starts_with_at(raw, pos, "{{")) {
      const auto close = raw.find("}}", pos + 2);
      if (close == std::string_view::npos) throw ParseError("unterminated template", pos);
      pos = close + 2;
      continue;
    }
    if (starts_with_at(raw, pos, "]]")) throw ParseError("unbalanced brackets: unexpected ]]", pos);
    if (starts_with_at(raw, pos, "[[")) {
      const auto close = raw.find("]]", pos + 2);
      if (close == std::string_view::npos) throw ParseError("unbalanced brackets: missing ]]", pos);
      const auto nested = raw.find("[[", pos + 2);
      if (nested != std::string_view::npos && nested < close) {
        throw ParseError("unbalanced brackets: nested link", nested);
      }
      const std::string_view inner = raw.substr(pos + 2, close - pos - 2);
      const auto pipe = inner.find('|');
      const std::string_view title_raw = inner.substr(0, pipe);
      const std::string title = TitleEntityMap::normalize(title_raw);
      if (title.empty()) throw ParseError("empty link title", pos);
      std::string surface;
      if (pipe == std::string_view::npos) {
        // display the title as written, minus outer whitespace
        const auto first = title_raw.find_first_not_of(" \t");
        const auto last = title_raw.find_last_not_of(" \t");
        surface = std::string(title_raw.substr(first, last - first + 1));
      } else {
        surface = std::string(inner.substr(pipe + 1));
        if (surface.empty()) throw ParseError("empty link surface", pos);
      }
      const std::size_t surface_len = utf8::length(surface);
      if (auto qid = map.lookup(lang, title)) {
        out.mentions.push_back(Mention{*qid, static_cast<std::int64_t>(out_len),
                                       static_cast<std::int64_t>(out_len + surface_len - 1), surface});
      }
      out.text += surface;
      out_len += surface_len;
      pos = close + 2;
      continue;
    }
    const char c = raw[pos];
    out.text.push_back(c);
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++out_len;
    ++pos;
  }
  return out;
}

Paragraph validate_paragraph(Paragraph p, IngestStats* stats) {
  if (p.id.empty()) throw ValidationError("id", "empty paragraph id");
  if (p.lang.empty()) throw ValidationError("lang", "empty language code in paragraph " + p.id);
  if (p.text.empty()) throw ValidationError("text", "empty text in paragraph " + p.id);
  const std::u32string text = utf8::decode(p.text);
  const auto len = static_cast<std::int64_t>(text.size());
  for (std::size_t n = 0; n < p.mentions.size(); ++n) {
    const Mention& m = p.mentions[n];
    const std::string where = "mentions[" + std::to_string(n) + "]";
    if (m.entity_id.empty()) throw ValidationError(where + ".qid", "empty entity id in " + p.id);
    if (m.start < 0) throw ValidationError(where + ".start", "negative offset in " + p.id);
    if (m.end < m.start) throw ValidationError(where + ".end", "end < start in " + p.id);
    if (m.end >= len) throw ValidationError(where + ".end", "offset beyond text in " + p.id);
    const std::string slice = utf8::encode(std::u32string_view(text).substr(
        static_cast<std::size_t>(m.start), static_cast<std::size_t>(m.end - m.start + 1)));
    if (slice != m.surface) {
      throw ValidationError(where + ".surface", "'" + m.surface + "' does not match text slice '" +
                                                    slice + "' in " + p.id);
    }
  }
  std::stable_sort(p.mentions.begin(), p.mentions.end(), [](const Mention& a, const Mention& b) {
    if (a.start != b.start) return a.start < b.start;
    return a.end > b.end;
  });
  std::vector<Mention> kept;
  kept.reserve(p.mentions.size());
  for (auto& m : p.mentions) {
    if (!kept.empty() && m.start <= kept.back().end) {
      if (stats) ++stats->overlaps_dropped;
      continue;
    }
    kept.push_back(std::move(m));
  }
  p.mentions = std::move(kept);
  if (stats) {
    ++stats->paragraphs;
    stats->mentions += p.mentions.size();
  }
  return p;
}

Paragraph paragraph_from_json(const json& j) {
  Paragraph p;
  p.id = jsonu::get_string(j, "id");
  p.lang = jsonu::get_string(j, "lang");
  p.text = jsonu::get_string(j, "text");
  if (auto it = j.find("mentions"); it != j.end()) {
    if (!it->is_array()) throw ValidationError("mentions", "expected an array");
    for (const auto& mj : *it) {
      Mention m;
      m.entity_id = jsonu::get_string(mj, "qid");
      m.start = jsonu::get_int(mj, "start");
      m.end = jsonu::get_int(mj, "end");
      m.surface = jsonu::get_string(mj, "surface");
      p.mentions.push_back(std::move(m));
    }
  }
  return p;
}

nlohmann::ordered_json paragraph_to_json(const Paragraph& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["lang"] = p.lang;
  j["text"] = p.text;
  j["mentions"] = nlohmann::ordered_json::array();
  for (const auto& m : p.mentions) {
    nlohmann::ordered_json mj;
    mj["qid"] = m.entity_id;
    mj["start"] = m.start;
    mj["end"] = m.end;
    mj["surface"] = m.surface;
    j["mentions"].push_back(std::move(mj));
  }
  return j;
}

std::string paragraph_to_jsonl(const Paragraph& p) { return paragraph_to_json(p).dump(); }

ParagraphReader::ParagraphReader(const std::string& path) : lines_(path) {}

std::optional<Paragraph> ParagraphReader::next() {
  while (auto line = lines_.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, lines_.path(), lines_.line());
    try {
      return validate_paragraph(paragraph_from_json(j), &stats_);
    } catch (const ValidationError& e) {
      throw LineError(lines_.path(), lines_.line(), e.what());
    } catch (const ParseError& e) {
      throw LineError(lines_.path(), lines_.line(), e.what());
    }
  }
  return std::nullopt;
}

std::vector<Paragraph> load_paragraphs(const std::string& path, IngestStats* stats) {
  ParagraphReader reader(path);
  std::vector<Paragraph> out;
  while (auto p = reader.next()) out.push_back(std::move(*p));
  if (stats) *stats = reader.stats();
  return out;
}

void write_paragraphs(const std::string& path, std::span<const Paragraph> paragraphs) {
  std::string buf;
  for (const auto& p : paragraphs) {
    buf += paragraph_to_jsonl(p);
    buf += '\n';
  }
  io::write_file(path, buf);
}

std::vector<Paragraph> ingest_raw(const std::string& path, const TitleEntityMap& map,
                                  IngestStats* stats) {
  IngestStats local;
  std::vector<Paragraph> out;
  io::LineReader lines(path);
  while (auto line = lines.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, path, lines.line());
    try {
      Paragraph p;
      if (j.is_object() && j.contains("wikitext")) {
        p.id = jsonu::get_string(j, "id");
        p.lang = jsonu::get_string(j, "lang");
        ParsedWikitext parsed = parse_wikitext_links(jsonu::get_string(j, "wikitext"), p.lang, map);
        p.text = std::move(parsed.text);
        p.mentions = std::move(parsed.mentions);
      } else {
        p = paragraph_from_json(j);
      }
      out.push_back(validate_paragraph(std::move(p), &local));
    } catch (const DataError& e) {
      throw LineError(path, lines.line(), e.what());
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace wsp
