#include "wsp/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/json_util.hpp"
#include "wsp/kernels.hpp"
#include "wsp/random.hpp"
#include "wsp/utf8.hpp"

namespace wsp {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(ExampleKind k) { return k == ExampleKind::wiki ? "wiki" : "common"; }

ExampleKind parse_example_kind(const std::string& s) {
  if (s == "wiki") return ExampleKind::wiki;
  if (s == "common") return ExampleKind::common;
  throw ValidationError("kind", "unknown example kind '" + s + "'");
}

const std::set<std::string>& default_common_tags() {
  static const std::set<std::string> tags = {"ADJ",  "VERB", "DET",  "ADP", "AUX",   "PRON", "PART",
                                             "SCONJ", "NUM", "NOUN", "ADV", "CCONJ", "INTJ"};
  return tags;
}

void AnnotateConfig::validate() const {
  if (!(common_fraction >= 0.0 && common_fraction <= 1.0)) {
    throw ConfigError("annotate.common_fraction", "must be in [0, 1]");
  }
}

AnnotateCounters& AnnotateCounters::operator+=(const AnnotateCounters& o) {
  pairs += o.pairs;
  wiki_examples += o.wiki_examples;
  repeated_entity_mentions += o.repeated_entity_mentions;
  mutual_argmax_pairs += o.mutual_argmax_pairs;
  gated_out += o.gated_out;
  common_examples += o.common_examples;
  common_overlapping_wiki += o.common_overlapping_wiki;
  return *this;
}

ordered_json AnnotateCounters::to_json() const {
  ordered_json j;
  j["pairs"] = pairs;
  j["wiki_examples"] = wiki_examples;
  j["repeated_entity_mentions"] = repeated_entity_mentions;
  j["mutual_argmax_pairs"] = mutual_argmax_pairs;
  j["gated_out"] = gated_out;
  j["common_examples"] = common_examples;
  j["common_overlapping_wiki"] = common_overlapping_wiki;
  return j;
}

namespace {

/// First (lowest start) mention of the entity; counts repeats.
const Mention& first_mention(const Paragraph& p, const std::string& entity, AnnotateCounters* counters) {
  const Mention* first = nullptr;
  std::size_t seen = 0;
  for (const auto& m : p.mentions) {
    if (m.entity_id != entity) continue;
    ++seen;
    if (!first || m.start < first->start) first = &m;
  }
  if (!first) throw DataError("entity " + entity + " not mentioned in paragraph " + p.id);
  if (seen > 1 && counters) ++counters->repeated_entity_mentions;
  return *first;
}

AlignmentExample make_example(const Paragraph& x, const Paragraph& y, ExampleKind kind,
                              const std::string& entity, CharSpan sx, CharSpan sy) {
  AlignmentExample ex;
  ex.src_id = x.id;
  ex.tgt_id = y.id;
  ex.entity_id = entity;
  ex.kind = kind;
  ex.src_text = x.text;
  ex.tgt_text = y.text;
  ex.src_span = sx;
  ex.tgt_span = sy;
  return ex;
}

void check_tokens_in_text(const std::vector<TokenSpan>& tokens, const Paragraph& p) {
  const auto len = static_cast<std::int64_t>(utf8::length(p.text));
  if (!tokens.empty() && tokens.back().end >= len) {
    throw DataError("token span beyond text in paragraph " + p.id);
  }
}

bool overlaps_any_mention(const Paragraph& p, TokenSpan t) {
  for (const auto& m : p.mentions) {
    if (t.start <= m.end && m.start <= t.end) return true;
  }
  return false;
}

}  // namespace

std::vector<AlignmentExample> annotate_wiki(const ParagraphPair& pair, const Paragraph& src,
                                            const Paragraph& tgt, AnnotateCounters* counters) {
  const Mention& ms = first_mention(src, pair.entity_id, counters);
  const Mention& mt = first_mention(tgt, pair.entity_id, counters);
  const CharSpan ss{ms.start, ms.end};
  const CharSpan st{mt.start, mt.end};
  std::vector<AlignmentExample> out;
  out.push_back(make_example(src, tgt, ExampleKind::wiki, pair.entity_id, ss, st));
  out.push_back(make_example(tgt, src, ExampleKind::wiki, pair.entity_id, st, ss));
  if (counters) counters->wiki_examples += out.size();
  return out;
}

SimilarityMatrix similarity_matrix(const TokenEmbeddings& ex, const TokenEmbeddings& ey) {
  if (ex.tokens.empty() || ey.tokens.empty()) {
    throw DataError("similarity matrix: empty token set (" + ex.id + ", " + ey.id + ")");
  }
  if (ex.dim != ey.dim) {
    throw DataError("similarity matrix: dimension mismatch " + std::to_string(ex.dim) + " vs " +
                    std::to_string(ey.dim) + " (" + ex.id + ", " + ey.id + ")");
  }
  SimilarityMatrix s;
  s.rows = ex.tokens.size();
  s.cols = ey.tokens.size();
  s.values = kernels::par::cosine_matrix(ex.vectors, s.rows, ey.vectors, s.cols, ex.dim);
  return s;
}

std::vector<TokenPair> mutual_argmax(const SimilarityMatrix& s) {
  std::vector<TokenPair> out;
  if (s.rows == 0 || s.cols == 0) return out;
  const auto best_col = kernels::par::row_argmax(s.values, s.rows, s.cols);
  const auto best_row = kernels::par::col_argmax(s.values, s.rows, s.cols);
  for (std::size_t a = 0; a < s.rows; ++a) {
    if (best_row[best_col[a]] == a) out.emplace_back(a, best_col[a]);
  }
  return out;
}

std::vector<TokenPair> pos_gate(std::span<const TokenPair> pairs, const PosTags& tags_x,
                                const PosTags& tags_y, const std::set<std::string>& common_tags) {
  if (tags_x.tags.size() != tags_x.tokens.size() || tags_y.tags.size() != tags_y.tokens.size()) {
    throw DataError("POS tag list length does not match token list (" + tags_x.id + ", " + tags_y.id + ")");
  }
  std::vector<TokenPair> out;
  for (const auto& [a, b] : pairs) {
    if (a >= tags_x.tags.size() || b >= tags_y.tags.size()) {
      throw DataError("token index beyond POS tag list (" + tags_x.id + ", " + tags_y.id + ")");
    }
    if (common_tags.count(tags_x.tags[a]) || common_tags.count(tags_y.tags[b])) out.emplace_back(a, b);
  }
  return out;
}

AnnotationSidecars::AnnotationSidecars(std::vector<TokenEmbeddings> embeddings, std::vector<PosTags> tags) {
  for (auto& e : embeddings) {
    const std::string id = e.id;
    embeddings_.insert_or_assign(id, std::move(e));
  }
  for (auto& t : tags) {
    const std::string id = t.id;
    tags_.insert_or_assign(id, std::move(t));
  }
}

const TokenEmbeddings& AnnotationSidecars::embeddings(const std::string& id) const {
  auto it = embeddings_.find(id);
  if (it == embeddings_.end()) throw DataError("no token embeddings for paragraph " + id);
  return it->second;
}

const PosTags& AnnotationSidecars::tags(const std::string& id) const {
  auto it = tags_.find(id);
  if (it == tags_.end()) throw DataError("no POS tags for paragraph " + id);
  return it->second;
}

std::vector<AlignmentExample> annotate_common(const ParagraphPair& pair, const Paragraph& src,
                                              const Paragraph& tgt, const TokenEmbeddings& ex,
                                              const TokenEmbeddings& ey, const PosTags& tx,
                                              const PosTags& ty, const AnnotateConfig& cfg,
                                              AnnotateCounters* counters) {
  (void)pair;
  if (tx.tokens != ex.tokens) throw DataError("POS tokens differ from embedding tokens for " + src.id);
  if (ty.tokens != ey.tokens) throw DataError("POS tokens differ from embedding tokens for " + tgt.id);
  check_tokens_in_text(ex.tokens, src);
  check_tokens_in_text(ey.tokens, tgt);

  const auto matches = mutual_argmax(similarity_matrix(ex, ey));
  const auto kept = pos_gate(matches, tx, ty, cfg.common_tags);

  std::vector<AlignmentExample> out;
  out.reserve(2 * kept.size());
  std::size_t overlapping = 0;
  for (const auto& [a, b] : kept) {
    const TokenSpan ta = ex.tokens[a];
    const TokenSpan tb = ey.tokens[b];
    if (overlaps_any_mention(src, ta) || overlaps_any_mention(tgt, tb)) ++overlapping;
    const CharSpan sa{ta.start, ta.end};
    const CharSpan sb{tb.start, tb.end};
    out.push_back(make_example(src, tgt, ExampleKind::common, {}, sa, sb));
    out.push_back(make_example(tgt, src, ExampleKind::common, {}, sb, sa));
  }
  if (counters) {
    counters->mutual_argmax_pairs += matches.size();
    counters->gated_out += matches.size() - kept.size();
    counters->common_examples += out.size();
    counters->common_overlapping_wiki += overlapping;
  }
  return out;
}

std::vector<AlignmentExample> annotate_common(const ParagraphPair& pair, const Paragraph& src,
                                              const Paragraph& tgt, const AnnotationSidecars& sidecars,
                                              const AnnotateConfig& cfg, AnnotateCounters* counters) {
  return annotate_common(pair, src, tgt, sidecars.embeddings(src.id), sidecars.embeddings(tgt.id),
                         sidecars.tags(src.id), sidecars.tags(tgt.id), cfg, counters);
}

ordered_json MergeStats::to_json() const {
  ordered_json j;
  j["wiki"] = wiki;
  j["common_groups"] = common_groups;
  j["common_groups_kept"] = common_groups_kept;
  j["common_kept"] = common_kept;
  j["duplicates_removed"] = duplicates_removed;
  j["total"] = total;
  return j;
}

namespace {

std::string unordered_pair_key(const AlignmentExample& ex) {
  return ex.src_id < ex.tgt_id ? ex.src_id + '\x1f' + ex.tgt_id : ex.tgt_id + '\x1f' + ex.src_id;
}

auto content_key(const AlignmentExample& ex) {
  return std::tie(ex.src_text, ex.tgt_text, ex.src_span, ex.tgt_span);
}

}  // namespace

std::vector<AlignmentExample> merge_datasets(std::span<const AlignmentExample> d_wiki,
                                             std::span<const AlignmentExample> d_com,
                                             double common_fraction, std::uint64_t seed,
                                             MergeStats* stats) {
  if (!(common_fraction >= 0.0 && common_fraction <= 1.0)) {
    throw ConfigError("annotate.common_fraction", "must be in [0, 1]");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < d_com.size(); ++i) groups[unordered_pair_key(d_com[i])].push_back(i);

  const auto n_groups = groups.size();
  const auto n_keep = static_cast<std::size_t>(std::llround(common_fraction * static_cast<double>(n_groups)));
  const auto picked = sample_indices(n_groups, n_keep, derive_seed(seed, "merge/common"));
  std::vector<bool> keep_example(d_com.size(), false);
  {
    std::size_t g = 0;
    std::size_t next = 0;
    for (const auto& [key, members] : groups) {
      if (next < picked.size() && picked[next] == g) {
        for (auto i : members) keep_example[i] = true;
        ++next;
      }
      ++g;
    }
  }

  MergeStats st;
  st.wiki = d_wiki.size();
  st.common_groups = n_groups;
  st.common_groups_kept = picked.size();

  std::vector<AlignmentExample> out;
  std::set<std::tuple<const std::string&, const std::string&, const CharSpan&, const CharSpan&>> seen;
  auto add = [&](const AlignmentExample& ex) {
    if (!seen.insert(content_key(ex)).second) {
      ++st.duplicates_removed;
      return false;
    }
    out.push_back(ex);
    return true;
  };
  out.reserve(d_wiki.size() + d_com.size());
  for (const auto& ex : d_wiki) add(ex);
  for (std::size_t i = 0; i < d_com.size(); ++i) {
    if (keep_example[i] && add(d_com[i])) ++st.common_kept;
  }
  st.total = out.size();
  if (stats) *stats = st;
  return out;
}

std::string insert_markers(std::string_view text, std::size_t i, std::size_t j) {
  const std::u32string cps = utf8::decode(text);
  if (i > j || j >= cps.size()) {
    throw DataError("marker span (" + std::to_string(i) + ", " + std::to_string(j) +
                    ") outside text of length " + std::to_string(cps.size()));
  }
  std::u32string_view all(cps);
  std::u32string_view prefix = all.substr(0, i);
  while (!prefix.empty() && utf8::is_space(prefix.back())) prefix.remove_suffix(1);
  std::u32string_view suffix = all.substr(j + 1);
  while (!suffix.empty() && utf8::is_space(suffix.front())) suffix.remove_prefix(1);

  std::string out = utf8::encode(prefix);
  if (!out.empty()) out += ' ';
  out += kSpanMarker;
  out += ' ';
  out += utf8::encode(all.substr(i, j - i + 1));
  out += ' ';
  out += kSpanMarker;
  if (!suffix.empty()) {
    out += ' ';
    out += utf8::encode(suffix);
  }
  return out;
}

void sort_examples(std::vector<AlignmentExample>& examples) {
  std::stable_sort(examples.begin(), examples.end(), [](const AlignmentExample& a, const AlignmentExample& b) {
    return std::tie(a.src_id, a.tgt_id, a.kind, a.src_span, a.tgt_span) <
           std::tie(b.src_id, b.tgt_id, b.kind, b.src_span, b.tgt_span);
  });
}

ordered_json squad_document(std::span<const AlignmentExample> dataset) {
  std::vector<AlignmentExample> sorted(dataset.begin(), dataset.end());
  sort_examples(sorted);
  ordered_json doc;
  doc["version"] = "wsp-1";
  doc["data"] = ordered_json::array();
  for (const auto& ex : sorted) {
    const auto si = static_cast<std::size_t>(ex.src_span.start);
    const auto sj = static_cast<std::size_t>(ex.src_span.end);
    const std::string answer = utf8::slice(ex.tgt_text, static_cast<std::size_t>(ex.tgt_span.start),
                                           static_cast<std::size_t>(ex.tgt_span.end));
    if (answer.empty()) throw DataError("example span outside target text: " + ex.src_id + " -> " + ex.tgt_id);
    ordered_json rec;
    rec["id"] = ex.src_id + "|" + ex.tgt_id + "|" + to_string(ex.kind) + "|" + std::to_string(si) + "-" +
                std::to_string(sj) + "|" + std::to_string(ex.tgt_span.start) + "-" +
                std::to_string(ex.tgt_span.end);
    rec["question"] = insert_markers(ex.src_text, si, sj);
    rec["context"] = ex.tgt_text;
    ordered_json ans;
    ans["text"] = answer;
    ans["answer_start"] = ex.tgt_span.start;
    rec["answers"] = ordered_json::array({ans});
    rec["kind"] = to_string(ex.kind);
    rec["src_id"] = ex.src_id;
    rec["tgt_id"] = ex.tgt_id;
    if (!ex.entity_id.empty()) rec["qid"] = ex.entity_id;
    doc["data"].push_back(std::move(rec));
  }
  return doc;
}

void emit_squad(std::span<const AlignmentExample> dataset, const std::string& path) {
  io::write_file(path, squad_document(dataset).dump() + "\n");
}

ordered_json example_to_json(const AlignmentExample& ex) {
  ordered_json j;
  j["src_id"] = ex.src_id;
  j["tgt_id"] = ex.tgt_id;
  j["qid"] = ex.entity_id;
  j["kind"] = to_string(ex.kind);
  j["src_text"] = ex.src_text;
  j["tgt_text"] = ex.tgt_text;
  j["src_span"] = {ex.src_span.start, ex.src_span.end};
  j["tgt_span"] = {ex.tgt_span.start, ex.tgt_span.end};
  return j;
}

namespace {

CharSpan span_from_json(const json& j, const std::string& key) {
  const json& v = jsonu::require(j, key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw ValidationError(key, "expected [start, end]");
  }
  CharSpan s{v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
  if (s.start < 0 || s.end < s.start) throw ValidationError(key, "bad span");
  return s;
}

}  // namespace

AlignmentExample example_from_json(const json& j) {
  AlignmentExample ex;
  ex.src_id = jsonu::get_string(j, "src_id");
  ex.tgt_id = jsonu::get_string(j, "tgt_id");
  ex.entity_id = jsonu::get_string(j, "qid");
  ex.kind = parse_example_kind(jsonu::get_string(j, "kind"));
  ex.src_text = jsonu::get_string(j, "src_text");
  ex.tgt_text = jsonu::get_string(j, "tgt_text");
  ex.src_span = span_from_json(j, "src_span");
  ex.tgt_span = span_from_json(j, "tgt_span");
  if (ex.src_span.end >= static_cast<std::int64_t>(utf8::length(ex.src_text))) {
    throw ValidationError("src_span", "beyond source text");
  }
  if (ex.tgt_span.end >= static_cast<std::int64_t>(utf8::length(ex.tgt_text))) {
    throw ValidationError("tgt_span", "beyond target text");
  }
  return ex;
}

void write_examples(const std::string& path, std::span<const AlignmentExample> examples) {
  std::string buf;
  for (const auto& ex : examples) {
    buf += example_to_json(ex).dump();
    buf += '\n';
  }
  io::write_file(path, buf);
}

std::vector<AlignmentExample> load_examples(const std::string& path) {
  std::vector<AlignmentExample> out;
  io::LineReader lines(path);
  while (auto line = lines.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, path, lines.line());
    try {
      out.push_back(example_from_json(j));
    } catch (const ValidationError& e) {
      throw LineError(path, lines.line(), e.what());
    }
  }
  return out;
}

}  // namespace wsp
