#include "wsp/pairing.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "wsp/error.hpp"
#include "wsp/json_util.hpp"
#include "wsp/parallel.hpp"
#include "wsp/random.hpp"

namespace wsp {

using nlohmann::json;
using nlohmann::ordered_json;

const std::string& EntityIndex::lang(const std::string& paragraph_id) const {
  auto it = lang_of.find(paragraph_id);
  if (it == lang_of.end()) throw DataError("paragraph not in index: " + paragraph_id);
  return it->second;
}

ordered_json EntityIndex::to_json() const {
  ordered_json j;
  j["paragraphs"] = ordered_json::array();
  for (const auto& id : paragraph_order) j["paragraphs"].push_back({id, lang_of.at(id)});
  j["entities"] = ordered_json::object();
  for (const auto& [e, ids] : postings) j["entities"][e] = ids;
  return j;
}

EntityIndex EntityIndex::from_json(const json& j) {
  EntityIndex index;
  for (const auto& entry : jsonu::require(j, "paragraphs")) {
    if (!entry.is_array() || entry.size() != 2) throw ValidationError("paragraphs", "expected [id, lang]");
    const auto id = entry[0].get<std::string>();
    index.lang_of[id] = entry[1].get<std::string>();
    index.paragraph_order.push_back(id);
  }
  for (const auto& [e, ids] : jsonu::require(j, "entities").items()) {
    auto& list = index.postings[e];
    for (const auto& id : ids) {
      list.push_back(id.get<std::string>());
      if (!index.lang_of.count(list.back())) {
        throw ValidationError("entities", "unknown paragraph " + list.back() + " under " + e);
      }
    }
  }
  return index;
}

EntityIndex build_index(std::span<const Paragraph> paragraphs) {
  EntityIndex index;
  index.paragraph_order.reserve(paragraphs.size());
  for (const auto& p : paragraphs) {
    if (!index.lang_of.emplace(p.id, p.lang).second) {
      throw DataError("duplicate paragraph id: " + p.id);
    }
    index.paragraph_order.push_back(p.id);
  }

  // Contiguous shards merged in shard order give the sequential result for
  // any shard count.
  constexpr std::size_t kShardSize = 4096;
  const std::size_t num_shards = (paragraphs.size() + kShardSize - 1) / kShardSize;
  std::vector<std::map<std::string, std::vector<std::string>>> shards(num_shards);
  parallel_for(num_shards, [&](std::size_t s) {
    const std::size_t begin = s * kShardSize;
    const std::size_t end = std::min(paragraphs.size(), begin + kShardSize);
    auto& local = shards[s];
    for (std::size_t i = begin; i < end; ++i) {
      const Paragraph& p = paragraphs[i];
      std::set<std::string_view> seen;
      for (const auto& m : p.mentions) {
        if (seen.insert(m.entity_id).second) local[m.entity_id].push_back(p.id);
      }
    }
  });
  for (auto& shard : shards) {
    for (auto& [e, ids] : shard) {
      auto& list = index.postings[e];
      list.insert(list.end(), std::make_move_iterator(ids.begin()), std::make_move_iterator(ids.end()));
    }
  }
  return index;
}

PairingMode parse_pairing_mode(const std::string& s) {
  if (s == "any") return PairingMode::any;
  if (s == "cross_lingual") return PairingMode::cross_lingual;
  if (s == "monolingual") return PairingMode::monolingual;
  if (s == "english_centric") return PairingMode::english_centric;
  throw ConfigError("pairing.mode", "unknown mode '" + s + "'");
}

std::string to_string(PairingMode m) {
  switch (m) {
    case PairingMode::any: return "any";
    case PairingMode::cross_lingual: return "cross_lingual";
    case PairingMode::monolingual: return "monolingual";
    case PairingMode::english_centric: return "english_centric";
  }
  return "?";
}

ordered_json CollectStats::to_json() const {
  ordered_json j;
  j["entities"] = entities;
  j["entities_with_pairs"] = entities_with_pairs;
  j["entities_skipped_monolingual"] = entities_skipped_monolingual;
  j["entities_capped"] = entities_capped;
  j["combinations"] = combinations;
  j["after_mode_filter"] = after_mode_filter;
  j["after_cap"] = after_cap;
  j["duplicates_dropped"] = duplicates_dropped;
  j["emitted"] = emitted;
  return j;
}

namespace {

struct EntityPairs {
  std::vector<ParagraphPair> pairs;
  std::size_t combinations = 0;
  std::size_t after_mode = 0;
  bool skipped_monolingual = false;
  bool capped = false;
};

EntityPairs pairs_for_entity(const EntityIndex& index, const std::string& entity,
                             const std::vector<std::string>& ids, const PairingOptions& opts) {
  EntityPairs out;
  const std::size_t n = ids.size();
  out.combinations = n < 2 ? 0 : n * (n - 1) / 2;
  if (n < 2) return out;

  if (opts.mode == PairingMode::monolingual) {
    bool other_lang = false;
    for (const auto& id : ids) {
      const auto& l = index.lang(id);
      if (opts.mono_lang ? l != *opts.mono_lang : l != index.lang(ids.front())) {
        other_lang = true;
        break;
      }
    }
    if (!other_lang) {
      out.skipped_monolingual = true;
      return out;
    }
  }

  std::vector<ParagraphPair> candidates;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::string* lo = &ids[a];
      const std::string* hi = &ids[b];
      if (*hi < *lo) std::swap(lo, hi);
      if (*lo == *hi) continue;
      const std::string& lang_lo = index.lang(*lo);
      const std::string& lang_hi = index.lang(*hi);
      bool keep = true;
      bool swap_sides = false;
      switch (opts.mode) {
        case PairingMode::any:
          break;
        case PairingMode::cross_lingual:
          keep = lang_lo != lang_hi;
          break;
        case PairingMode::monolingual:
          keep = lang_lo == lang_hi && (!opts.mono_lang || lang_lo == *opts.mono_lang);
          break;
        case PairingMode::english_centric: {
          const bool en_lo = lang_lo == opts.english_code;
          const bool en_hi = lang_hi == opts.english_code;
          keep = en_lo != en_hi;
          // canonical order puts lo first; flip when English lands on the wrong side
          swap_sides = opts.english_as_target ? en_lo : en_hi;
          break;
        }
      }
      if (!keep) continue;
      ParagraphPair p{*lo, *hi, entity, lang_lo, lang_hi};
      if (swap_sides) {
        std::swap(p.src_id, p.tgt_id);
        std::swap(p.src_lang, p.tgt_lang);
      }
      candidates.push_back(std::move(p));
    }
  }
  auto canonical = [](const ParagraphPair& p) {
    return p.src_id < p.tgt_id ? std::tie(p.src_id, p.tgt_id) : std::tie(p.tgt_id, p.src_id);
  };
  std::sort(candidates.begin(), candidates.end(),
            [&](const ParagraphPair& x, const ParagraphPair& y) { return canonical(x) < canonical(y); });
  out.after_mode = candidates.size();

  if (opts.cap_per_entity && candidates.size() > *opts.cap_per_entity) {
    out.capped = true;
    const auto keep = sample_indices(candidates.size(), *opts.cap_per_entity,
                                     derive_seed(opts.seed, "pairing/" + entity));
    std::vector<ParagraphPair> sampled;
    sampled.reserve(keep.size());
    for (auto i : keep) sampled.push_back(std::move(candidates[i]));
    candidates = std::move(sampled);
  }
  out.pairs = std::move(candidates);
  return out;
}

}  // namespace

PairingResult collect_pairs(const EntityIndex& index, const PairingOptions& opts) {
  if (opts.cap_per_entity && *opts.cap_per_entity == 0) {
    throw ConfigError("pairing.cap_per_entity", "must be positive");
  }
  std::vector<const std::pair<const std::string, std::vector<std::string>>*> entities;
  entities.reserve(index.postings.size());
  for (const auto& kv : index.postings) entities.push_back(&kv);

  std::vector<EntityPairs> per_entity(entities.size());
  parallel_for(entities.size(), [&](std::size_t e) {
    per_entity[e] = pairs_for_entity(index, entities[e]->first, entities[e]->second, opts);
  });

  PairingResult result;
  CollectStats& st = result.stats;
  st.entities = entities.size();
  std::unordered_set<std::string> seen;
  for (auto& ep : per_entity) {
    st.combinations += ep.combinations;
    st.after_mode_filter += ep.after_mode;
    st.after_cap += ep.pairs.size();
    if (ep.skipped_monolingual) ++st.entities_skipped_monolingual;
    if (ep.capped) ++st.entities_capped;
    bool any = false;
    for (auto& p : ep.pairs) {
      const std::string key = p.src_id < p.tgt_id ? p.src_id + '\x1f' + p.tgt_id : p.tgt_id + '\x1f' + p.src_id;
      if (!seen.insert(key).second) {
        ++st.duplicates_dropped;
        continue;
      }
      any = true;
      result.pairs.push_back(std::move(p));
    }
    if (any) ++st.entities_with_pairs;
  }
  st.emitted = result.pairs.size();
  return result;
}

ordered_json PairStats::to_json() const {
  ordered_json j;
  j["pairs"] = pairs;
  j["entities"] = entities;
  j["by_lang_pair"] = ordered_json::object();
  for (const auto& [k, v] : by_lang_pair) j["by_lang_pair"][k] = v;
  j["by_entity"] = ordered_json::object();
  for (const auto& [k, v] : by_entity) j["by_entity"][k] = v;
  return j;
}

PairStats pair_stats(std::span<const ParagraphPair> pairs) {
  PairStats st;
  st.pairs = pairs.size();
  for (const auto& p : pairs) {
    ++st.by_lang_pair[p.src_lang + "-" + p.tgt_lang];
    ++st.by_entity[p.entity_id];
  }
  st.entities = st.by_entity.size();
  return st;
}

std::string pair_to_jsonl(const ParagraphPair& p) {
  ordered_json j;
  j["src"] = p.src_id;
  j["tgt"] = p.tgt_id;
  j["qid"] = p.entity_id;
  j["src_lang"] = p.src_lang;
  j["tgt_lang"] = p.tgt_lang;
  return j.dump();
}

ParagraphPair pair_from_json(const json& j) {
  ParagraphPair p;
  p.src_id = jsonu::get_string(j, "src");
  p.tgt_id = jsonu::get_string(j, "tgt");
  p.entity_id = jsonu::get_string(j, "qid");
  p.src_lang = jsonu::get_string(j, "src_lang");
  p.tgt_lang = jsonu::get_string(j, "tgt_lang");
  if (p.src_id == p.tgt_id) throw ValidationError("tgt", "pair of a paragraph with itself: " + p.src_id);
  return p;
}

std::vector<ParagraphPair> load_pairs(const std::string& path) {
  std::vector<ParagraphPair> out;
  io::LineReader lines(path);
  while (auto line = lines.next()) {
    if (line->empty()) continue;
    const json j = jsonu::parse_line(*line, path, lines.line());
    try {
      out.push_back(pair_from_json(j));
    } catch (const ValidationError& e) {
      throw LineError(path, lines.line(), e.what());
    }
  }
  return out;
}

void write_pairs(const std::string& path, std::span<const ParagraphPair> pairs) {
  std::string buf;
  for (const auto& p : pairs) {
    buf += pair_to_jsonl(p);
    buf += '\n';
  }
  io::write_file(path, buf);
}

}  // namespace wsp
