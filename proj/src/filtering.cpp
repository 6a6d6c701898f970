#include "wsp/filtering.hpp"

#include <cmath>

#include "wsp/error.hpp"
#include "wsp/kernels.hpp"
#include "wsp/parallel.hpp"
#include "wsp/utf8.hpp"

namespace wsp {

void FilterConfig::validate() const {
  if (min_subwords <= 0) throw ConfigError("filter.min_subwords", "must be positive");
  if (max_subwords < min_subwords) throw ConfigError("filter.min_subwords", "must not exceed max_subwords");
  if (!std::isfinite(sim_threshold) || sim_threshold < -1.0 || sim_threshold > 1.0) {
    throw ConfigError("filter.sim_threshold", "must be a finite value in [-1, 1]");
  }
}

bool is_unspaced_script(char32_t c) {
  return (c >= 0x2E80 && c <= 0x2FDF) ||   // CJK radicals
         (c >= 0x3040 && c <= 0x30FF) ||   // Hiragana, Katakana
         (c >= 0x3100 && c <= 0x31FF) ||   // Bopomofo, kana ext
         (c >= 0x3400 && c <= 0x4DBF) ||   // CJK ext A
         (c >= 0x4E00 && c <= 0x9FFF) ||   // CJK unified
         (c >= 0xAC00 && c <= 0xD7AF) ||   // Hangul syllables
         (c >= 0xF900 && c <= 0xFAFF) ||   // CJK compatibility
         (c >= 0xFF66 && c <= 0xFF9F) ||   // half-width kana
         (c >= 0x0E00 && c <= 0x0EFF) ||   // Thai, Lao
         (c >= 0x1000 && c <= 0x109F) ||   // Myanmar
         (c >= 0x1780 && c <= 0x17FF) ||   // Khmer
         (c >= 0x20000 && c <= 0x2FA1F);   // CJK ext B+
}

int fallback_subword_count(std::string_view text) {
  int n = 0;
  bool in_run = false;
  for (char32_t c : utf8::decode(text)) {
    if (utf8::is_space(c)) {
      in_run = false;
    } else if (is_unspaced_script(c)) {
      ++n;
      in_run = false;
    } else if (!in_run) {
      ++n;
      in_run = true;
    }
  }
  return std::max(n, 1);
}

int SubwordCounter::count(const Paragraph& p) const {
  if (auto it = sidecar_.find(p.id); it != sidecar_.end()) {
    if (it->second < 1) throw DataError("subword counter: non-positive count for paragraph " + p.id);
    return it->second;
  }
  try {
    return fallback_subword_count(p.text);
  } catch (const DataError& e) {
    throw DataError("subword counter failed for paragraph " + p.id + ": " + e.what());
  }
}

namespace {

int count_for(const std::unordered_map<std::string, int>& counts, const std::string& id) {
  auto it = counts.find(id);
  if (it == counts.end()) throw DataError("length filter: no subword count for paragraph " + id);
  return it->second;
}

const std::vector<float>& embedding_for(const EmbeddingTable& embs, const std::string& id) {
  const auto* v = embs.find(id);
  if (!v) throw DataError("similarity filter: no embedding for paragraph " + id);
  return *v;
}

}  // namespace

bool length_filter(const ParagraphPair& pair, const std::unordered_map<std::string, int>& counts,
                   const FilterConfig& cfg) {
  const int a = count_for(counts, pair.src_id);
  const int b = count_for(counts, pair.tgt_id);
  auto ok = [&](int n) { return n >= cfg.min_subwords && n <= cfg.max_subwords; };
  return ok(a) && ok(b);
}

double cosine(std::span<const float> u, std::span<const float> v) { return kernels::cosine(u, v); }

bool similarity_filter(const ParagraphPair& pair, const EmbeddingTable& embs, const FilterConfig& cfg) {
  const auto& u = embedding_for(embs, pair.src_id);
  const auto& v = embedding_for(embs, pair.tgt_id);
  return cosine(u, v) > cfg.sim_threshold;
}

nlohmann::ordered_json FilterStats::to_json() const {
  nlohmann::ordered_json j;
  j["input"] = input;
  j["dropped_length"] = dropped_length;
  j["dropped_similarity"] = dropped_similarity;
  j["kept"] = kept;
  return j;
}

std::vector<ParagraphPair> filter_pairs(std::span<const ParagraphPair> pairs,
                                        const std::unordered_map<std::string, int>& counts,
                                        const EmbeddingTable* embs, const FilterConfig& cfg,
                                        FilterStats* stats) {
  cfg.validate();
  enum : char { kKeep, kDropLength, kDropSim };
  std::vector<char> verdict(pairs.size(), kKeep);
  std::vector<std::string> errors(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    try {
      if (!length_filter(pairs[i], counts, cfg)) {
        verdict[i] = kDropLength;
      } else if (embs && !similarity_filter(pairs[i], *embs, cfg)) {
        verdict[i] = kDropSim;
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  FilterStats st;
  st.input = pairs.size();
  std::vector<ParagraphPair> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!errors[i].empty()) throw DataError(errors[i]);
    if (verdict[i] == kDropLength) {
      ++st.dropped_length;
    } else if (verdict[i] == kDropSim) {
      ++st.dropped_similarity;
    } else {
      kept.push_back(pairs[i]);
    }
  }
  st.kept = kept.size();
  if (stats) *stats = st;
  return kept;
}

}  // namespace wsp
