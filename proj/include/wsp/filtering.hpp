#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "wsp/corpus.hpp"
#include "wsp/pairing.hpp"
#include "wsp/sidecar.hpp"

namespace wsp {

struct FilterConfig {
  int min_subwords = 30;
  int max_subwords = 158;
  double sim_threshold = 0.75;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Built-in subword estimate: each maximal run of non-space characters
/// counts once, except characters of scripts written without spaces
/// (Han, kana, Hangul, Thai, ...), which count one each. Never below 1.
int fallback_subword_count(std::string_view text);

bool is_unspaced_script(char32_t c);

/// Subword counts from the tokenizer sidecar, falling back to the built-in
/// estimate for ids the sidecar does not cover.
class SubwordCounter {
 public:
  SubwordCounter() = default;
  explicit SubwordCounter(std::unordered_map<std::string, int> sidecar) : sidecar_(std::move(sidecar)) {}

  /// Throws DataError naming the paragraph on a non-positive sidecar count.
  int count(const Paragraph& p) const;

 private:
  std::unordered_map<std::string, int> sidecar_;
};

/// Keep iff both paragraphs have min_subwords <= count <= max_subwords.
bool length_filter(const ParagraphPair& pair, const std::unordered_map<std::string, int>& counts,
                   const FilterConfig& cfg);

double cosine(std::span<const float> u, std::span<const float> v);

/// Keep iff cosine(src, tgt) > sim_threshold.
bool similarity_filter(const ParagraphPair& pair, const EmbeddingTable& embs, const FilterConfig& cfg);

struct FilterStats {
  std::size_t input = 0;
  std::size_t dropped_length = 0;
  std::size_t dropped_similarity = 0;
  std::size_t kept = 0;

  nlohmann::ordered_json to_json() const;
};

/// Length filter then similarity filter; when `embs` is null only the length
/// filter runs. Order of the surviving pairs is preserved.
std::vector<ParagraphPair> filter_pairs(std::span<const ParagraphPair> pairs,
                                        const std::unordered_map<std::string, int>& counts,
                                        const EmbeddingTable* embs, const FilterConfig& cfg,
                                        FilterStats* stats = nullptr);

}  // namespace wsp
