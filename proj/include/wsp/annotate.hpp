#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "wsp/corpus.hpp"
#include "wsp/pairing.hpp"
#include "wsp/sidecar.hpp"

namespace wsp {

enum class ExampleKind { wiki, common };

std::string to_string(ExampleKind k);
ExampleKind parse_example_kind(const std::string& s);

/// Inclusive character span in Unicode scalar offsets.
struct CharSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool operator==(const CharSpan&) const = default;
  auto operator<=>(const CharSpan&) const = default;
};

/// One weakly-supervised record (X, Y, i, j, k, l).
struct AlignmentExample {
  std::string src_id;
  std::string tgt_id;
  std::string entity_id;  // set for wiki examples
  ExampleKind kind = ExampleKind::wiki;
  std::string src_text;
  std::string tgt_text;
  CharSpan src_span;
  CharSpan tgt_span;

  bool operator==(const AlignmentExample&) const = default;
};

struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

using TokenPair = std::pair<std::size_t, std::size_t>;

/// Universal POS tags treated as common words.
const std::set<std::string>& default_common_tags();

struct AnnotateConfig {
  std::set<std::string> common_tags = default_common_tags();
  double common_fraction = 0.1;

  void validate() const;
};

struct AnnotateCounters {
  std::size_t pairs = 0;
  std::size_t wiki_examples = 0;
  std::size_t repeated_entity_mentions = 0;
  std::size_t mutual_argmax_pairs = 0;
  std::size_t gated_out = 0;
  std::size_t common_examples = 0;
  std::size_t common_overlapping_wiki = 0;

  AnnotateCounters& operator+=(const AnnotateCounters& o);
  nlohmann::ordered_json to_json() const;
};

/// Aligns the first mention of the shared entity on each side; emits both
/// directions. Throws DataError when either side lacks the entity.
std::vector<AlignmentExample> annotate_wiki(const ParagraphPair& pair, const Paragraph& src,
                                            const Paragraph& tgt, AnnotateCounters* counters = nullptr);

/// S[a][b] = cosine(x_a, y_b).
SimilarityMatrix similarity_matrix(const TokenEmbeddings& ex, const TokenEmbeddings& ey);

/// (a, b) iff b is row a's argmax and a is column b's argmax; lowest index
/// wins ties. Sorted by a.
std::vector<TokenPair> mutual_argmax(const SimilarityMatrix& s);

/// Keeps (a, b) iff either token's tag is a common tag.
std::vector<TokenPair> pos_gate(std::span<const TokenPair> pairs, const PosTags& tags_x,
                                const PosTags& tags_y, const std::set<std::string>& common_tags);

/// Token embeddings and POS tags keyed by paragraph id.
class AnnotationSidecars {
 public:
  AnnotationSidecars() = default;
  AnnotationSidecars(std::vector<TokenEmbeddings> embeddings, std::vector<PosTags> tags);

  /// Throws DataError naming the paragraph when absent.
  const TokenEmbeddings& embeddings(const std::string& id) const;
  const PosTags& tags(const std::string& id) const;

 private:
  std::unordered_map<std::string, TokenEmbeddings> embeddings_;
  std::unordered_map<std::string, PosTags> tags_;
};

std::vector<AlignmentExample> annotate_common(const ParagraphPair& pair, const Paragraph& src,
                                              const Paragraph& tgt, const TokenEmbeddings& ex,
                                              const TokenEmbeddings& ey, const PosTags& tx,
                                              const PosTags& ty, const AnnotateConfig& cfg,
                                              AnnotateCounters* counters = nullptr);

std::vector<AlignmentExample> annotate_common(const ParagraphPair& pair, const Paragraph& src,
                                              const Paragraph& tgt, const AnnotationSidecars& sidecars,
                                              const AnnotateConfig& cfg,
                                              AnnotateCounters* counters = nullptr);

struct MergeStats {
  std::size_t wiki = 0;
  std::size_t common_groups = 0;
  std::size_t common_groups_kept = 0;
  std::size_t common_kept = 0;
  std::size_t duplicates_removed = 0;
  std::size_t total = 0;

  nlohmann::ordered_json to_json() const;
};

/// D = d_wiki + the common examples of a seeded sample of
/// round(fraction * #pairs) paragraph pairs, exact duplicates removed.
std::vector<AlignmentExample> merge_datasets(std::span<const AlignmentExample> d_wiki,
                                             std::span<const AlignmentExample> d_com,
                                             double common_fraction, std::uint64_t seed,
                                             MergeStats* stats = nullptr);

inline constexpr std::string_view kSpanMarker = "¶";

/// Surrounds the inclusive span [i, j] with the marker, one space on each
/// side of each marker; whitespace next to a marker is collapsed.
std::string insert_markers(std::string_view text, std::size_t i, std::size_t j);

/// Orders by (src_id, tgt_id, kind, src span, tgt span).
void sort_examples(std::vector<AlignmentExample>& examples);

/// SQuAD-shaped dataset {"version": "wsp-1", "data": [...]}.
nlohmann::ordered_json squad_document(std::span<const AlignmentExample> dataset);
void emit_squad(std::span<const AlignmentExample> dataset, const std::string& path);

nlohmann::ordered_json example_to_json(const AlignmentExample& ex);
AlignmentExample example_from_json(const nlohmann::json& j);
void write_examples(const std::string& path, std::span<const AlignmentExample> examples);
std::vector<AlignmentExample> load_examples(const std::string& path);

}  // namespace wsp
