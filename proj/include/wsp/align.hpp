#pragma once

// Bidirectional inference: per-word span queries in each direction, word
// level probability matrices, averaging and thresholding.

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wsp/spanpred.hpp"

namespace wsp {

/// Inclusive character spans of the words of one sentence, sorted and
/// non-overlapping.
struct WordBoundaries {
  std::vector<std::pair<std::size_t, std::size_t>> spans;

  std::size_t size() const { return spans.size(); }
  /// Throws DataError if spans are unsorted, overlapping, or past text_len.
  void validate(std::size_t text_len) const;
};

/// Maximal runs of non-space characters.
WordBoundaries whitespace_boundaries(std::string_view text);

/// Pre-tokenized sentence: the text is the tokens joined by single spaces.
struct TokenizedSentence {
  std::string text;
  WordBoundaries bounds;
};
TokenizedSentence join_tokens(std::span<const std::string> tokens);

/// Indices of the words fully inside [k, l]. Words are sorted and disjoint,
/// so these always form one contiguous run.
std::vector<std::size_t> map_span_to_words(std::size_t k, std::size_t l, const WordBoundaries& bounds);

enum class Direction { src_to_tgt, tgt_to_src };

struct TokenAlignmentMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  Direction direction = Direction::src_to_tgt;

  TokenAlignmentMatrix() = default;
  TokenAlignmentMatrix(std::size_t r, std::size_t c, Direction d) : rows(r), cols(c), values(r * c, 0.0), direction(d) {}
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

/// How a best span's score is spread over the words it covers.
enum class SpanStrategy {
  uniform,  // every covered word receives the full score w
};

std::string to_string(SpanStrategy s);
SpanStrategy parse_span_strategy(const std::string& s);

/// Queries the predictor once per source word and fills that word's row.
/// A null best span (score below min_score) leaves the row at zero.
TokenAlignmentMatrix token_prob_matrix(const spanpred::SpanPredictor& model, std::string_view x, std::string_view y,
                                       const WordBoundaries& xb, const WordBoundaries& yb,
                                       SpanStrategy strategy = SpanStrategy::uniform, double min_score = 0.0,
                                       Direction direction = Direction::src_to_tgt);

/// out[p][q] = (m_xy[p][q] + m_yx[q][p]) / 2
TokenAlignmentMatrix symmetrize(const TokenAlignmentMatrix& m_xy, const TokenAlignmentMatrix& m_yx);

using AlignmentSet = std::set<std::pair<std::size_t, std::size_t>>;

/// {(p, q) : sym[p][q] > threshold}
AlignmentSet extract_alignment(const TokenAlignmentMatrix& sym, double threshold = 0.4);

/// "p-q" tokens sorted by (p, q), space separated.
std::string format_pharaoh(const AlignmentSet& a);
void write_pharaoh(const std::string& path, std::span<const AlignmentSet> sets);

struct SentencePair {
  std::vector<std::string> src_tokens;
  std::vector<std::string> tgt_tokens;
};

/// "src tokens<TAB>tgt tokens" per line.
std::vector<SentencePair> load_sentence_pairs(const std::string& path);

struct AlignConfig {
  double threshold = 0.4;
  SpanStrategy strategy = SpanStrategy::uniform;
  double min_score = 0.0;

  void validate() const;
};

/// Both directions, averaged and thresholded.
AlignmentSet align_pair(const spanpred::SpanPredictor& model, const SentencePair& pair, const AlignConfig& cfg);

/// Pairs are processed in parallel; output order follows the input.
std::vector<AlignmentSet> align_corpus(const spanpred::SpanPredictor& model, std::span<const SentencePair> pairs,
                                       const AlignConfig& cfg);

}  // namespace wsp
