#include "wsp/align.hpp"

#include <cmath>
#include <sstream>

#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/parallel.hpp"
#include "wsp/utf8.hpp"

namespace wsp {

void WordBoundaries::validate(std::size_t text_len) const {
  for (std::size_t w = 0; w < spans.size(); ++w) {
    const auto [s, e] = spans[w];
    if (s > e || e >= text_len) {
      throw DataError("word " + std::to_string(w) + " span [" + std::to_string(s) + ", " + std::to_string(e) +
                      "] outside text of length " + std::to_string(text_len));
    }
    if (w > 0 && s <= spans[w - 1].second) {
      throw DataError("word " + std::to_string(w) + " overlaps or precedes word " + std::to_string(w - 1));
    }
  }
}

WordBoundaries whitespace_boundaries(std::string_view text) {
  WordBoundaries b;
  const std::u32string s = utf8::decode(text);
  std::size_t i = 0;
  while (i < s.size()) {
    if (utf8::is_space(s[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < s.size() && !utf8::is_space(s[i])) ++i;
    b.spans.emplace_back(start, i - 1);
  }
  return b;
}

TokenizedSentence join_tokens(std::span<const std::string> tokens) {
  TokenizedSentence out;
  std::size_t pos = 0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::size_t len = utf8::length(tokens[t]);
    if (len == 0) throw DataError("empty token at index " + std::to_string(t));
    if (t > 0) {
      out.text += ' ';
      ++pos;
    }
    out.text += tokens[t];
    out.bounds.spans.emplace_back(pos, pos + len - 1);
    pos += len;
  }
  return out;
}

std::vector<std::size_t> map_span_to_words(std::size_t k, std::size_t l, const WordBoundaries& bounds) {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < bounds.spans.size(); ++w) {
    const auto [s, e] = bounds.spans[w];
    if (s >= k && e <= l) {
      out.push_back(w);
    } else if (!out.empty()) {
      break;
    }
  }
  return out;
}

std::string to_string(SpanStrategy) { return "uniform"; }

SpanStrategy parse_span_strategy(const std::string& s) {
  if (s == "uniform") return SpanStrategy::uniform;
  throw ConfigError("align.strategy", "unknown strategy '" + s + "' (expected uniform)");
}

TokenAlignmentMatrix token_prob_matrix(const spanpred::SpanPredictor& model, std::string_view x, std::string_view y,
                                       const WordBoundaries& xb, const WordBoundaries& yb, SpanStrategy strategy,
                                       double min_score, Direction direction) {
  xb.validate(utf8::length(x));
  yb.validate(utf8::length(y));
  TokenAlignmentMatrix m(xb.size(), yb.size(), direction);
  for (std::size_t p = 0; p < xb.size(); ++p) {
    std::optional<spanpred::ScoredSpan> best;
    try {
      best = spanpred::best_span(model.predict(x, y, xb.spans[p].first, xb.spans[p].second), min_score);
    } catch (const Error& e) {
      throw DataError("span query for source word " + std::to_string(p) + ": " + e.what());
    }
    if (!best) continue;
    switch (strategy) {
      case SpanStrategy::uniform:
        for (std::size_t q : map_span_to_words(best->start, best->end, yb)) m.at(p, q) = best->score;
        break;
    }
  }
  return m;
}

TokenAlignmentMatrix symmetrize(const TokenAlignmentMatrix& m_xy, const TokenAlignmentMatrix& m_yx) {
  if (m_xy.rows != m_yx.cols || m_xy.cols != m_yx.rows) {
    throw DataError("symmetrize: " + std::to_string(m_xy.rows) + "x" + std::to_string(m_xy.cols) +
                    " matrix is not the transpose shape of " + std::to_string(m_yx.rows) + "x" +
                    std::to_string(m_yx.cols));
  }
  TokenAlignmentMatrix out(m_xy.rows, m_xy.cols, m_xy.direction);
  for (std::size_t p = 0; p < out.rows; ++p) {
    for (std::size_t q = 0; q < out.cols; ++q) out.at(p, q) = (m_xy.at(p, q) + m_yx.at(q, p)) / 2.0;
  }
  return out;
}

AlignmentSet extract_alignment(const TokenAlignmentMatrix& sym, double threshold) {
  AlignmentSet a;
  for (std::size_t p = 0; p < sym.rows; ++p) {
    for (std::size_t q = 0; q < sym.cols; ++q) {
      if (sym.at(p, q) > threshold) a.emplace(p, q);
    }
  }
  return a;
}

std::string format_pharaoh(const AlignmentSet& a) {
  std::string out;
  for (const auto& [p, q] : a) {
    if (!out.empty()) out += ' ';
    out += std::to_string(p) + '-' + std::to_string(q);
  }
  return out;
}

void write_pharaoh(const std::string& path, std::span<const AlignmentSet> sets) {
  std::string out;
  for (const auto& a : sets) out += format_pharaoh(a) + '\n';
  io::write_file(path, out);
}

namespace {

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<SentencePair> load_sentence_pairs(const std::string& path) {
  io::LineReader reader(path);
  std::vector<SentencePair> out;
  while (auto line = reader.next()) {
    const auto tab = line->find('\t');
    if (tab == std::string::npos || line->find('\t', tab + 1) != std::string::npos) {
      throw LineError(path, reader.line(), "expected exactly one tab separating source and target");
    }
    SentencePair sp{split_tokens(std::string_view(*line).substr(0, tab)),
                    split_tokens(std::string_view(*line).substr(tab + 1))};
    if (sp.src_tokens.empty() || sp.tgt_tokens.empty()) {
      throw LineError(path, reader.line(), "empty source or target sentence");
    }
    out.push_back(std::move(sp));
  }
  return out;
}

void AlignConfig::validate() const {
  if (!std::isfinite(threshold) || threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("align.threshold", "must be in [0, 1]");
  }
  if (!std::isfinite(min_score) || min_score < 0.0 || min_score > 1.0) {
    throw ConfigError("align.min_score", "must be in [0, 1]");
  }
}

AlignmentSet align_pair(const spanpred::SpanPredictor& model, const SentencePair& pair, const AlignConfig& cfg) {
  const auto x = join_tokens(pair.src_tokens);
  const auto y = join_tokens(pair.tgt_tokens);
  const auto m_xy = token_prob_matrix(model, x.text, y.text, x.bounds, y.bounds, cfg.strategy, cfg.min_score,
                                      Direction::src_to_tgt);
  const auto m_yx = token_prob_matrix(model, y.text, x.text, y.bounds, x.bounds, cfg.strategy, cfg.min_score,
                                      Direction::tgt_to_src);
  return extract_alignment(symmetrize(m_xy, m_yx), cfg.threshold);
}

std::vector<AlignmentSet> align_corpus(const spanpred::SpanPredictor& model, std::span<const SentencePair> pairs,
                                       const AlignConfig& cfg) {
  cfg.validate();
  std::vector<AlignmentSet> out(pairs.size());
  std::vector<std::string> errors(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    try {
      out[i] = align_pair(model, pairs[i], cfg);
    } catch (const std::exception& e) {
      errors[i] = "sentence pair " + std::to_string(i) + ": " + e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw DataError(e);
  }
  return out;
}

}  // namespace wsp
