#include <cmath>
#include <map>
#include <tuple>

#include <gtest/gtest.h>

#include "support.hpp"
#include "wsp/align.hpp"
#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/random.hpp"
#include "wsp/utf8.hpp"

using namespace wsp;

namespace {

// Answers each query (source, i, j) with a fixed span (k, l) at probability
// sqrt(w) on each side, so the best span scores exactly w. Unscripted
// queries get a uniform distribution.
class ScriptedPredictor : public spanpred::SpanPredictor {
 public:
  struct Answer {
    std::size_t k, l;
    double w;
  };
  std::map<std::tuple<std::string, std::size_t, std::size_t>, Answer> script;
  mutable std::size_t calls = 0;

  spanpred::SpanDistribution predict(std::string_view source, std::string_view target, std::size_t i,
                                     std::size_t j) const override {
    ++calls;
    const std::size_t n = utf8::length(target);
    spanpred::SpanDistribution d{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    auto it = script.find({std::string(source), i, j});
    if (it == script.end()) {
      std::fill(d.p_start.begin(), d.p_start.end(), 1.0 / n);
      std::fill(d.p_end.begin(), d.p_end.end(), 1.0 / n);
      return d;
    }
    const double r = std::sqrt(it->second.w);
    d.p_start[it->second.k] = r;
    d.p_end[it->second.l] = r;
    return d;
  }
};

WordBoundaries bounds(std::vector<std::pair<std::size_t, std::size_t>> s) { return {std::move(s)}; }

}  // namespace

TEST(MapSpan, SubwordExample) {
  // "Yoshimitsu ASHIKAGA": the predicted run [Yo, ##shi, ##mits, ##u, AS, ##HI]
  // ends inside the second word, so only the first word survives.
  const std::vector<std::pair<std::size_t, std::size_t>> subwords = {{0, 1}, {2, 4}, {5, 8}, {9, 9},
                                                                     {11, 12}, {13, 14}};
  const std::vector<std::string> names = {"Yo", "##shi", "##mits", "##u", "AS", "##HI"};
  const auto words = whitespace_boundaries("Yoshimitsu ASHIKAGA");
  ASSERT_EQ(words.size(), 2u);
  const auto picked = map_span_to_words(subwords.front().first, subwords.back().second, words);
  ASSERT_EQ(picked, (std::vector<std::size_t>{0}));
  std::vector<std::string> kept;
  for (std::size_t t = 0; t < subwords.size(); ++t) {
    for (auto w : picked) {
      if (subwords[t].first >= words.spans[w].first && subwords[t].second <= words.spans[w].second) {
        kept.push_back(names[t]);
      }
    }
  }
  EXPECT_EQ(kept, (std::vector<std::string>{"Yo", "##shi", "##mits", "##u"}));
}

TEST(MapSpan, ContainmentCases) {
  const auto b = whitespace_boundaries("ab cd ef");
  EXPECT_EQ(map_span_to_words(3, 4, b), (std::vector<std::size_t>{1}));
  EXPECT_EQ(map_span_to_words(0, 7, b), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(map_span_to_words(1, 3, b), (std::vector<std::size_t>{}));  // straddles two half words
  EXPECT_EQ(map_span_to_words(2, 7, b), (std::vector<std::size_t>{1, 2}));
}

TEST(MapSpan, FuzzAgainstContainmentOracle) {
  Rng rng(12);
  for (int t = 0; t < 300; ++t) {
    WordBoundaries b;
    std::size_t pos = 0;
    const auto nw = 1 + rng.below(8);
    for (std::size_t w = 0; w < nw; ++w) {
      pos += rng.below(3);
      const auto len = 1 + rng.below(5);
      b.spans.emplace_back(pos, pos + len - 1);
      pos += len;
    }
    const auto k = rng.below(pos), l = k + rng.below(pos - k);
    std::vector<std::size_t> oracle;
    for (std::size_t w = 0; w < b.size(); ++w) {
      if (b.spans[w].first >= k && b.spans[w].second <= l) oracle.push_back(w);
    }
    EXPECT_EQ(map_span_to_words(k, l, b), oracle);
  }
}

TEST(Boundaries, JoinAndValidate) {
  const std::vector<std::string> toks = {"Zürich", "ist", "groß"};
  const auto s = join_tokens(toks);
  EXPECT_EQ(s.text, "Zürich ist groß");
  EXPECT_EQ(s.bounds.spans, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 5}, {7, 9}, {11, 14}}));
  EXPECT_EQ(whitespace_boundaries(s.text).spans, s.bounds.spans);
  EXPECT_THROW(bounds({{0, 3}}).validate(3), DataError);
  EXPECT_THROW(bounds({{0, 1}, {1, 2}}).validate(5), DataError);
  const std::vector<std::string> empty_tok = {"a", ""};
  EXPECT_THROW(join_tokens(empty_tok), DataError);
}

TEST(TokenMatrix, OneHotAndNullRows) {
  ScriptedPredictor m;
  // "a bb" -> "xx y": word 0 aligns to word 1 (char 3), word 1 has no confident span
  m.script[{"a bb", 0, 0}] = {3, 3, 1.0};
  const auto xb = whitespace_boundaries("a bb"), yb = whitespace_boundaries("xx y");
  const auto mat = token_prob_matrix(m, "a bb", "xx y", xb, yb, SpanStrategy::uniform, 0.5);
  EXPECT_EQ(mat.values, (std::vector<double>{0, 1, 0, 0}));
  EXPECT_EQ(m.calls, 2u);
}

TEST(TokenMatrix, SpanScoreSpreadsOverCoveredWords) {
  ScriptedPredictor m;
  m.script[{"a", 0, 0}] = {0, 3, 0.64};
  const auto xb = whitespace_boundaries("a"), yb = whitespace_boundaries("xx y");
  const auto mat = token_prob_matrix(m, "a", "xx y", xb, yb);
  EXPECT_NEAR(mat.at(0, 0), 0.64, 1e-15);
  EXPECT_NEAR(mat.at(0, 1), 0.64, 1e-15);
}

TEST(Symmetrize, ElementwiseAverage) {
  Rng rng(2);
  TokenAlignmentMatrix xy(3, 4, Direction::src_to_tgt), yx(4, 3, Direction::tgt_to_src);
  for (auto& v : xy.values) v = rng.uniform();
  for (auto& v : yx.values) v = rng.uniform();
  const auto s = symmetrize(xy, yx);
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t q = 0; q < 4; ++q) EXPECT_EQ(s.at(p, q), (xy.at(p, q) + yx.at(q, p)) / 2.0);
  }
  EXPECT_THROW(symmetrize(xy, xy), DataError);
}

TEST(Symmetrize, DirectionSwapGivesTransposedSet) {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const auto r = 1 + rng.below(6), c = 1 + rng.below(6);
    TokenAlignmentMatrix xy(r, c, Direction::src_to_tgt), yx(c, r, Direction::tgt_to_src);
    for (auto& v : xy.values) v = static_cast<double>(rng.below(11)) / 10.0;
    for (auto& v : yx.values) v = static_cast<double>(rng.below(11)) / 10.0;
    const auto a = extract_alignment(symmetrize(xy, yx));
    AlignmentSet swapped;
    for (const auto& [q, p] : extract_alignment(symmetrize(yx, xy))) swapped.emplace(p, q);
    EXPECT_EQ(a, swapped);
  }
}

TEST(Extract, ThresholdIsStrict) {
  TokenAlignmentMatrix m(1, 3, Direction::src_to_tgt);
  m.values = {0.4, 0.4000001, 0.9};
  EXPECT_EQ(extract_alignment(m), (AlignmentSet{{0, 1}, {0, 2}}));
  // both directions at 0.4 average to exactly 0.4 and are dropped
  TokenAlignmentMatrix a(1, 1, Direction::src_to_tgt), b(1, 1, Direction::tgt_to_src);
  a.values = {0.4};
  b.values = {0.4};
  ASSERT_EQ(symmetrize(a, b).values[0], 0.4);
  EXPECT_TRUE(extract_alignment(symmetrize(a, b), 0.4).empty());
  a.values = {0.8};
  b.values = {0.0};
  EXPECT_TRUE(extract_alignment(symmetrize(a, b), 0.4).empty());
}

TEST(AlignPair, BothDirectionsAgree) {
  ScriptedPredictor m;
  // "a b" <-> "x y" with a-y and b-x in both directions
  m.script[{"a b", 0, 0}] = {2, 2, 0.81};
  m.script[{"a b", 2, 2}] = {0, 0, 0.81};
  m.script[{"x y", 0, 0}] = {2, 2, 0.81};
  m.script[{"x y", 2, 2}] = {0, 0, 0.81};
  const SentencePair sp{{"a", "b"}, {"x", "y"}};
  AlignConfig cfg;
  EXPECT_EQ(align_pair(m, sp, cfg), (AlignmentSet{{0, 1}, {1, 0}}));
  const std::vector<SentencePair> pairs(5, sp);
  const auto all = align_corpus(m, pairs, cfg);
  ASSERT_EQ(all.size(), 5u);
  for (const auto& a : all) EXPECT_EQ(a, (AlignmentSet{{0, 1}, {1, 0}}));
  cfg.threshold = 2;
  EXPECT_THROW(align_corpus(m, pairs, cfg), ConfigError);
}

TEST(AlignPair, OneSidedEvidenceBelowThreshold) {
  ScriptedPredictor m;
  // only the forward direction is confident; 0.7 averages to 0.35
  m.script[{"aaa", 0, 2}] = {0, 0, 0.7};
  const SentencePair sp{{"aaa"}, {"x", "y"}};
  AlignConfig cfg;
  cfg.min_score = 0.5;
  EXPECT_TRUE(align_pair(m, sp, cfg).empty());
}

TEST(Pharaoh, FormatAndRoundTrip) {
  EXPECT_EQ(format_pharaoh({{1, 0}, {0, 2}, {0, 1}}), "0-1 0-2 1-0");
  EXPECT_EQ(format_pharaoh({}), "");
  test::TempDir dir;
  const std::vector<AlignmentSet> sets = {{{0, 0}}, {}, {{2, 3}, {1, 1}}};
  write_pharaoh(dir.file("a.txt"), sets);
  EXPECT_EQ(io::read_file(dir.file("a.txt")), "0-0\n\n1-1 2-3\n");
}

TEST(SentencePairs, LoadAndErrors) {
  test::TempDir dir;
  const auto ok = load_sentence_pairs(dir.write("p.tsv", "a b\tx y z\nc\tw\n"));
  ASSERT_EQ(ok.size(), 2u);
  EXPECT_EQ(ok[0].tgt_tokens, (std::vector<std::string>{"x", "y", "z"}));
  try {
    load_sentence_pairs(dir.write("q.tsv", "a\tb\nno tab here\n"));
    FAIL();
  } catch (const LineError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_sentence_pairs(dir.write("r.tsv", "a\t\n")), LineError);
  EXPECT_THROW(load_sentence_pairs(dir.write("s.tsv", "a\tb\tc\n")), LineError);
  EXPECT_THROW(parse_span_strategy("weighted"), ConfigError);
}
