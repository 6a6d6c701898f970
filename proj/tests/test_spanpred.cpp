#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "wsp/annotate.hpp"
#include "wsp/error.hpp"
#include "wsp/spanpred.hpp"

using namespace wsp;
using namespace wsp::spanpred;

namespace {

EncoderConfig tiny(Tokenization mode = Tokenization::character) {
  const std::vector<std::string> texts = {"the cat sat", "le chat assis", "der Hund"};
  EncoderConfig c;
  c.tokenization = mode;
  c.vocab = build_vocab(texts, mode);
  c.dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.hidden = 16;
  c.max_len = 48;
  c.seed = 3;
  return c;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Softmax, ClosedForm) {
  const std::vector<double> z = {0.0, std::log(3.0)};
  const auto d = softmax_distribution(z, z);
  EXPECT_NEAR(d.p_start[0], 0.25, 1e-15);
  EXPECT_NEAR(d.p_start[1], 0.75, 1e-15);
  // large logits stay finite
  const std::vector<double> big = {1000.0, 1000.0};
  const auto b = softmax_distribution(big, big);
  EXPECT_DOUBLE_EQ(b.p_end[0], 0.5);
}

TEST(SpanScore, ProductOfStartAndEnd) {
  const SpanDistribution d{{0.5, 0.5}, {0.1, 0.9}};
  EXPECT_NEAR(span_score(d, 0, 1), 0.45, 1e-15);
  EXPECT_NEAR(span_loss(d, 0, 1), -std::log(0.45), 1e-9);
  EXPECT_THROW(span_score(d, 1, 0), DataError);
  EXPECT_THROW(span_score(d, 0, 2), DataError);
}

TEST(SpanLoss, UniformIsTwoLogN) {
  for (std::size_t n : {1, 2, 7, 100}) {
    const SpanDistribution d{std::vector<double>(n, 1.0 / n), std::vector<double>(n, 1.0 / n)};
    EXPECT_NEAR(span_loss(d, 0, n - 1), 2.0 * std::log(static_cast<double>(n)), 1e-9);
  }
}

TEST(SpanLoss, ZeroProbabilityFailsUnlessClamped) {
  const SpanDistribution d{{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_THROW(span_loss(d, 1, 1), DataError);
  LossOptions o;
  o.clamp = true;
  EXPECT_NEAR(span_loss(d, 1, 1, o), -std::log(1e-12), 1e-9);
}

TEST(LogitLoss, MatchesDistributionLossAndGradient) {
  const std::vector<double> s = {0.3, -1.0, 2.0}, e = {1.0, 0.5, -0.2};
  std::vector<double> ds(3), de(3);
  const double l = logit_loss<double>(s, e, 0, 2, ds, de);
  const auto d = softmax_distribution(s, e);
  EXPECT_NEAR(l, span_loss(d, 0, 2), 1e-12);
  EXPECT_NEAR(ds[0], d.p_start[0] - 1.0, 1e-12);
  EXPECT_NEAR(ds[1], d.p_start[1], 1e-12);
  EXPECT_NEAR(de[2], d.p_end[2] - 1.0, 1e-12);
}

TEST(BestSpan, TieBreakAndThreshold) {
  const SpanDistribution flat{{0.5, 0.5}, {0.5, 0.5}};
  const auto b = best_span(flat);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->start, 0u);
  EXPECT_EQ(b->end, 0u);
  EXPECT_DOUBLE_EQ(b->score, 0.25);
  // end before start is never chosen even if individually likely
  const SpanDistribution crossed{{0.1, 0.9}, {0.9, 0.1}};
  const auto c = best_span(crossed);
  EXPECT_EQ(c->start, 0u);
  EXPECT_EQ(c->end, 0u);
  EXPECT_FALSE(best_span(flat, 0.3).has_value());
  EXPECT_FALSE(best_span(SpanDistribution{}).has_value());
}

TEST(Tokenize, CharacterAndWord) {
  const auto c = tokenize("a b", Tokenization::character);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[1].text, " ");
  const auto w = tokenize("  Zürich  is big", Tokenization::word);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].text, "Zürich");
  EXPECT_EQ(w[0].start, 2u);
  EXPECT_EQ(w[0].end, 7u);
  EXPECT_EQ(w[2].end, 15u);
}

TEST(Vocab, SortedWithMarkerAndCap) {
  const std::vector<std::string> texts = {"a a a b", "c a b"};
  const auto v = build_vocab(texts, Tokenization::word);
  EXPECT_EQ(v, (std::vector<std::string>{"a", "b", "c", "¶"}));
  EXPECT_EQ(build_vocab(texts, Tokenization::word, 3), (std::vector<std::string>{"a", "b", "¶"}));
  EncoderConfig cfg;
  cfg.vocab = v;
  EXPECT_EQ(cfg.token_id("a"), 2);
  EXPECT_EQ(cfg.token_id("zzz"), 0);
  EXPECT_EQ(cfg.vocab_size(), 6);
}

TEST(Encode, SegmentsAndOffsets) {
  const auto cfg = tiny(Tokenization::word);
  const auto in = encode_input(cfg, "the cat sat", "le chat", 4, 6);
  // the ¶ cat ¶ sat <sep> le chat
  ASSERT_EQ(in.ids.size(), 8u);
  EXPECT_EQ(in.segments, (std::vector<int>{kSegSource, kSegSource, kSegSpan, kSegSource, kSegSource, kSegSource,
                                           kSegTarget, kSegTarget}));
  EXPECT_EQ(in.ids[5], 1);
  EXPECT_EQ(in.y_offset, 6u);
  EXPECT_EQ(in.y_len, 2u);
  EXPECT_EQ(in.y_chars, 7u);
  EXPECT_EQ(in.token_span(3, 6), (std::pair<std::size_t, std::size_t>{1, 1}));
  EXPECT_EQ(in.token_span(0, 6), (std::pair<std::size_t, std::size_t>{0, 1}));
  EXPECT_FALSE(in.token_span(4, 6).has_value());

  auto small = cfg;
  small.max_len = 5;
  EXPECT_THROW(encode_input(small, "the cat sat", "le chat", 4, 6), DataError);
  EXPECT_THROW(encode_input(cfg, "the cat", "   ", 0, 2), DataError);
}

TEST(Encode, ExpandToChars) {
  const auto cfg = tiny(Tokenization::word);
  const auto in = encode_input(cfg, "the cat", "le chat", 0, 2);
  const SpanDistribution tok{{0.2, 0.8}, {0.3, 0.7}};
  const auto ch = expand_to_chars(tok, in);
  ASSERT_EQ(ch.size(), 7u);
  EXPECT_EQ(ch.p_start, (std::vector<double>{0.2, 0, 0, 0.8, 0, 0, 0}));
  EXPECT_EQ(ch.p_end, (std::vector<double>{0, 0.3, 0, 0, 0, 0, 0.7}));
}

TEST(Model, DistributionsAreNormalizedAndDeterministic) {
  for (auto mode : {Tokenization::character, Tokenization::word}) {
    const auto p = init_params<float>(tiny(mode));
    const auto d = span_distributions(p, "the cat sat", "le chat assis", 4, 6);
    EXPECT_EQ(d.size(), 13u);
    EXPECT_NEAR(sum(d.p_start), 1.0, 1e-6);
    EXPECT_NEAR(sum(d.p_end), 1.0, 1e-6);
    const auto again = span_distributions(init_params<float>(tiny(mode)), "the cat sat", "le chat assis", 4, 6);
    EXPECT_EQ(d.p_start, again.p_start);
  }
}

TEST(Model, ZeroHeadsGiveUniform) {
  auto p = init_params<double>(tiny());
  for (auto slot : {p.layout.head_start, p.layout.head_end}) {
    std::fill(p.tensors[slot].data.begin(), p.tensors[slot].data.end(), 0.0);
  }
  const auto d = span_distributions(p, "the cat", "der Hund", 0, 2);
  for (double v : d.p_start) EXPECT_NEAR(v, 1.0 / 8, 1e-12);
  EXPECT_NEAR(span_loss(d, 0, 7), 2.0 * std::log(8.0), 1e-9);
}

TEST(Model, SeedChangesInitialization) {
  auto a = tiny();
  auto b = tiny();
  b.seed = 4;
  EXPECT_TRUE(init_params<float>(a) == init_params<float>(a));
  EXPECT_FALSE(init_params<float>(a) == init_params<float>(b));
  EXPECT_GT(init_params<float>(a).num_parameters(), 0u);
}

TEST(Model, FloatAndDoubleAgree) {
  const auto pf = init_params<float>(tiny());
  const auto pd = cast_params<double>(pf);
  const auto df = span_distributions(pf, "the cat", "le chat", 4, 6);
  const auto dd = span_distributions(pd, "the cat", "le chat", 4, 6);
  for (std::size_t i = 0; i < df.size(); ++i) EXPECT_NEAR(df.p_start[i], dd.p_start[i], 1e-5);
}

TEST(Config, ValidateAndDiff) {
  auto c = tiny();
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.heads = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.vocab = {"b", "a"};
  EXPECT_THROW(bad.validate(), ConfigError);
  auto other = c;
  other.dim = 16;
  other.seed = 9;
  EXPECT_EQ(c.diff(other), (std::vector<std::string>{"dim", "seed"}));
  EXPECT_EQ(EncoderConfig::from_json(nlohmann::json::parse(c.to_json().dump())), c);
  EXPECT_THROW(parse_tokenization("bpe"), ConfigError);
}
