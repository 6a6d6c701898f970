#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "support.hpp"
#include "wsp/error.hpp"
#include "wsp/filtering.hpp"
#include "wsp/io.hpp"
#include "wsp/random.hpp"
#include "wsp/sidecar.hpp"

using namespace wsp;

namespace {

ParagraphPair pair_ab() { return {"a", "b", "Q1", "de", "en"}; }

EmbeddingTable table(std::vector<float> a, std::vector<float> b) {
  EmbeddingTable t;
  t.add("a", std::move(a));
  t.add("b", std::move(b));
  return t;
}

}  // namespace

TEST(FilterConfig, DefaultsAndValidation) {
  const FilterConfig c;
  EXPECT_EQ(c.min_subwords, 30);
  EXPECT_EQ(c.max_subwords, 158);
  EXPECT_EQ(c.sim_threshold, 0.75);
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW((FilterConfig{40, 30, 0.5}.validate()), ConfigError);
  EXPECT_THROW((FilterConfig{0, 30, 0.5}.validate()), ConfigError);
  EXPECT_THROW((FilterConfig{1, 30, NAN}.validate()), ConfigError);
}

TEST(SubwordCount, Fallback) {
  EXPECT_EQ(fallback_subword_count("a b c"), 3);
  EXPECT_EQ(fallback_subword_count("日本語の文です"), 7);
  EXPECT_EQ(fallback_subword_count("  spaced   out "), 2);
  EXPECT_EQ(fallback_subword_count("東京 is big"), 4);
  EXPECT_EQ(fallback_subword_count(" "), 1);
}

TEST(SubwordCount, SidecarWins) {
  const SubwordCounter c({{"a", 42}});
  EXPECT_EQ(c.count({"a", "en", "one two", {}}), 42);
  EXPECT_EQ(c.count({"b", "en", "one two", {}}), 2);
  const SubwordCounter bad({{"a", 0}});
  try {
    bad.count({"a", "en", "x", {}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
  }
}

TEST(LengthFilter, InclusiveBounds) {
  const FilterConfig c;
  auto keep = [&](int x, int y) { return length_filter(pair_ab(), {{"a", x}, {"b", y}}, c); };
  EXPECT_TRUE(keep(30, 158));
  EXPECT_FALSE(keep(29, 100));
  EXPECT_FALSE(keep(100, 159));
  EXPECT_FALSE(keep(29, 159));
  EXPECT_TRUE(keep(158, 30));
  EXPECT_THROW(length_filter(pair_ab(), {{"a", 40}}, c), DataError);
}

TEST(Cosine, ClosedForms) {
  const std::vector<float> v = {0.3f, -1.2f, 2.5f};
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-12);
  EXPECT_EQ(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<float>{1, 1}, std::vector<float>{1, 0}), 0.7071067811865475, 1e-12);
  EXPECT_THROW(cosine(std::vector<float>{0, 0}, std::vector<float>{1, 0}), DataError);
  EXPECT_THROW(cosine(std::vector<float>{1, 0, 0}, std::vector<float>{1, 0}), DataError);
}

TEST(Cosine, SymmetricAndScaleInvariant) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    std::vector<float> u(16), v(16), cu(16);
    const float c = static_cast<float>(0.5 + 4.0 * rng.uniform());
    for (int i = 0; i < 16; ++i) {
      u[i] = static_cast<float>(rng.normal());
      v[i] = static_cast<float>(rng.normal());
      cu[i] = u[i] * c;
    }
    EXPECT_EQ(cosine(u, v), cosine(v, u));
    EXPECT_NEAR(cosine(cu, v), cosine(u, v), 1e-6);  // c*u rounds to float
  }
}

TEST(SimilarityFilter, StrictThreshold) {
  const FilterConfig c;
  const double s76 = std::sqrt(1 - 0.76 * 0.76);
  EXPECT_TRUE(similarity_filter(pair_ab(), table({1, 0}, {0.76f, static_cast<float>(s76)}), c));
  EXPECT_FALSE(similarity_filter(pair_ab(), table({1, 0}, {-0.2f, 0.9797959f}), c));
  // |(3,2,1,1,1)| = 4, so the cosine with e1 is exactly 0.75
  const auto exact = table({1, 0, 0, 0, 0}, {3, 2, 1, 1, 1});
  EXPECT_EQ(cosine(*exact.find("a"), *exact.find("b")), 0.75);
  EXPECT_FALSE(similarity_filter(pair_ab(), exact, c));
  EXPECT_THROW(similarity_filter({"a", "zz", "Q", "x", "y"}, table({1, 0}, {0, 1}), c), DataError);
}

TEST(FilterPairs, MonotoneAndIdempotent) {
  Rng rng(13);
  std::vector<ParagraphPair> pairs;
  std::unordered_map<std::string, int> counts;
  EmbeddingTable embs;
  for (int i = 0; i < 60; ++i) {
    const std::string id = "p" + std::to_string(i);
    counts[id] = 20 + static_cast<int>(rng.below(160));
    std::vector<float> v(4);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    embs.add(id, v);
  }
  for (int i = 0; i < 59; ++i) pairs.push_back({"p" + std::to_string(i), "p" + std::to_string(i + 1), "Q", "x", "y"});
  FilterConfig c;
  c.sim_threshold = 0.0;
  FilterStats st;
  const auto once = filter_pairs(pairs, counts, &embs, c, &st);
  const auto twice = filter_pairs(once, counts, &embs, c);
  EXPECT_EQ(once, twice);
  EXPECT_EQ(st.input, pairs.size());
  EXPECT_EQ(st.kept, once.size());
  EXPECT_EQ(st.dropped_length + st.dropped_similarity + st.kept, st.input);
  // oracle
  std::vector<ParagraphPair> expected;
  for (const auto& p : pairs) {
    if (length_filter(p, counts, c) && similarity_filter(p, embs, c)) expected.push_back(p);
  }
  EXPECT_EQ(once, expected);
  // length-only when no embeddings
  const auto len_only = filter_pairs(pairs, counts, nullptr, c);
  for (const auto& p : len_only) EXPECT_TRUE(length_filter(p, counts, c));
}

TEST(Sidecar, TokenRoundTrip) {
  test::TempDir dir;
  std::vector<TokenEmbeddings> recs(2);
  recs[0] = {"en:1", {{0, 2}, {4, 6}, {8, 8}}, 8, {}};
  recs[1] = {"de:1", {{0, 3}}, 8, {}};
  for (auto& r : recs) {
    for (std::size_t i = 0; i < r.tokens.size() * 8; ++i) r.vectors.push_back(0.25f * static_cast<float>(i) - 1.0f);
  }
  const auto p = dir.file("t.wspe");
  write_token_sidecar(p, recs);
  const auto h = read_sidecar_header(p);
  EXPECT_EQ(h.count, 2u);
  EXPECT_EQ(h.dim, 8u);
  EXPECT_EQ(h.level, SidecarLevel::token);
  EXPECT_EQ(read_token_sidecar(p), recs);
}

TEST(Sidecar, FormatArithmetic) {
  // 1 paragraph, 3 tokens, dim 8: 24-byte header, 2+id, 4, 3*8 span bytes, 24 floats
  test::TempDir dir;
  TokenEmbeddings r{"p", {{0, 0}, {2, 2}, {4, 4}}, 8, std::vector<float>(24, 0.5f)};
  const auto p = dir.file("one.wspe");
  write_token_sidecar(p, std::vector<TokenEmbeddings>{r});
  EXPECT_EQ(io::read_file(p).size(), 24u + 2 + 1 + 4 + 24 + 24 * 4);
  EXPECT_EQ(io::read_file(p).substr(0, 4), "WSPE");
}

TEST(Sidecar, EmptyIsHeaderOnly) {
  test::TempDir dir;
  const auto p = dir.file("e.wspe");
  write_token_sidecar(p, {});
  EXPECT_EQ(io::read_file(p).size(), 24u);
  EXPECT_TRUE(read_token_sidecar(p).empty());
}

TEST(Sidecar, ParagraphBinaryAndJsonl) {
  test::TempDir dir;
  const std::vector<NamedVector> recs = {{"a", {1, 2, 3}}, {"b", {0, 1, 0}}};
  write_paragraph_sidecar(dir.file("p.wspe"), recs);
  const auto t = read_paragraph_embeddings(dir.file("p.wspe"));
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(*t.find("a"), (std::vector<float>{1, 2, 3}));
  const auto j = dir.write("p.jsonl", R"({"id":"a","vec":[1,2,3]})" "\n" R"({"id":"b","vec":[0,1,0]})" "\n");
  EXPECT_EQ(*read_paragraph_embeddings(j).find("b"), (std::vector<float>{0, 1, 0}));
  const auto bad = dir.write("bad.jsonl", R"({"id":"a","vec":[1,2,3]})" "\n" R"({"id":"b","vec":[0,1]})" "\n");
  EXPECT_THROW(read_paragraph_embeddings(bad), DataError);
}

TEST(Sidecar, CorruptFilesRejected) {
  test::TempDir dir;
  std::vector<TokenEmbeddings> recs = {{"x", {{0, 1}}, 2, {1.0f, 2.0f}}};
  const auto p = dir.file("t.wspe");
  write_token_sidecar(p, recs);
  const std::string good = io::read_file(p);

  EXPECT_THROW(read_token_sidecar(dir.write("magic.wspe", "XXXX" + good.substr(4))), IoError);
  EXPECT_THROW(read_token_sidecar(dir.write("trunc.wspe", good.substr(0, good.size() - 3))), IoError);
  EXPECT_THROW(read_token_sidecar(dir.write("trail.wspe", good + "z")), IoError);
  std::string v2 = good;
  v2[4] = 2;
  EXPECT_THROW(read_token_sidecar(dir.write("ver.wspe", v2)), IoError);
  std::string nan = good;
  const float q = NAN;
  std::memcpy(nan.data() + nan.size() - 4, &q, 4);
  EXPECT_THROW(read_token_sidecar(dir.write("nan.wspe", nan)), DataError);
  // paragraph reader refuses a token-level file
  EXPECT_THROW(read_paragraph_embeddings(p), IoError);
}

TEST(Sidecar, SpanValidation) {
  EXPECT_NO_THROW(validate_token_spans({{0, 1}, {3, 3}}, "x"));
  EXPECT_THROW(validate_token_spans({{0, 2}, {2, 3}}, "x"), ValidationError);
  EXPECT_THROW(validate_token_spans({{2, 1}}, "x"), ValidationError);
  EXPECT_THROW(validate_token_spans({{-1, 1}}, "x"), ValidationError);
}

TEST(Sidecar, PosTagsAndSubwordCounts) {
  test::TempDir dir;
  const std::vector<PosTags> tags = {{"p", {{0, 2}, {4, 6}, {8, 11}}, {"DET", "NOUN", "VERB"}}};
  write_pos_tags(dir.file("pos.jsonl"), tags);
  EXPECT_EQ(read_pos_tags(dir.file("pos.jsonl")), tags);
  const auto mismatch = dir.write("m.jsonl", R"({"id":"p","tokens":[[0,2]],"tags":["DET","NOUN"]})" "\n");
  EXPECT_THROW(read_pos_tags(mismatch), LineError);

  const std::vector<std::pair<std::string, int>> counts = {{"a", 3}, {"b", 40}};
  write_subword_counts(dir.file("c.jsonl"), counts);
  const auto back = read_subword_counts(dir.file("c.jsonl"));
  EXPECT_EQ(back.at("a"), 3);
  EXPECT_EQ(back.at("b"), 40);
  EXPECT_THROW(read_subword_counts(dir.write("z.jsonl", R"({"id":"a","subwords":0})" "\n")), LineError);
}
