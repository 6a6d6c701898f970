#include <map>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "wsp/error.hpp"
#include "wsp/pairing.hpp"
#include "wsp/random.hpp"

using namespace wsp;

namespace {

Paragraph para(std::string id, std::string lang, std::vector<std::string> qids) {
  Paragraph p{std::move(id), std::move(lang), "", {}};
  for (const auto& q : qids) {
    const auto start = static_cast<std::int64_t>(p.text.size());
    if (!p.text.empty()) p.text += ' ';
    const auto s = p.text.empty() ? 0 : start + 1;
    p.text += q;
    p.mentions.push_back({q, s, s + static_cast<std::int64_t>(q.size()) - 1, q});
  }
  return p;
}

std::set<std::pair<std::string, std::string>> unordered(const std::vector<ParagraphPair>& ps) {
  std::set<std::pair<std::string, std::string>> s;
  for (const auto& p : ps) s.insert(std::minmax(p.src_id, p.tgt_id));
  return s;
}

}  // namespace

TEST(Index, EmptyAndBasic) {
  EXPECT_TRUE(build_index({}).postings.empty());
  const std::vector<Paragraph> ps = {para("p", "en", {"Q1", "Q2"})};
  const auto idx = build_index(ps);
  EXPECT_EQ(idx.postings.at("Q1"), std::vector<std::string>{"p"});
  EXPECT_EQ(idx.postings.at("Q2"), std::vector<std::string>{"p"});
  EXPECT_EQ(idx.lang("p"), "en");
}

TEST(Index, RepeatedMentionListedOnce) {
  const std::vector<Paragraph> ps = {para("p", "en", {"Q1", "Q1", "Q1"}), para("q", "fr", {"Q1"})};
  EXPECT_EQ(build_index(ps).postings.at("Q1"), (std::vector<std::string>{"p", "q"}));
}

TEST(Index, DuplicateIdNamed) {
  const std::vector<Paragraph> ps = {para("dup", "en", {"Q1"}), para("dup", "fr", {"Q1"})};
  try {
    build_index(ps);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dup"), std::string::npos);
  }
}

TEST(Index, ShardedBuildMatchesSequentialOracle) {
  // enough paragraphs for several shards
  Rng rng(4);
  std::vector<Paragraph> ps;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::string> q;
    for (int k = 0; k < 2; ++k) q.push_back("Q" + std::to_string(rng.below(300)));
    ps.push_back(para("p" + std::to_string(i), i % 2 ? "en" : "de", q));
  }
  std::map<std::string, std::vector<std::string>> oracle;
  for (const auto& p : ps) {
    std::set<std::string> seen;
    for (const auto& m : p.mentions) {
      if (seen.insert(m.entity_id).second) oracle[m.entity_id].push_back(p.id);
    }
  }
  EXPECT_EQ(build_index(ps).postings, oracle);
}

TEST(Index, JsonRoundTrip) {
  const std::vector<Paragraph> ps = {para("a", "en", {"Q1"}), para("b", "de", {"Q1", "Q2"})};
  const auto idx = build_index(ps);
  const auto back = EntityIndex::from_json(nlohmann::json::parse(idx.to_json().dump()));
  EXPECT_EQ(back.postings, idx.postings);
  EXPECT_EQ(back.paragraph_order, idx.paragraph_order);
  EXPECT_EQ(back.lang("b"), "de");
}

TEST(Pairs, ThreeWayCombination) {
  const std::vector<Paragraph> ps = {para("a", "en", {"Q1"}), para("b", "de", {"Q1"}), para("c", "fr", {"Q1"})};
  PairingOptions o;
  o.mode = PairingMode::cross_lingual;
  const auto r = collect_pairs(build_index(ps), o);
  EXPECT_EQ(unordered(r.pairs), (std::set<std::pair<std::string, std::string>>{{"a", "b"}, {"a", "c"}, {"b", "c"}}));
  EXPECT_EQ(r.stats.combinations, 3u);
}

TEST(Pairs, SingleParagraphNoPairs) {
  const std::vector<Paragraph> ps = {para("a", "en", {"Q1"})};
  EXPECT_TRUE(collect_pairs(build_index(ps), {}).pairs.empty());
}

TEST(Pairs, CrossLingualDropsSameLanguage) {
  const std::vector<Paragraph> ps = {para("a", "en", {"Q1"}), para("b", "en", {"Q1"}), para("c", "fr", {"Q1"})};
  PairingOptions o;
  o.mode = PairingMode::cross_lingual;
  EXPECT_EQ(unordered(collect_pairs(build_index(ps), o).pairs),
            (std::set<std::pair<std::string, std::string>>{{"a", "c"}, {"b", "c"}}));
}

TEST(Pairs, MonolingualRequiresAnotherLanguage) {
  const std::vector<Paragraph> ps = {
      para("a", "de", {"Q1", "Q2"}), para("b", "de", {"Q1", "Q2"}), para("c", "fr", {"Q1"}),
  };
  PairingOptions o;
  o.mode = PairingMode::monolingual;
  const auto r = collect_pairs(build_index(ps), o);
  // Q2 only ever appears in German: skipped. Q1 has a French mention: the German pair survives.
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].entity_id, "Q1");
  EXPECT_EQ(unordered(r.pairs), (std::set<std::pair<std::string, std::string>>{{"a", "b"}}));
  EXPECT_EQ(r.stats.entities_skipped_monolingual, 1u);
}

TEST(Pairs, MonolingualLanguageRestriction) {
  const std::vector<Paragraph> ps = {
      para("a", "de", {"Q1"}), para("b", "de", {"Q1"}), para("c", "fr", {"Q1"}), para("d", "fr", {"Q1"}),
  };
  PairingOptions o;
  o.mode = PairingMode::monolingual;
  o.mono_lang = "fr";
  EXPECT_EQ(unordered(collect_pairs(build_index(ps), o).pairs),
            (std::set<std::pair<std::string, std::string>>{{"c", "d"}}));
}

TEST(Pairs, EnglishCentricOrientation) {
  const std::vector<Paragraph> ps = {para("a_en", "en", {"Q1"}), para("z_de", "de", {"Q1"}), para("b_fr", "fr", {"Q1"})};
  PairingOptions o;
  const auto r = collect_pairs(build_index(ps), o);
  ASSERT_EQ(r.pairs.size(), 2u);
  for (const auto& p : r.pairs) {
    EXPECT_EQ(p.tgt_lang, "en");
    EXPECT_EQ(p.tgt_id, "a_en");
  }
  o.english_as_target = false;
  for (const auto& p : collect_pairs(build_index(ps), o).pairs) EXPECT_EQ(p.src_lang, "en");
}

TEST(Pairs, DedupKeepsFirstEntity) {
  const std::vector<Paragraph> ps = {para("a", "en", {"Q1", "Q2"}), para("b", "de", {"Q1", "Q2"})};
  PairingOptions o;
  o.mode = PairingMode::any;
  const auto r = collect_pairs(build_index(ps), o);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].entity_id, "Q1");
  EXPECT_EQ(r.stats.duplicates_dropped, 1u);
  EXPECT_EQ(r.stats.after_cap, 2u);
}

TEST(Pairs, CapIsSeededSubset) {
  std::vector<Paragraph> ps;
  for (int i = 0; i < 12; ++i) ps.push_back(para("p" + std::to_string(i), i % 2 ? "en" : "de", {"Q1"}));
  const auto idx = build_index(ps);
  PairingOptions o;
  o.mode = PairingMode::any;
  const auto full = unordered(collect_pairs(idx, o).pairs);
  EXPECT_EQ(full.size(), 66u);
  o.cap_per_entity = 10;
  o.seed = 5;
  const auto a = collect_pairs(idx, o);
  EXPECT_EQ(a.pairs.size(), 10u);
  EXPECT_EQ(a.stats.entities_capped, 1u);
  for (const auto& p : unordered(a.pairs)) EXPECT_TRUE(full.count(p));
  EXPECT_EQ(collect_pairs(idx, o).pairs, a.pairs);
  o.seed = 6;
  EXPECT_NE(collect_pairs(idx, o).pairs, a.pairs);
  o.cap_per_entity = 0;
  EXPECT_THROW(collect_pairs(idx, o), ConfigError);
}

TEST(Pairs, CountEqualsSumOfCombinations) {
  Rng rng(21);
  std::vector<Paragraph> ps;
  std::map<std::string, std::size_t> n_e;
  for (int i = 0; i < 400; ++i) {
    const std::string q = "Q" + std::to_string(rng.below(30));
    ++n_e[q];
    ps.push_back(para("p" + std::to_string(i), "l" + std::to_string(i % 4), {q}));
  }
  std::size_t expected = 0;
  for (const auto& [q, n] : n_e) expected += n * (n - 1) / 2;
  PairingOptions o;
  o.mode = PairingMode::any;
  const auto r = collect_pairs(build_index(ps), o);
  EXPECT_EQ(r.stats.combinations, expected);
  EXPECT_EQ(r.pairs.size(), expected);  // one entity per paragraph: no duplicates
  for (const auto& p : r.pairs) EXPECT_NE(p.src_id, p.tgt_id);
}

TEST(Pairs, ParseMode) {
  EXPECT_EQ(parse_pairing_mode("monolingual"), PairingMode::monolingual);
  EXPECT_EQ(to_string(PairingMode::english_centric), "english_centric");
  EXPECT_THROW(parse_pairing_mode("bilingual"), ConfigError);
}

TEST(PairStats, Report) {
  EXPECT_EQ(pair_stats({}).pairs, 0u);
  EXPECT_EQ(pair_stats({}).entities, 0u);
  const std::vector<ParagraphPair> ps = {
      {"a", "b", "Q1", "de", "en"}, {"a", "c", "Q1", "fr", "en"}, {"b", "c", "Q1", "de", "en"}};
  const auto st = pair_stats(ps);
  EXPECT_EQ(st.pairs, 3u);
  EXPECT_EQ(st.entities, 1u);
  EXPECT_EQ(st.by_lang_pair.at("de-en"), 2u);
  EXPECT_EQ(st.by_lang_pair.at("fr-en"), 1u);
}

TEST(Pairs, JsonlRoundTrip) {
  test::TempDir dir;
  const std::vector<ParagraphPair> ps = {{"a", "b", "Q1", "de", "en"}, {"c", "d", "Q9", "fr", "en"}};
  write_pairs(dir.file("p.jsonl"), ps);
  EXPECT_EQ(load_pairs(dir.file("p.jsonl")), ps);
  const auto self = dir.write("s.jsonl", R"({"src":"a","tgt":"a","qid":"Q","src_lang":"x","tgt_lang":"y"})" "\n");
  EXPECT_THROW(load_pairs(self), LineError);
}
