#include <gtest/gtest.h>

#include "support.hpp"
#include "wsp/corpus.hpp"
#include "wsp/error.hpp"
#include "wsp/utf8.hpp"

using namespace wsp;

namespace {

TitleEntityMap map_of(std::initializer_list<std::tuple<const char*, const char*, const char*>> entries) {
  TitleEntityMap m;
  for (const auto& [lang, title, qid] : entries) m.add(lang, title, qid);
  return m;
}

// Independent check of the slice invariant for every mention.
void expect_surfaces_match(const ParsedWikitext& p) {
  for (const auto& m : p.mentions) {
    EXPECT_EQ(utf8::slice(p.text, static_cast<std::size_t>(m.start), static_cast<std::size_t>(m.end)), m.surface);
  }
}

}  // namespace

TEST(Wikitext, SingleLink) {
  const auto r = parse_wikitext_links("[[Paris]] is big", "en", map_of({{"en", "Paris", "Q90"}}));
  EXPECT_EQ(r.text, "Paris is big");
  ASSERT_EQ(r.mentions.size(), 1u);
  EXPECT_EQ(r.mentions[0], (Mention{"Q90", 0, 4, "Paris"}));
}

TEST(Wikitext, NoLinksIsIdentity) {
  const auto r = parse_wikitext_links("no links here", "en", {});
  EXPECT_EQ(r.text, "no links here");
  EXPECT_TRUE(r.mentions.empty());
}

TEST(Wikitext, PipedAndPlainLinks) {
  const auto r = parse_wikitext_links("[[A|aa]] and [[B]]", "en", map_of({{"en", "A", "Q1"}, {"en", "B", "Q2"}}));
  EXPECT_EQ(r.text, "aa and B");
  ASSERT_EQ(r.mentions.size(), 2u);
  EXPECT_EQ(r.mentions[0], (Mention{"Q1", 0, 1, "aa"}));
  EXPECT_EQ(r.mentions[1], (Mention{"Q2", 7, 7, "B"}));
}

TEST(Wikitext, UnknownTitleBecomesText) {
  const auto r = parse_wikitext_links("see [[Nowhere|there]] now", "en", {});
  EXPECT_EQ(r.text, "see there now");
  EXPECT_TRUE(r.mentions.empty());
}

TEST(Wikitext, OffsetsCountScalarsAfterMultibyteText) {
  const auto r = parse_wikitext_links("東京と[[大阪]]", "ja", map_of({{"ja", "大阪", "Q35765"}}));
  EXPECT_EQ(r.text, "東京と大阪");
  ASSERT_EQ(r.mentions.size(), 1u);
  EXPECT_EQ(r.mentions[0].start, 3);
  EXPECT_EQ(r.mentions[0].end, 4);
  expect_surfaces_match(r);
}

TEST(Wikitext, LengthRelation) {
  // length(text) = length(raw) - bracket and title overhead
  const std::string raw = "x [[Title One|surf]] y [[Two]] z";
  const auto r = parse_wikitext_links(raw, "en", map_of({{"en", "Title One", "Q1"}, {"en", "Two", "Q2"}}));
  const std::size_t overhead = 4 + std::string("Title One|").size() + 4;
  EXPECT_EQ(utf8::length(r.text), utf8::length(raw) - overhead);
  expect_surfaces_match(r);
}

TEST(Wikitext, TemplatesAreStripped) {
  const auto r = parse_wikitext_links("a{{cite|x}}b {{t}}[[B]]", "en", map_of({{"en", "B", "Q2"}}));
  EXPECT_EQ(r.text, "ab B");
  ASSERT_EQ(r.mentions.size(), 1u);
  EXPECT_EQ(r.mentions[0].start, 3);
}

TEST(Wikitext, TitleNormalizationAndCaseFold) {
  const auto m = map_of({{"en", "New York", "Q60"}});
  EXPECT_EQ(m.lookup("en", "New_York"), "Q60");
  EXPECT_EQ(m.lookup("en", "  New York "), "Q60");
  EXPECT_EQ(m.lookup("en", "new York"), "Q60");
  EXPECT_FALSE(m.lookup("fr", "New York").has_value());
  const auto r = parse_wikitext_links("[[new_York|NYC]]", "en", m);
  ASSERT_EQ(r.mentions.size(), 1u);
  EXPECT_EQ(r.mentions[0].entity_id, "Q60");
}

TEST(Wikitext, ErrorsCarryBytePosition) {
  const TitleEntityMap m;
  try {
    parse_wikitext_links("ab [[x", "en", m);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.byte_pos(), 3u);
  }
  EXPECT_THROW(parse_wikitext_links("ab ]] c", "en", m), ParseError);
  EXPECT_THROW(parse_wikitext_links("[[]]", "en", m), ParseError);
  EXPECT_THROW(parse_wikitext_links("[[ | s]]", "en", m), ParseError);
  EXPECT_THROW(parse_wikitext_links("[[a [[b]] ]]", "en", m), ParseError);
  EXPECT_THROW(parse_wikitext_links("x {{open", "en", m), ParseError);
}

TEST(Paragraphs, ValidationRejectsBadMentions) {
  Paragraph p{"p1", "en", "hello", {{"Q1", 2, 1, ""}}};
  try {
    validate_paragraph(p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "mentions[0].end");
  }
  EXPECT_THROW(validate_paragraph({"p1", "en", "hello", {{"Q1", 0, 5, "hello"}}}), ValidationError);
  EXPECT_THROW(validate_paragraph({"p1", "en", "hello", {{"Q1", 0, 1, "hx"}}}), ValidationError);
  EXPECT_THROW(validate_paragraph({"p1", "en", "hello", {{"", 0, 1, "he"}}}), ValidationError);
  EXPECT_THROW(validate_paragraph({"p1", "en", "", {}}), ValidationError);
}

TEST(Paragraphs, OverlapsKeepLeftmostLongest) {
  IngestStats st;
  const auto p = validate_paragraph({"p", "en", "abcdef", {{"Q2", 1, 2, "bc"}, {"Q1", 0, 3, "abcd"}, {"Q3", 4, 5, "ef"}}},
                                    &st);
  ASSERT_EQ(p.mentions.size(), 2u);
  EXPECT_EQ(p.mentions[0].entity_id, "Q1");
  EXPECT_EQ(p.mentions[1].entity_id, "Q3");
  EXPECT_EQ(st.overlaps_dropped, 1u);
}

TEST(Paragraphs, JsonlRoundTrip) {
  test::TempDir dir;
  const std::vector<Paragraph> ps = {
      {"en:1", "en", "Zürich is in Switzerland", {{"Q72", 0, 5, "Zürich"}, {"Q39", 13, 23, "Switzerland"}}},
      {"ja:1", "ja", "東京", {}},
  };
  write_paragraphs(dir.file("p.jsonl"), ps);
  EXPECT_EQ(load_paragraphs(dir.file("p.jsonl")), ps);
}

TEST(Paragraphs, LoadEmptyAndErrors) {
  test::TempDir dir;
  EXPECT_TRUE(load_paragraphs(dir.write("e.jsonl", "")).empty());
  const auto one = dir.write("one.jsonl", R"({"id":"a","lang":"en","text":"hi","mentions":[]})" "\n");
  EXPECT_EQ(load_paragraphs(one).size(), 1u);
  const auto bad = dir.write("bad.jsonl", R"({"id":"a","lang":"en","text":"hi","mentions":[]})"
                                          "\n"
                                          R"({"id":"b","lang":"en","text":"hi","mentions":[{"qid":"Q","start":1,"end":0,"surface":""}]})"
                                          "\n");
  try {
    load_paragraphs(bad);
    FAIL();
  } catch (const LineError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("mentions[0].end"), std::string::npos);
  }
  const auto garbage = dir.write("g.jsonl", "{not json\n");
  EXPECT_THROW(load_paragraphs(garbage), LineError);
}

TEST(Paragraphs, IngestRawMixesSchemas) {
  test::TempDir dir;
  const auto titles = dir.write("t.jsonl", R"({"lang":"en","title":"Paris","qid":"Q90"})" "\n");
  const auto raw = dir.write("r.jsonl", R"({"id":"w1","lang":"en","wikitext":"[[Paris]] is big"})"
                                        "\n"
                                        R"({"id":"p1","lang":"fr","text":"Paris","mentions":[{"qid":"Q90","start":0,"end":4,"surface":"Paris"}]})"
                                        "\n");
  IngestStats st;
  const auto ps = ingest_raw(raw, TitleEntityMap::load(titles), &st);
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[0].text, "Paris is big");
  EXPECT_EQ(ps[0].mentions[0].entity_id, "Q90");
  EXPECT_EQ(ps[1].lang, "fr");
  EXPECT_EQ(st.paragraphs, 2u);
  EXPECT_EQ(st.mentions, 2u);

  const auto broken = dir.write("b.jsonl", R"({"id":"w1","lang":"en","wikitext":"[[Paris"})" "\n");
  EXPECT_THROW(ingest_raw(broken, {}), LineError);
}
