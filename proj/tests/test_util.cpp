#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "wsp/error.hpp"
#include "wsp/io.hpp"
#include "wsp/random.hpp"
#include "wsp/utf8.hpp"

using namespace wsp;

TEST(Utf8, LengthCountsScalars) {
  EXPECT_EQ(utf8::length(""), 0u);
  EXPECT_EQ(utf8::length("abc"), 3u);
  EXPECT_EQ(utf8::length("日本語"), 3u);
  EXPECT_EQ(utf8::length("a¶b"), 3u);
  EXPECT_EQ(utf8::length("😀x"), 2u);
}

TEST(Utf8, RoundTrip) {
  const std::string s = "Zürich 東京 😀";
  EXPECT_EQ(utf8::encode(utf8::decode(s)), s);
}

TEST(Utf8, SliceIsInclusive) {
  EXPECT_EQ(utf8::slice("Paris is big", 0, 4), "Paris");
  EXPECT_EQ(utf8::slice("日本語です", 1, 2), "本語");
  EXPECT_EQ(utf8::slice("x", 0, 0), "x");
}

TEST(Utf8, MalformedInputThrows) {
  EXPECT_THROW(utf8::decode("\xff"), ParseError);
  EXPECT_THROW(utf8::decode("\xe6\x97"), ParseError);  // truncated sequence
  EXPECT_THROW(utf8::decode("\xc0\xaf"), ParseError);  // overlong
}

TEST(Random, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Random, BelowStaysInRange) {
  Rng r(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto x = r.below(7);
    ASSERT_LT(x, 7u);
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Random, UniformInUnitInterval) {
  Rng r(5);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 10000.0, 0.5, 0.02);
}

TEST(Random, NormalMoments) {
  Rng r(11);
  double s1 = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s1 += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.03);
  EXPECT_NEAR(s2 / n, 1.0, 0.05);
}

TEST(Random, DeriveSeedSeparatesStages) {
  EXPECT_EQ(derive_seed(1, "pair"), derive_seed(1, "pair"));
  EXPECT_NE(derive_seed(1, "pair"), derive_seed(1, "emit"));
  EXPECT_NE(derive_seed(1, "pair"), derive_seed(2, "pair"));
}

TEST(Random, SampleIndicesDistinctSorted) {
  const auto idx = sample_indices(100, 10, 9);
  ASSERT_EQ(idx.size(), 10u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 10u);
  for (auto i : idx) EXPECT_LT(i, 100u);
  EXPECT_EQ(idx, sample_indices(100, 10, 9));
  EXPECT_EQ(sample_indices(5, 10, 1).size(), 5u);
  EXPECT_TRUE(sample_indices(0, 3, 1).empty());
}

TEST(Io, WriteReadRoundTrip) {
  test::TempDir dir;
  const auto p = dir.write("a.txt", "hello\nworld\n");
  EXPECT_EQ(io::read_file(p), "hello\nworld\n");
  EXPECT_TRUE(io::exists(p));
  EXPECT_FALSE(io::exists(dir.file("missing")));
}

TEST(Io, MissingFileNamesPath) {
  try {
    io::read_file("/nonexistent/dir/file.txt");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), "/nonexistent/dir/file.txt");
  }
}

TEST(Io, LineReaderStripsCrAndCountsLines) {
  test::TempDir dir;
  const auto p = dir.write("l.txt", "a\r\nb\n\nc");
  io::LineReader r(p);
  EXPECT_EQ(*r.next(), "a");
  EXPECT_EQ(r.line(), 1u);
  EXPECT_EQ(*r.next(), "b");
  EXPECT_EQ(*r.next(), "");
  EXPECT_EQ(*r.next(), "c");
  EXPECT_EQ(r.line(), 4u);
  EXPECT_FALSE(r.next().has_value());
}

TEST(Io, Sha256KnownVectors) {
  EXPECT_EQ(io::sha256(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  test::TempDir dir;
  EXPECT_EQ(io::sha256_file(dir.write("abc", "abc")), io::sha256("abc"));
}
