#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "wsp/error.hpp"
#include "wsp/kernels.hpp"
#include "wsp/parallel.hpp"
#include "wsp/random.hpp"

using namespace wsp;
namespace k = wsp::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(Rng& rng, std::size_t n) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return v;
}

template <typename T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

class Threads : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { set_threads(GetParam()); }
  void TearDown() override { set_threads(0); }
};

}  // namespace

TEST(Cosine, ClosedForms) {
  const std::vector<float> u = {1, 0}, v = {0, 1}, w = {2, 0};
  EXPECT_EQ(k::cosine<float>(u, v), 0.0);
  EXPECT_EQ(k::cosine<float>(u, w), 1.0);
  const std::vector<float> z = {0, 0};
  EXPECT_THROW(k::cosine<float>(u, z), DataError);
}

TEST_P(Threads, CosineMatrixMatchesReference) {
  Rng rng(1);
  const std::size_t na = 37, nb = 23, d = 19;
  const auto x = random_vec<float>(rng, na * d), y = random_vec<float>(rng, nb * d);
  const auto r = k::ref::cosine_matrix(x, na, y, nb, d);
  EXPECT_TRUE(bitwise_equal(r, k::par::cosine_matrix(x, na, y, nb, d)));
  EXPECT_NEAR(r[5 * nb + 7], k::cosine<float>({x.data() + 5 * d, d}, {y.data() + 7 * d, d}), 1e-15);
}

TEST_P(Threads, ArgmaxMatchesReference) {
  Rng rng(2);
  const std::size_t rows = 41, cols = 29;
  std::vector<double> m(rows * cols);
  for (auto& v : m) v = static_cast<double>(rng.below(4));
  EXPECT_EQ(k::ref::row_argmax(m, rows, cols), k::par::row_argmax(m, rows, cols));
  EXPECT_EQ(k::ref::col_argmax(m, rows, cols), k::par::col_argmax(m, rows, cols));
}

TEST_P(Threads, LinearKernelsMatchReference) {
  Rng rng(3);
  const std::size_t n = 17, in = 13, out = 11;
  const auto x = random_vec<float>(rng, n * in), w = random_vec<float>(rng, in * out), b = random_vec<float>(rng, out);
  const auto dy = random_vec<float>(rng, n * out);

  std::vector<float> y1(n * out), y2(n * out);
  k::ref::linear_forward(x.data(), w.data(), b.data(), y1.data(), n, in, out);
  k::par::linear_forward(x.data(), w.data(), b.data(), y2.data(), n, in, out);
  EXPECT_TRUE(bitwise_equal(y1, y2));

  std::vector<float> dx1(n * in, 0.5f), dx2(n * in, 0.5f);
  k::ref::linear_backward_input(dy.data(), w.data(), dx1.data(), n, in, out);
  k::par::linear_backward_input(dy.data(), w.data(), dx2.data(), n, in, out);
  EXPECT_TRUE(bitwise_equal(dx1, dx2));

  std::vector<float> dw1(in * out, 0.25f), dw2(in * out, 0.25f), db1(out), db2(out);
  k::ref::linear_backward_weight(x.data(), dy.data(), dw1.data(), db1.data(), n, in, out);
  k::par::linear_backward_weight(x.data(), dy.data(), dw2.data(), db2.data(), n, in, out);
  EXPECT_TRUE(bitwise_equal(dw1, dw2));
  EXPECT_TRUE(bitwise_equal(db1, db2));
}

INSTANTIATE_TEST_SUITE_P(Kernels, Threads, ::testing::Values(1, 2, 8));

TEST(Linear, MatchesNaiveMatmul) {
  // 1x2 * 2x3 + b
  const std::vector<double> x = {1, 2}, w = {1, 2, 3, 4, 5, 6}, b = {0.5, 0, -1};
  std::vector<double> y(3);
  k::ref::linear_forward(x.data(), w.data(), b.data(), y.data(), 1, 2, 3);
  EXPECT_EQ(y, (std::vector<double>{9.5, 12, 14}));
}

TEST(Parallel, CheckedForRethrowsLowestIndex) {
  try {
    parallel_for_checked(10, [](std::size_t i) {
      if (i == 3 || i == 7) throw DataError("at " + std::to_string(i));
    });
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "at 3");
  }
}
