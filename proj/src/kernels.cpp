#include "wsp/kernels.hpp"

namespace wsp::kernels {

namespace {

std::vector<double> norms(std::span<const float> x, std::size_t n, std::size_t d) {
  std::vector<double> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    const double nn = std::sqrt(dot64(x.subspan(a * d, d), x.subspan(a * d, d)));
    if (nn == 0.0) throw DataError("cosine: zero vector at row " + std::to_string(a));
    out[a] = nn;
  }
  return out;
}

void check_dims(std::span<const float> x, std::size_t na, std::span<const float> y, std::size_t nb,
                std::size_t d) {
  if (x.size() != na * d || y.size() != nb * d) throw DataError("cosine_matrix: dimension mismatch");
}

void cosine_row(std::span<const float> x, std::span<const float> y, std::size_t a, std::size_t nb,
                std::size_t d, const std::vector<double>& nx, const std::vector<double>& ny,
                double* out) {
  const auto xa = x.subspan(a * d, d);
  for (std::size_t b = 0; b < nb; ++b) out[b] = dot64(xa, y.subspan(b * d, d)) / (nx[a] * ny[b]);
}

std::size_t argmax_strided(const double* m, std::size_t n, std::size_t stride) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (m[i * stride] > m[best * stride]) best = i;
  }
  return best;
}

}  // namespace

namespace ref {

std::vector<double> cosine_matrix(std::span<const float> x, std::size_t na, std::span<const float> y,
                                  std::size_t nb, std::size_t d) {
  check_dims(x, na, y, nb, d);
  const auto nx = norms(x, na, d);
  const auto ny = norms(y, nb, d);
  std::vector<double> out(na * nb);
  for (std::size_t a = 0; a < na; ++a) cosine_row(x, y, a, nb, d, nx, ny, out.data() + a * nb);
  return out;
}

std::vector<std::size_t> row_argmax(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = argmax_strided(m.data() + r * cols, cols, 1);
  return out;
}

std::vector<std::size_t> col_argmax(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> out(cols);
  for (std::size_t c = 0; c < cols; ++c) out[c] = argmax_strided(m.data() + c, rows, cols);
  return out;
}

}  // namespace ref

namespace par {

std::vector<double> cosine_matrix(std::span<const float> x, std::size_t na, std::span<const float> y,
                                  std::size_t nb, std::size_t d) {
  check_dims(x, na, y, nb, d);
  const auto nx = norms(x, na, d);
  const auto ny = norms(y, nb, d);
  std::vector<double> out(na * nb);
  const auto rows = static_cast<long long>(na);
#pragma omp parallel for schedule(static)
  for (long long a = 0; a < rows; ++a) {
    cosine_row(x, y, static_cast<std::size_t>(a), nb, d, nx, ny, out.data() + a * nb);
  }
  return out;
}

std::vector<std::size_t> row_argmax(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> out(rows);
  const auto n = static_cast<long long>(rows);
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < n; ++r) out[r] = argmax_strided(m.data() + r * cols, cols, 1);
  return out;
}

std::vector<std::size_t> col_argmax(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> out(cols);
  const auto n = static_cast<long long>(cols);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < n; ++c) out[c] = argmax_strided(m.data() + c, rows, cols);
  return out;
}

}  // namespace par

}  // namespace wsp::kernels
