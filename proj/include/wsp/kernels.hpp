#pragma once

// Dense kernels in two flavours. `ref` is the plain serial implementation
// kept as the testing reference; `par` splits the same loops across OpenMP
// threads over independent output rows, so both produce bitwise-identical
// results for any thread count.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "wsp/error.hpp"

namespace wsp::kernels {

template <typename T>
double dot64(std::span<const T> u, std::span<const T> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

/// Cosine similarity with 64-bit accumulation. Throws DataError on a zero
/// vector or a dimension mismatch.
template <typename T>
double cosine(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw DataError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                    std::to_string(v.size()));
  }
  const double nu = std::sqrt(dot64(u, u));
  const double nv = std::sqrt(dot64(v, v));
  if (nu == 0.0 || nv == 0.0) throw DataError("cosine: zero vector");
  return dot64(u, v) / (nu * nv);
}

namespace ref {

/// out[a][b] = cosine(x_a, y_b); x is na x d, y is nb x d.
std::vector<double> cosine_matrix(std::span<const float> x, std::size_t na, std::span<const float> y,
                                  std::size_t nb, std::size_t d);

/// Lowest index of the maximum in each row / column of a rows x cols matrix.
std::vector<std::size_t> row_argmax(std::span<const double> m, std::size_t rows, std::size_t cols);
std::vector<std::size_t> col_argmax(std::span<const double> m, std::size_t rows, std::size_t cols);

/// y[n, out] = x[n, in] * w[in, out] + b
template <typename T>
void linear_forward(const T* x, const T* w, const T* b, T* y, std::size_t n, std::size_t in,
                    std::size_t out) {
  for (std::size_t i = 0; i < n; ++i) {
    T* yi = y + i * out;
    for (std::size_t o = 0; o < out; ++o) yi[o] = b ? b[o] : T(0);
    const T* xi = x + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      const T a = xi[k];
      const T* wk = w + k * out;
      for (std::size_t o = 0; o < out; ++o) yi[o] += a * wk[o];
    }
  }
}

/// dx[n, in] += dy[n, out] * w^T
template <typename T>
void linear_backward_input(const T* dy, const T* w, T* dx, std::size_t n, std::size_t in,
                           std::size_t out) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyi = dy + i * out;
    T* dxi = dx + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      const T* wk = w + k * out;
      T acc = 0;
      for (std::size_t o = 0; o < out; ++o) acc += dyi[o] * wk[o];
      dxi[k] += acc;
    }
  }
}

/// dw[in, out] += x^T * dy, db[out] += colsum(dy)
template <typename T>
void linear_backward_weight(const T* x, const T* dy, T* dw, T* db, std::size_t n, std::size_t in,
                            std::size_t out) {
  for (std::size_t k = 0; k < in; ++k) {
    T* dwk = dw + k * out;
    for (std::size_t i = 0; i < n; ++i) {
      const T a = x[i * in + k];
      const T* dyi = dy + i * out;
      for (std::size_t o = 0; o < out; ++o) dwk[o] += a * dyi[o];
    }
  }
  if (db) {
    for (std::size_t i = 0; i < n; ++i) {
      const T* dyi = dy + i * out;
      for (std::size_t o = 0; o < out; ++o) db[o] += dyi[o];
    }
  }
}

}  // namespace ref

namespace par {

std::vector<double> cosine_matrix(std::span<const float> x, std::size_t na, std::span<const float> y,
                                  std::size_t nb, std::size_t d);
std::vector<std::size_t> row_argmax(std::span<const double> m, std::size_t rows, std::size_t cols);
std::vector<std::size_t> col_argmax(std::span<const double> m, std::size_t rows, std::size_t cols);

template <typename T>
void linear_forward(const T* x, const T* w, const T* b, T* y, std::size_t n, std::size_t in,
                    std::size_t out) {
  const auto rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i) {
    ref::linear_forward(x + i * in, w, b, y + i * out, 1, in, out);
  }
}

template <typename T>
void linear_backward_input(const T* dy, const T* w, T* dx, std::size_t n, std::size_t in,
                           std::size_t out) {
  const auto rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i) {
    ref::linear_backward_input(dy + i * out, w, dx + i * in, 1, in, out);
  }
}

template <typename T>
void linear_backward_weight(const T* x, const T* dy, T* dw, T* db, std::size_t n, std::size_t in,
                            std::size_t out) {
  const auto inputs = static_cast<long long>(in);
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < inputs; ++k) {
    T* dwk = dw + k * out;
    for (std::size_t i = 0; i < n; ++i) {
      const T a = x[i * in + k];
      const T* dyi = dy + i * out;
      for (std::size_t o = 0; o < out; ++o) dwk[o] += a * dyi[o];
    }
  }
  if (db) {
    for (std::size_t i = 0; i < n; ++i) {
      const T* dyi = dy + i * out;
      for (std::size_t o = 0; o < out; ++o) db[o] += dyi[o];
    }
  }
}

}  // namespace par

}  // namespace wsp::kernels
