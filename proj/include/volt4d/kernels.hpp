#pragma once

// Small dense matrix kernels used by the lowered convolutions. All matrices
// are row-major and tightly packed. Register/cache blocking is chosen for the
// shapes convolution produces: few output channels (M), long reduction (K),
// moderately long spatial extent (N).

#include <algorithm>
#include <array>
#include <cstddef>

namespace volt4d::kernels {

inline constexpr std::size_t kColumnBlock = 64;

/// C (M x N) = A (M x K) * B (K x N).
inline void gemm_nn(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B, double* C) {
  alignas(64) double acc[4][kColumnBlock];
  for (std::size_t n0 = 0; n0 < N; n0 += kColumnBlock) {
    const std::size_t nb = std::min(kColumnBlock, N - n0);
    std::size_t m0 = 0;
    for (; m0 + 4 <= M; m0 += 4) {
      for (auto& row : acc) std::fill_n(row, nb, 0.0);
      const double* a0 = A + (m0 + 0) * K;
      const double* a1 = A + (m0 + 1) * K;
      const double* a2 = A + (m0 + 2) * K;
      const double* a3 = A + (m0 + 3) * K;
      for (std::size_t k = 0; k < K; ++k) {
        const double* b = B + k * N + n0;
        const double w0 = a0[k], w1 = a1[k], w2 = a2[k], w3 = a3[k];
        for (std::size_t j = 0; j < nb; ++j) {
          const double bj = b[j];
          acc[0][j] += w0 * bj;
          acc[1][j] += w1 * bj;
          acc[2][j] += w2 * bj;
          acc[3][j] += w3 * bj;
        }
      }
      for (std::size_t i = 0; i < 4; ++i) std::copy_n(acc[i], nb, C + (m0 + i) * N + n0);
    }
    for (; m0 < M; ++m0) {
      std::fill_n(acc[0], nb, 0.0);
      const double* a = A + m0 * K;
      for (std::size_t k = 0; k < K; ++k) {
        const double* b = B + k * N + n0;
        const double w = a[k];
        for (std::size_t j = 0; j < nb; ++j) acc[0][j] += w * b[j];
      }
      std::copy_n(acc[0], nb, C + m0 * N + n0);
    }
  }
}

inline double dot(const double* a, const double* b, std::size_t n) {
  std::array<double, 8> part{};
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8)
    for (std::size_t l = 0; l < 8; ++l) part[l] += a[j + l] * b[j + l];
  double s = 0.0;
  for (; j < n; ++j) s += a[j] * b[j];
  for (double p : part) s += p;
  return s;
}

/// C (M x K) += A (M x N) * B^T, with B stored as (K x N).
inline void gemm_nt_acc(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B, double* C) {
  // Four rows of B per pass over A; each entry keeps the summation order of dot().
  std::size_t k0 = 0;
  for (; k0 + 4 <= K; k0 += 4) {
    const double* b0 = B + (k0 + 0) * N;
    const double* b1 = B + (k0 + 1) * N;
    const double* b2 = B + (k0 + 2) * N;
    const double* b3 = B + (k0 + 3) * N;
    for (std::size_t m = 0; m < M; ++m) {
      const double* a = A + m * N;
      alignas(64) double part[4][8]{};
      std::size_t j = 0;
      for (; j + 8 <= N; j += 8)
        for (std::size_t l = 0; l < 8; ++l) {
          const double v = a[j + l];
          part[0][l] += v * b0[j + l];
          part[1][l] += v * b1[j + l];
          part[2][l] += v * b2[j + l];
          part[3][l] += v * b3[j + l];
        }
      const double* bs[4] = {b0, b1, b2, b3};
      for (std::size_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (std::size_t t = j; t < N; ++t) s += a[t] * bs[r][t];
        for (double p : part[r]) s += p;
        C[m * K + k0 + r] += s;
      }
    }
  }
  for (std::size_t k = k0; k < K; ++k) {
    const double* b = B + k * N;
    for (std::size_t m = 0; m < M; ++m) C[m * K + k] += dot(A + m * N, b, N);
  }
}

/// C (K x N) = A^T (K x M) * B (M x N), with A stored as (M x K).
inline void gemm_tn(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B, double* C) {
  alignas(64) double acc[kColumnBlock];
  for (std::size_t n0 = 0; n0 < N; n0 += kColumnBlock) {
    const std::size_t nb = std::min(kColumnBlock, N - n0);
    for (std::size_t k = 0; k < K; ++k) {
      std::fill_n(acc, nb, 0.0);
      for (std::size_t m = 0; m < M; ++m) {
        const double w = A[m * K + k];
        const double* b = B + m * N + n0;
        for (std::size_t j = 0; j < nb; ++j) acc[j] += w * b[j];
      }
      std::copy_n(acc, nb, C + k * N + n0);
    }
  }
}

}  // namespace volt4d::kernels
