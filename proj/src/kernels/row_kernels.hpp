#pragma once

// Per-row kernels shared by the serial and OpenMP drivers. Keeping the inner
// loops in one place is what makes the two drivers bit-identical.

#include <cstddef>
#include <span>

#include "netchoice/kernels.hpp"

namespace netchoice::kernels::detail {

inline void gemm_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                     std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  double* dst = out.row(i).data();
  for (std::size_t j = 0; j < n; ++j) dst[j] = 0.0;
  const double* arow = a.row(i).data();
  for (std::size_t p = 0; p < inner; ++p) {
    const double s = arow[p];
    if (s == 0.0) continue;
    const double* brow = b.row(p).data();
    for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
  }
}

// Row i of a^T b: sum over r of a(r, i) * b(r, :).
inline void gemm_tn_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                        std::size_t i) {
  const std::size_t n = b.cols();
  double* dst = out.row(i).data();
  for (std::size_t j = 0; j < n; ++j) dst[j] = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double s = a(r, i);
    if (s == 0.0) continue;
    const double* brow = b.row(r).data();
    for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
  }
}

inline void gemm_nt_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                        std::size_t i) {
  const std::size_t inner = a.cols();
  const double* arow = a.row(i).data();
  double* dst = out.row(i).data();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.row(j).data();
    double acc = 0.0;
    for (std::size_t p = 0; p < inner; ++p) acc += arow[p] * brow[p];
    dst[j] = acc;
  }
}

inline void spmm_row(const CsrView& w, const DenseMatrix& a, DenseMatrix& out, std::size_t i) {
  const std::size_t n = a.cols();
  double* dst = out.row(i).data();
  for (std::size_t j = 0; j < n; ++j) dst[j] = 0.0;
  for (std::size_t e = w.row_ptr[i]; e < w.row_ptr[i + 1]; ++e) {
    const double s = w.values[e];
    const double* arow = a.row(w.col_idx[e]).data();
    for (std::size_t j = 0; j < n; ++j) dst[j] += s * arow[j];
  }
}

inline double spmv_row(const CsrView& w, std::span<const double> x, std::size_t i) {
  double acc = 0.0;
  for (std::size_t e = w.row_ptr[i]; e < w.row_ptr[i + 1]; ++e) acc += w.values[e] * x[w.col_idx[e]];
  return acc;
}

void check_gemm(const DenseMatrix& a, const DenseMatrix& b);
void check_gemm_tn(const DenseMatrix& a, const DenseMatrix& b);
void check_gemm_nt(const DenseMatrix& a, const DenseMatrix& b);
void check_spmm(const CsrView& w, std::size_t a_rows);

inline void ensure_shape(DenseMatrix& out, std::size_t rows, std::size_t cols) {
  if (out.rows() != rows || out.cols() != cols) out = DenseMatrix(rows, cols);
}

}  // namespace netchoice::kernels::detail
