#pragma once

#include <cstddef>
#include <span>

#include "netchoice/matrix.hpp"

namespace netchoice {

/// Borrowed view of a compressed-sparse-row matrix.
struct CsrView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const std::size_t> row_ptr;
  std::span<const std::size_t> col_idx;
  std::span<const double> values;
};

namespace kernels {

// Every kernel computes each output element with one fixed summation order.
// The OpenMP variants only distribute whole output rows over threads, so
// serial and parallel results are bit-identical for any thread count.

namespace serial {
void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);     // a * b
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);  // a^T * b
void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);  // a * b^T
void spmm(const CsrView& w, const DenseMatrix& a, DenseMatrix& out);
void spmv(const CsrView& w, std::span<const double> x, std::span<double> out);
}  // namespace serial

namespace parallel {
void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void spmm(const CsrView& w, const DenseMatrix& a, DenseMatrix& out);
void spmv(const CsrView& w, std::span<const double> x, std::span<double> out);
}  // namespace parallel

// Dispatchers: pick the parallel kernel when the work is large enough and we
// are not already inside a parallel region. Output is resized as needed.
void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void spmm(const CsrView& w, const DenseMatrix& a, DenseMatrix& out);
void spmv(const CsrView& w, std::span<const double> x, std::span<double> out);

/// Minimum multiply-add count before the dispatchers go parallel.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

}  // namespace kernels
}  // namespace netchoice
