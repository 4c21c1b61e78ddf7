#include "netchoice/error.hpp"
#include "row_kernels.hpp"

namespace netchoice::kernels {

namespace detail {

void check_gemm(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a) + " x " +
                     shape_string(b));
}

void check_gemm_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul(a^T, b): row counts differ, " + shape_string(a) + " vs " +
                     shape_string(b));
}

void check_gemm_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul(a, b^T): column counts differ, " + shape_string(a) + " vs " +
                     shape_string(b));
}

void check_spmm(const CsrView& w, std::size_t a_rows) {
  if (w.cols != a_rows)
    throw ShapeError("spmm: graph has " + std::to_string(w.cols) + " nodes but operand has " +
                     std::to_string(a_rows) + " rows");
}

}  // namespace detail

namespace serial {

void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  detail::check_gemm(a, b);
  detail::ensure_shape(out, a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::gemm_row(a, b, out, i);
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  detail::check_gemm_tn(a, b);
  detail::ensure_shape(out, a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) detail::gemm_tn_row(a, b, out, i);
}

void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  detail::check_gemm_nt(a, b);
  detail::ensure_shape(out, a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::gemm_nt_row(a, b, out, i);
}

void spmm(const CsrView& w, const DenseMatrix& a, DenseMatrix& out) {
  detail::check_spmm(w, a.rows());
  detail::ensure_shape(out, w.rows, a.cols());
  for (std::size_t i = 0; i < w.rows; ++i) detail::spmm_row(w, a, out, i);
}

void spmv(const CsrView& w, std::span<const double> x, std::span<double> out) {
  if (x.size() != w.cols || out.size() != w.rows) throw ShapeError("spmv: length mismatch");
  for (std::size_t i = 0; i < w.rows; ++i) out[i] = detail::spmv_row(w, x, i);
}

}  // namespace serial
}  // namespace netchoice::kernels
