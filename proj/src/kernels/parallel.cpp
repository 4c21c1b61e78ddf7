#include <omp.h>

#include <cstdint>

#include "netchoice/error.hpp"
#include "row_kernels.hpp"

namespace netchoice::kernels {

namespace parallel {

void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  detail::check_gemm(a, b);
  detail::ensure_shape(out, a.rows(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) detail::gemm_row(a, b, out, static_cast<std::size_t>(i));
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  detail::check_gemm_tn(a, b);
  detail::ensure_shape(out, a.cols(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i)
    detail::gemm_tn_row(a, b, out, static_cast<std::size_t>(i));
}

void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  detail::check_gemm_nt(a, b);
  detail::ensure_shape(out, a.rows(), b.rows());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i)
    detail::gemm_nt_row(a, b, out, static_cast<std::size_t>(i));
}

void spmm(const CsrView& w, const DenseMatrix& a, DenseMatrix& out) {
  detail::check_spmm(w, a.rows());
  detail::ensure_shape(out, w.rows, a.cols());
  const auto rows = static_cast<std::int64_t>(w.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) detail::spmm_row(w, a, out, static_cast<std::size_t>(i));
}

void spmv(const CsrView& w, std::span<const double> x, std::span<double> out) {
  if (x.size() != w.cols || out.size() != w.rows) throw ShapeError("spmv: length mismatch");
  const auto rows = static_cast<std::int64_t>(w.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i)
    out[static_cast<std::size_t>(i)] = detail::spmv_row(w, x, static_cast<std::size_t>(i));
}

}  // namespace parallel

namespace {

bool go_parallel(std::size_t work) {
  return work >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}

}  // namespace

void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (go_parallel(a.rows() * a.cols() * b.cols())) parallel::gemm(a, b, out);
  else serial::gemm(a, b, out);
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (go_parallel(a.rows() * a.cols() * b.cols())) parallel::gemm_tn(a, b, out);
  else serial::gemm_tn(a, b, out);
}

void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (go_parallel(a.rows() * a.cols() * b.rows())) parallel::gemm_nt(a, b, out);
  else serial::gemm_nt(a, b, out);
}

void spmm(const CsrView& w, const DenseMatrix& a, DenseMatrix& out) {
  if (go_parallel(w.values.size() * a.cols())) parallel::spmm(w, a, out);
  else serial::spmm(w, a, out);
}

void spmv(const CsrView& w, std::span<const double> x, std::span<double> out) {
  if (go_parallel(w.values.size())) parallel::spmv(w, x, out);
  else serial::spmv(w, x, out);
}

}  // namespace netchoice::kernels
