#include "chisep/tensor.hpp"

#include <cblas.h>

#include "chisep/errors.hpp"

namespace chisep {

std::string to_string(const TensorShape& s) {
  return "[" + std::to_string(s.n) + ", " + std::to_string(s.nx) + "x" + std::to_string(s.ny) + "x" +
         std::to_string(s.nz) + ", " + std::to_string(s.c) + "]";
}

void require_shape(const TensorShape& a, const TensorShape& b, const char* what) {
  if (!(a == b)) throw InvalidArgument(std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
}

template <>
void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda, const float* b, int ldb,
                 float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

template <>
void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
                  int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

template <typename T>
void add_inplace(std::span<T> dst, std::span<const T> src) {
  if (dst.size() != src.size()) throw InvalidArgument("add_inplace: size mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template void add_inplace<float>(std::span<float>, std::span<const float>);
template void add_inplace<double>(std::span<double>, std::span<const double>);

}  // namespace chisep
