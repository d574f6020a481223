#pragma once

#include <cstddef>
#include <string_view>

// Compute kernels behind the tensor engine. Every entry has a portable scalar
// reference implementation; on x86-64 an AVX2+FMA variant is selected once at
// process start when the CPU supports it. Tests and callers can pin a lane
// with force() or the MIXCAM_KERNELS environment variable ("scalar"/"avx2").
namespace mixcam::kernels {

struct Table {
  const char* name;

  // Elementwise. Output must not alias the inputs unless noted.
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* x, double c, double* out, std::size_t n);  // out = c*x
  void (*axpy)(double c, const double* x, double* y, std::size_t n);     // y += c*x
  void (*relu)(const double* x, double* out, std::size_t n);
  // acc += g where x > 0
  void (*relu_grad)(const double* x, const double* g, double* acc, std::size_t n);

  double (*reduce_sum)(const double* x, std::size_t n);
  double (*reduce_max)(const double* x, std::size_t n);  // n >= 1
  double (*dot)(const double* a, const double* b, std::size_t n);

  // Row-major accumulating GEMM: C += op(A) * op(B).
  //   gemm_nn: A[M,K] * B[K,N]
  //   gemm_nt: A[M,K] * B[N,K]^T
  //   gemm_tn: A[K,M]^T * B[K,N]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);

  // Fused Adam step on one parameter array. Weight decay is folded into the
  // gradient before the moment updates (classic L2). bc1/bc2 are the bias
  // corrections 1-beta1^t and 1-beta2^t.
  void (*adam_update)(double* w, double* m, double* v, const double* g, std::size_t n, double lr,
                      double beta1, double beta2, double eps, double weight_decay, double bc1,
                      double bc2);
};

const Table& scalar_table();

// nullptr when this build or CPU cannot run AVX2+FMA.
const Table* avx2_table();

const Table& active();
void force(std::string_view name);

}  // namespace mixcam::kernels
