// AVX2+FMA lane of the kernel table. This translation unit is compiled with
// -mavx2 -mfma on x86-64; avx2_table() still gates on a runtime CPUID check so
// the binary stays safe on older machines (the scalar lane is used there).

#include "mixcam/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace mixcam::kernels {
namespace {

void add_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_k(const double* x, double c, double* out, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(cv, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = c * x[i];
}

void axpy_k(double c, const double* x, double* y, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(cv, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += c * x[i];
}

void relu_k(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_k(const double* x, const double* g, double* acc, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gm = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), gm));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) acc[i] += g[i];
  }
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double reduce_sum_k(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double reduce_max_k(const double* x, std::size_t n) {
  double m = x[0];
  std::size_t i = 0;
  if (n >= 4) {
    __m256d mv = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
    const __m128d lo = _mm256_castpd256_pd128(mv);
    const __m128d hi = _mm256_extractf128_pd(mv, 1);
    const __m128d mx = _mm_max_pd(lo, hi);
    m = _mm_cvtsd_f64(_mm_max_sd(mx, _mm_unpackhi_pd(mx, mx)));
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double dot_k(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Broadcast-A kernel: one row of C stays hot while rows of B stream through.
void gemm_nn_k(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    double* ci = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(ai[p]);
      const double* bp = b + p * ldb;
      std::size_t j = 0;
      for (; j + 16 <= n; j += 16) {
        _mm256_storeu_pd(ci + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j)));
        _mm256_storeu_pd(
            ci + j + 4,
            _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j + 4), _mm256_loadu_pd(ci + j + 4)));
        _mm256_storeu_pd(
            ci + j + 8,
            _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j + 8), _mm256_loadu_pd(ci + j + 8)));
        _mm256_storeu_pd(
            ci + j + 12,
            _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j + 12), _mm256_loadu_pd(ci + j + 12)));
      }
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(ci + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j)));
      }
      for (; j < n; ++j) ci[j] += ai[p] * bp[j];
    }
  }
}

void gemm_nt_k(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    double* ci = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) ci[j] += dot_k(ai, b + j * ldb, k);
  }
}

void gemm_tn_k(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(a[p * lda + i]);
      const double* bp = b + p * ldb;
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        _mm256_storeu_pd(ci + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j)));
        _mm256_storeu_pd(
            ci + j + 4,
            _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j + 4), _mm256_loadu_pd(ci + j + 4)));
      }
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(ci + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j)));
      }
      for (; j < n; ++j) ci[j] += a[p * lda + i] * bp[j];
    }
  }
}

void adam_update_k(double* w, double* m, double* v, const double* g, std::size_t n, double lr,
                   double beta1, double beta2, double eps, double weight_decay, double bc1,
                   double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d one_b1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d one_b2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d wd = _mm256_set1_pd(weight_decay);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d ge = _mm256_add_pd(_mm256_loadu_pd(g + i), _mm256_mul_pd(wd, wv));
    const __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(one_b1, ge));
    const __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(one_b2, _mm256_mul_pd(ge, ge)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(mv, bc1v);
    const __m256d vhat = _mm256_div_pd(vv, bc2v);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(wv, _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom)));
  }
  for (; i < n; ++i) {
    const double ge = g[i] + weight_decay * w[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * ge;
    v[i] = beta2 * v[i] + (1.0 - beta2) * (ge * ge);
    w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

const Table table = {
    .name = "avx2",
    .add = add_k,
    .sub = sub_k,
    .mul = mul_k,
    .scale = scale_k,
    .axpy = axpy_k,
    .relu = relu_k,
    .relu_grad = relu_grad_k,
    .reduce_sum = reduce_sum_k,
    .reduce_max = reduce_max_k,
    .dot = dot_k,
    .gemm_nn = gemm_nn_k,
    .gemm_nt = gemm_nt_k,
    .gemm_tn = gemm_tn_k,
    .adam_update = adam_update_k,
};

}  // namespace

const Table* avx2_table() {
#if defined(__GNUC__) || defined(__clang__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &table;
  return nullptr;
#else
  return &table;
#endif
}

}  // namespace mixcam::kernels

#else  // !(__AVX2__ && __FMA__)

namespace mixcam::kernels {
const Table* avx2_table() { return nullptr; }
}  // namespace mixcam::kernels

#endif
