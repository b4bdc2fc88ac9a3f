// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma;
// nothing here may run before avx2_kernels() has checked the CPU.
#include "ptaco/simd/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <cmath>
#include <vector>

namespace ptaco::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i + 4),
                                                _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_avx2(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void add_avx2(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc_avx2(std::size_t n, const double* a, const double* b, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

// A(i, p) with either storage order.
struct AView {
  const double* data;
  std::size_t m, k;
  bool trans;
  double operator()(std::size_t i, std::size_t p) const {
    return trans ? data[p * m + i] : data[i * k + p];
  }
};

// C tile of 4 rows x 8 columns held in registers across the whole k loop.
void tile_4x8(const AView& a, const double* b, std::size_t n, std::size_t k,
              std::size_t i0, std::size_t j0, double* c, bool accumulate) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n + j0;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    __m256d av = _mm256_set1_pd(a(i0, p));
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_set1_pd(a(i0 + 1, p));
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_set1_pd(a(i0 + 2, p));
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_set1_pd(a(i0 + 3, p));
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  const __m256d rows[4][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}};
  for (std::size_t r = 0; r < 4; ++r) {
    double* crow = c + (i0 + r) * n + j0;
    if (accumulate) {
      _mm256_storeu_pd(crow, _mm256_add_pd(_mm256_loadu_pd(crow), rows[r][0]));
      _mm256_storeu_pd(crow + 4,
                       _mm256_add_pd(_mm256_loadu_pd(crow + 4), rows[r][1]));
    } else {
      _mm256_storeu_pd(crow, rows[r][0]);
      _mm256_storeu_pd(crow + 4, rows[r][1]);
    }
  }
}

// One row of C over columns [j0, j1) where j1 - j0 is a multiple of 4.
void row_vec(const AView& a, const double* b, std::size_t n, std::size_t k,
             std::size_t i, std::size_t j0, std::size_t j1, double* c,
             bool accumulate) {
  for (std::size_t j = j0; j + 4 <= j1; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      acc = _mm256_fmadd_pd(_mm256_set1_pd(a(i, p)),
                            _mm256_loadu_pd(b + p * n + j), acc);
    }
    double* dst = c + i * n + j;
    _mm256_storeu_pd(dst, accumulate ? _mm256_add_pd(_mm256_loadu_pd(dst), acc)
                                     : acc);
  }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
               bool trans_a, const double* b, bool trans_b, double* c,
               bool accumulate) {
  // B^T is packed into [k,n] so every path below streams rows of B.
  std::vector<double> packed;
  if (trans_b) {
    packed.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) packed[p * n + j] = b[j * k + p];
    b = packed.data();
  }
  const AView av{a, m, k, trans_a};
  const std::size_t n8 = n - n % 8;
  const std::size_t n4 = n - n % 4;
  const std::size_t m4 = m - m % 4;
  for (std::size_t i = 0; i < m4; i += 4)
    for (std::size_t j = 0; j < n8; j += 8) tile_4x8(av, b, n, k, i, j, c, accumulate);
  for (std::size_t i = m4; i < m; ++i) row_vec(av, b, n, k, i, 0, n8, c, accumulate);
  for (std::size_t i = 0; i < m; ++i) {
    row_vec(av, b, n, k, i, n8, n4, c, accumulate);
    for (std::size_t j = n4; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(av(i, p), b[p * n + j], acc);
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

const KernelTable kAvx2Table{Isa::kAvx2, axpy_avx2, dot_avx2,
                             sum_avx2,   add_avx2,  mul_avx2,
                             mul_acc_avx2, gemm_avx2};

}  // namespace

// CPU support is checked by the caller in dispatch.cpp.
const KernelTable* avx2_table_if_built() { return &kAvx2Table; }

}  // namespace ptaco::simd

#else

namespace ptaco::simd {
const KernelTable* avx2_table_if_built() { return nullptr; }
}  // namespace ptaco::simd

#endif
