#include "dismax/kernels.hpp"

// AVX2 kernels. Compiled with -mavx2 and only ever invoked behind the
// runtime capability check in the dispatcher. Reductions reproduce the
// scalar table's fixed blocked order exactly; see kernels.hpp.

#if defined(__x86_64__) || defined(_M_X64)
#if defined(__AVX2__)

#include <immintrin.h>

namespace dismax::kernels {
namespace {

// Combine a [p0,p1,p2,p3] accumulator as (p0+p2)+(p1+p3).
inline double hreduce(__m256d acc) {
  __m128d lo = _mm256_castpd256_pd128(acc);       // [p0, p1]
  __m128d hi = _mm256_extractf128_pd(acc, 1);     // [p2, p3]
  __m128d pair = _mm_add_pd(lo, hi);              // [p0+p2, p1+p3]
  return _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_avx2(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(std::size_t n, double a, const double* x, double* out) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

double dot_avx2(std::size_t n, const double* a, const double* b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double total = hreduce(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_avx2(std::size_t n, const double* a) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  }
  double total = hreduce(acc);
  for (; i < n; ++i) total += a[i];
  return total;
}

double sqdist_avx2(std::size_t n, const double* a, const double* b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double total = hreduce(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

double max_avx2(std::size_t n, const double* a) {
  double m = a[0];
  std::size_t i = 1;
  if (n >= 5) {
    __m256d mv = _mm256_loadu_pd(a + 1);
    for (i = 5; i + 4 <= n; i += 4) {
      mv = _mm256_max_pd(mv, _mm256_loadu_pd(a + i));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, mv);
    for (double v : lanes) {
      if (v > m) m = v;
    }
  }
  for (; i < n; ++i) {
    if (a[i] > m) m = a[i];
  }
  return m + 0.0;
}

void relu_avx2(std::size_t n, const double* x, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(xv, mask));
  }
  for (; i < n; ++i) out[i] = (x[i] > 0.0) ? x[i] : 0.0;
}

void relu_grad_avx2(std::size_t n, const double* x, const double* gy,
                    double* gx) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d add = _mm256_and_pd(_mm256_loadu_pd(gy + i), mask);
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), add));
  }
  for (; i < n; ++i) gx[i] += (x[i] > 0.0) ? gy[i] : 0.0;
}

}  // namespace

const Table* avx2_table() {
  static const Table t{
      "avx2",      axpy_avx2, add_avx2,  sub_avx2,  mul_avx2,      scale_avx2,
      dot_avx2,    sum_avx2,  sqdist_avx2, max_avx2, relu_avx2,
      relu_grad_avx2,
  };
  return &t;
}

}  // namespace dismax::kernels

#else
namespace dismax::kernels {
const Table* avx2_table() { return nullptr; }
}  // namespace dismax::kernels
#endif  // __AVX2__
#else
namespace dismax::kernels {
const Table* avx2_table() { return nullptr; }
}  // namespace dismax::kernels
#endif  // x86_64
