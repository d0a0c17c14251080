#include "dismax/kernels.hpp"

// NEON kernels (aarch64, where NEON is baseline). float64x2_t is 2-wide, so
// the 4-partial reduction contract is carried by two accumulator registers:
// acc01 holds partials {p0,p1}, acc23 holds {p2,p3}.

#if defined(__aarch64__)

#include <arm_neon.h>

namespace dismax::kernels {
namespace {

inline double hreduce(float64x2_t acc01, float64x2_t acc23) {
  float64x2_t pair = vaddq_f64(acc01, acc23);  // [p0+p2, p1+p3]
  return vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
}

void axpy_neon(std::size_t n, double a, const double* x, double* y) {
  const float64x2_t av = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t yv = vld1q_f64(y + i);
    yv = vaddq_f64(yv, vmulq_f64(av, vld1q_f64(x + i)));
    vst1q_f64(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_neon(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_neon(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_neon(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_neon(std::size_t n, double a, const double* x, double* out) {
  const float64x2_t av = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vmulq_f64(av, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

double dot_neon(std::size_t n, const double* a, const double* b) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    acc23 =
        vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double total = hreduce(acc01, acc23);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_neon(std::size_t n, const double* a) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vld1q_f64(a + i));
    acc23 = vaddq_f64(acc23, vld1q_f64(a + i + 2));
  }
  double total = hreduce(acc01, acc23);
  for (; i < n; ++i) total += a[i];
  return total;
}

double sqdist_neon(std::size_t n, const double* a, const double* b) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float64x2_t d01 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    float64x2_t d23 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc01 = vaddq_f64(acc01, vmulq_f64(d01, d01));
    acc23 = vaddq_f64(acc23, vmulq_f64(d23, d23));
  }
  double total = hreduce(acc01, acc23);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

double max_neon(std::size_t n, const double* a) {
  double m = a[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (a[i] > m) m = a[i];
  }
  return m + 0.0;
}

void relu_neon(std::size_t n, const double* x, double* out) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t xv = vld1q_f64(x + i);
    uint64x2_t mask = vcgtq_f64(xv, zero);
    vst1q_f64(out + i, vreinterpretq_f64_u64(vandq_u64(
                           vreinterpretq_u64_f64(xv), mask)));
  }
  for (; i < n; ++i) out[i] = (x[i] > 0.0) ? x[i] : 0.0;
}

void relu_grad_neon(std::size_t n, const double* x, const double* gy,
                    double* gx) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
    float64x2_t add = vreinterpretq_f64_u64(
        vandq_u64(vreinterpretq_u64_f64(vld1q_f64(gy + i)), mask));
    vst1q_f64(gx + i, vaddq_f64(vld1q_f64(gx + i), add));
  }
  for (; i < n; ++i) gx[i] += (x[i] > 0.0) ? gy[i] : 0.0;
}

}  // namespace

const Table* neon_table() {
  static const Table t{
      "neon",      axpy_neon, add_neon,  sub_neon,  mul_neon,      scale_neon,
      dot_neon,    sum_neon,  sqdist_neon, max_neon, relu_neon,
      relu_grad_neon,
  };
  return &t;
}

}  // namespace dismax::kernels

#else
namespace dismax::kernels {
const Table* neon_table() { return nullptr; }
}  // namespace dismax::kernels
#endif  // __aarch64__
