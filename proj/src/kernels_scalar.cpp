#include "dismax/kernels.hpp"

// Reference kernels. The reduction loops keep four explicit partial sums in
// the same layout a 4-lane vector register would hold, so the SIMD variants
// can match them bit for bit.

namespace dismax::kernels {
namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(std::size_t n, double a, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

double dot_scalar(std::size_t n, const double* a, const double* b) {
  double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    p0 += a[i] * b[i];
    p1 += a[i + 1] * b[i + 1];
    p2 += a[i + 2] * b[i + 2];
    p3 += a[i + 3] * b[i + 3];
  }
  double total = (p0 + p2) + (p1 + p3);
  for (std::size_t i = n4; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_scalar(std::size_t n, const double* a) {
  double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    p0 += a[i];
    p1 += a[i + 1];
    p2 += a[i + 2];
    p3 += a[i + 3];
  }
  double total = (p0 + p2) + (p1 + p3);
  for (std::size_t i = n4; i < n; ++i) total += a[i];
  return total;
}

double sqdist_scalar(std::size_t n, const double* a, const double* b) {
  double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const double d0 = a[i] - b[i];
    const double d1 = a[i + 1] - b[i + 1];
    const double d2 = a[i + 2] - b[i + 2];
    const double d3 = a[i + 3] - b[i + 3];
    p0 += d0 * d0;
    p1 += d1 * d1;
    p2 += d2 * d2;
    p3 += d3 * d3;
  }
  double total = (p0 + p2) + (p1 + p3);
  for (std::size_t i = n4; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

double max_scalar(std::size_t n, const double* a) {
  double m = a[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (a[i] > m) m = a[i];
  }
  return m + 0.0;  // canonicalize -0.0
}

void relu_scalar(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] > 0.0) ? x[i] : 0.0;
}

void relu_grad_scalar(std::size_t n, const double* x, const double* gy,
                      double* gx) {
  // Unconditional add of a selected value, mirroring the SIMD blend.
  for (std::size_t i = 0; i < n; ++i) {
    gx[i] += (x[i] > 0.0) ? gy[i] : 0.0;
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t{
      "scalar",     axpy_scalar, add_scalar,  sub_scalar,
      mul_scalar,   scale_scalar, dot_scalar, sum_scalar,
      sqdist_scalar, max_scalar,  relu_scalar, relu_grad_scalar,
  };
  return t;
}

}  // namespace dismax::kernels
