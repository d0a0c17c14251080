#pragma once

#include <cstddef>
#include <vector>

namespace dismax::kernels {

// Function table for the data-parallel inner loops. Reductions (dot, sum,
// sqdist) follow a fixed blocked order: four partial accumulators, lane j
// sums the elements with index = j (mod 4) over the first 4*(n/4) elements,
// the partials are combined as (p0+p2)+(p1+p3), and the tail is added left
// to right. The scalar reference implements exactly that order and the SIMD
// variants use separate mul/add (no FMA), so every backend produces
// bit-identical results and runtime dispatch never changes numerics.
struct Table {
  const char* name;
  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  void (*add)(std::size_t n, const double* a, const double* b, double* out);
  void (*sub)(std::size_t n, const double* a, const double* b, double* out);
  void (*mul)(std::size_t n, const double* a, const double* b, double* out);
  // out[i] = a * x[i]
  void (*scale)(std::size_t n, double a, const double* x, double* out);
  double (*dot)(std::size_t n, const double* a, const double* b);
  double (*sum)(std::size_t n, const double* a);
  // sum of (a[i]-b[i])^2
  double (*sqdist)(std::size_t n, const double* a, const double* b);
  double (*max)(std::size_t n, const double* a);  // n >= 1, no NaNs
  void (*relu)(std::size_t n, const double* x, double* out);
  // gx[i] += (x[i] > 0) ? gy[i] : 0
  void (*relu_grad)(std::size_t n, const double* x, const double* gy,
                    double* gx);
};

const Table& scalar_table();

// Tables compiled for this target; entries are safe to call only when the
// matching probe returns true (NEON is baseline on aarch64).
bool avx2_supported();
const Table* avx2_table();  // nullptr when not compiled in
const Table* neon_table();

// Backend chosen once per process. The environment variable
// DISMAX_KERNEL=scalar|avx2|neon overrides CPU detection.
const Table& active();

// All tables usable on this machine, scalar first; for equivalence tests.
std::vector<const Table*> available_tables();

}  // namespace dismax::kernels
