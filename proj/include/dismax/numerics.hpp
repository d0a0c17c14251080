#pragma once

#include <cstddef>
#include <functional>

#include "dismax/tensor.hpp"

namespace dismax {

// Denominator guard for 2-norm normalization; keeps the zero-vector corner
// total and differentiable.
inline constexpr double kNormEps = 1e-12;
// Floor applied to probabilities before taking logarithms.
inline constexpr double kProbFloor = 1e-300;

// out = v / (||v|| + kNormEps); rank-1 only.
Tensor l2_normalize(const Tensor& v);

// Softmax of scale*z with max-subtraction; rank-1, nonempty.
Tensor stable_softmax(const Tensor& z, double scale);

// Central-difference gradient of a scalar function; eps in [1e-7, 1e-3].
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double eps);

namespace detail {
double l2norm(std::size_t n, const double* x);
// Fills out[0..n) with softmax(scale * z); n >= 1.
void softmax_fill(std::size_t n, const double* z, double scale, double* out);
// out (m×n, zero-initialized by the caller) += a (m×k) · b (k×n), with the
// fixed k-outer accumulation order shared by the tape and inference paths.
void matmul_accumulate(std::size_t m, std::size_t k, std::size_t n,
                       const double* a, const double* b, double* out);
}  // namespace detail

}  // namespace dismax
