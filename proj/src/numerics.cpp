#include "dismax/numerics.hpp"

#include <cmath>

#include "dismax/errors.hpp"
#include "dismax/kernels.hpp"

namespace dismax {

namespace detail {

double l2norm(std::size_t n, const double* x) {
  return std::sqrt(kernels::active().dot(n, x, x));
}

void softmax_fill(std::size_t n, const double* z, double scale, double* out) {
  const kernels::Table& k = kernels::active();
  k.scale(n, scale, z, out);
  const double m = k.max(n, out);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(out[i] - m);
  const double total = k.sum(n, out);
  for (std::size_t i = 0; i < n; ++i) out[i] /= total;
}

void matmul_accumulate(std::size_t m, std::size_t k, std::size_t n,
                       const double* a, const double* b, double* out) {
  const kernels::Table& kt = kernels::active();
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* brow = b + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      kt.axpy(n, a[i * k + kk], brow, out + i * n);
    }
  }
}

}  // namespace detail

Tensor l2_normalize(const Tensor& v) {
  if (v.rank() != 1) {
    throw shape_error("l2_normalize: expected rank 1, got " +
                      shape_to_string(v.shape()));
  }
  if (v.size() == 0) throw shape_error("l2_normalize: empty vector");
  v.require_finite("l2_normalize input");
  Tensor out(v.shape());
  const double s = 1.0 / (detail::l2norm(v.size(), v.data()) + kNormEps);
  kernels::active().scale(v.size(), s, v.data(), out.data());
  out.require_finite("l2_normalize output");
  return out;
}

Tensor stable_softmax(const Tensor& z, double scale) {
  if (z.rank() != 1) {
    throw shape_error("stable_softmax: expected rank 1, got " +
                      shape_to_string(z.shape()));
  }
  if (z.size() == 0) throw shape_error("stable_softmax: empty input");
  z.require_finite("stable_softmax input");
  Tensor out(z.shape());
  detail::softmax_fill(z.size(), z.data(), scale, out.data());
  out.require_finite("stable_softmax output");
  return out;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double eps) {
  if (eps < 1e-7 || eps > 1e-3) {
    throw config_error("finite_diff_gradient: eps must lie in [1e-7, 1e-3]");
  }
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double hi = f(probe);
    probe[i] = saved - eps;
    const double lo = f(probe);
    probe[i] = saved;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw numeric_error("finite_diff_gradient: non-finite function value");
    }
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

}  // namespace dismax
