#include "dismax/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "dismax/errors.hpp"

namespace dismax {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor Tensor::scalar(double v) {
  Tensor t{std::vector<std::size_t>{}};
  t.data_[0] = v;
  return t;
}

Tensor Tensor::from_vector(std::vector<double> values) {
  Tensor t;
  t.shape_ = {values.size()};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape_); }

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
  if (shape_product(new_shape) != size()) {
    throw shape_error("reshape from " + shape_to_string(shape_) + " to " +
                      shape_to_string(new_shape) + " changes element count");
  }
  Tensor t;
  t.shape_ = std::move(new_shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::require_finite(const char* what) const {
  if (!all_finite()) {
    throw numeric_error(std::string(what) + ": non-finite value in tensor " +
                        shape_to_string(shape_));
  }
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

}  // namespace dismax
