#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace dismax {

// Dense row-major tensor of 64-bit reals. Rank 0 (empty shape) is a scalar
// with one element; rank 1 vectors, rank 2 matrices and rank 3 images (H,W,C)
// cover everything the models need.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  static Tensor scalar(double v);
  static Tensor from_vector(std::vector<double> values);
  static Tensor zeros_like(const Tensor& t);

  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Reshape without moving data; product of dims must match size().
  Tensor reshaped(std::vector<std::size_t> new_shape) const;

  void fill(double v);
  bool all_finite() const;
  // Throws numeric_error naming `what` if any entry is non-finite.
  void require_finite(const char* what) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace dismax
