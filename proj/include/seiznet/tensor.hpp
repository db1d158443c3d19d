#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "seiznet/error.hpp"

namespace seiznet {

std::string shape_str(const std::vector<std::size_t>& shape);

// Dense row-major N-dimensional array of doubles; the value carrier for
// signals, feature windows, layer activations and parameters. Invariant:
// product(shape) == data.size() and every extent >= 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor vector(std::vector<double> data);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_[axis]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::initializer_list<std::size_t> idx) {
    return data_[offset(idx)];
  }
  double at(std::initializer_list<std::size_t> idx) const {
    return data_[offset(idx)];
  }

  // Same element count, new shape; data is shared by value copy.
  Tensor reshaped(std::vector<std::size_t> new_shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double value);

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// c[i,j] = sum_p a[i,p] * b[p,j]; both operands rank 2.
Tensor matmul(const Tensor& a, const Tensor& b);

enum class EwOp { add, sub, mul };
Tensor ew(EwOp op, const Tensor& a, const Tensor& b);

inline constexpr double kEluAlpha = 1.0;

enum class Activation { sigmoid, tanh, elu };

double sigmoid(double x);
double elu(double x);
double activate(Activation kind, double x);
double activate_grad(Activation kind, double x);
Tensor activate(Activation kind, const Tensor& x);
Tensor activate_grad(Activation kind, const Tensor& x);

}  // namespace seiznet
