#include "seiznet/tensor.hpp"

#include <cmath>
#include <sstream>

namespace seiznet {

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << ")";
  return out.str();
}

namespace {

std::size_t checked_element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e < 1) throw DimError("tensor extent must be >= 1, got shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_element_count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_element_count(shape_) != data_.size()) {
    throw DimError("tensor data length " + std::to_string(data_.size()) +
                   " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::vector(std::vector<double> data) {
  std::vector<std::size_t> shape{data.size()};
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
  if (checked_element_count(new_shape) != data_.size()) {
    throw DimError("cannot reshape " + shape_str(shape_) + " to " +
                   shape_str(new_shape));
  }
  return Tensor(std::move(new_shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : idx) {
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw DimError("matmul shapes disagree: " + shape_str(a.shape()) + " x " +
                   shape_str(b.shape()));
  }
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = pb + p * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor ew(EwOp op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimError("elementwise op shapes disagree: " + shape_str(a.shape()) +
                   " vs " + shape_str(b.shape()));
  }
  Tensor c(a.shape());
  const std::size_t n = a.size();
  switch (op) {
    case EwOp::add:
      for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
      break;
    case EwOp::sub:
      for (std::size_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
      break;
    case EwOp::mul:
      for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
      break;
  }
  return c;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double elu(double x) {
  return x > 0.0 ? x : kEluAlpha * std::expm1(x);
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::tanh:
      return std::tanh(x);
    case Activation::elu:
      return elu(x);
  }
  return 0.0;
}

double activate_grad(Activation kind, double x) {
  switch (kind) {
    case Activation::sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::elu:
      return x > 0.0 ? 1.0 : kEluAlpha * std::exp(x);
  }
  return 0.0;
}

Tensor activate(Activation kind, const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate(kind, x[i]);
  return y;
}

Tensor activate_grad(Activation kind, const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate_grad(kind, x[i]);
  return y;
}

}  // namespace seiznet
