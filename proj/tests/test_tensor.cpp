#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "seiznet/rng.hpp"
#include "seiznet/tensor.hpp"

using namespace seiznet;

namespace {

// Independent triple-loop reference for matmul.
Tensor matmul_reference(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += a.at({i, p}) * b.at({p, j});
      }
      c.at({i, j}) = acc;
    }
  }
  return c;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2.0, 2.0);
  return t;
}

}  // namespace

TEST_CASE("tensor invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.shape() == std::vector<std::size_t>{2, 3});
  CHECK_THROWS_AS(Tensor({0, 3}), DimError);
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimError);
  CHECK_THROWS_AS(t.reshaped({4, 2}), DimError);
  Tensor r = t.reshaped({3, 2});
  CHECK(r.shape() == std::vector<std::size_t>{3, 2});
}

TEST_CASE("matmul identity and hand arithmetic") {
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor prod = matmul(eye, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(prod[i] == a[i]);

  Tensor row = Tensor::matrix(1, 2, {1, 2});
  Tensor col = Tensor::matrix(2, 1, {3, 4});
  CHECK(matmul(row, col)[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul against triple-loop oracle") {
  Rng rng(11);
  Tensor a = random_tensor({5, 7}, rng);
  Tensor b = random_tensor({7, 3}, rng);
  Tensor fast = matmul(a, b);
  Tensor slow = matmul_reference(a, b);
  for (std::size_t i = 0; i < fast.size(); ++i) {
    CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul shape errors name both shapes") {
  Tensor a({2, 3});
  Tensor b({4, 2});
  try {
    matmul(a, b);
    FAIL("expected DimError");
  } catch (const DimError& err) {
    const std::string what = err.what();
    CHECK(what.find("(2,3)") != std::string::npos);
    CHECK(what.find("(4,2)") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random tensors") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    Tensor c = random_tensor({5, 2}, rng);
    Tensor left = matmul(matmul(a, b), c);
    Tensor right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      CHECK(left[i] == doctest::Approx(right[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("elementwise ops") {
  Tensor a = Tensor::vector({1, 2, 3});
  Tensor zero = Tensor::vector({0, 0, 0});
  Tensor mul = ew(EwOp::mul, a, zero);
  for (std::size_t i = 0; i < 3; ++i) CHECK(mul[i] == 0.0);

  Tensor add = ew(EwOp::add, a, zero);
  for (std::size_t i = 0; i < 3; ++i) CHECK(add[i] == a[i]);

  Tensor x = Tensor::vector({2, 3});
  Tensor y = Tensor::vector({4, 5});
  Tensor prod = ew(EwOp::mul, x, y);
  CHECK(prod[0] == 8.0);
  CHECK(prod[1] == 15.0);

  CHECK_THROWS_AS(ew(EwOp::add, a, x), DimError);
}

TEST_CASE("activation values at zero") {
  CHECK(activate(Activation::sigmoid, 0.0) == doctest::Approx(0.5));
  CHECK(activate(Activation::tanh, 0.0) == doctest::Approx(0.0));
  CHECK(activate(Activation::elu, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("activation derivatives match central differences") {
  const double h = 1e-6;
  for (Activation kind :
       {Activation::sigmoid, Activation::tanh, Activation::elu}) {
    for (double x : {0.37, -0.8, 1.9, -2.4}) {
      const double numeric =
          (activate(kind, x + h) - activate(kind, x - h)) / (2.0 * h);
      CHECK(activate_grad(kind, x) == doctest::Approx(numeric).epsilon(1e-7));
    }
  }
}

TEST_CASE("sigmoid and tanh stay strictly bounded") {
  // Strict bounds hold for every double up to the point where the result
  // itself is no longer representable below 1 (|x| ~ 19 for tanh).
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-18.0, 18.0);
    const double s = sigmoid(x);
    const double t = std::tanh(x);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(t > -1.0);
    CHECK(t < 1.0);
  }
}

TEST_CASE("elu is C1 at zero with alpha one") {
  const double h = 1e-9;
  const double right = (elu(h) - elu(0.0)) / h;
  const double left = (elu(0.0) - elu(-h)) / h;
  CHECK(std::fabs(right - 1.0) < 1e-9);
  CHECK(std::fabs(left - 1.0) < 1e-9);
  CHECK(activate_grad(Activation::elu, 0.0) == doctest::Approx(1.0));
}
