#include <functional>

#include "doctest.h"
#include "vqa/autodiff.hpp"
#include "vqa/rng.hpp"

using vqa::Matrix;
using vqa::Rng;
using Tape = vqa::Tape<double>;
using Var = Tape::Var;

namespace {

Matrix<double> random_matrix(int r, int c, Rng& rng) {
  Matrix<double> m(r, c);
  for (size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.5, 1.5);
  return m;
}

// Central finite differences of a scalar-valued function of several input
// matrices, compared against the tape gradients of the same graph.
void check_gradients(const std::vector<Matrix<double>>& inputs,
                     const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                     double tol = 1e-7) {
  auto eval = [&](const std::vector<Matrix<double>>& xs) {
    Tape t;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(t.leaf(x, false));
    return t.value(build(t, vars))(0, 0);
  };

  Tape t;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(t.leaf(x, true));
  Var root = build(t, vars);
  t.backward(root);

  const double h = 1e-6;
  for (size_t vi = 0; vi < inputs.size(); ++vi) {
    const Matrix<double>& g = t.grad(vars[vi]);
    for (size_t i = 0; i < inputs[vi].size(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[vi].data()[i] += h;
      minus[vi].data()[i] -= h;
      const double fd = (eval(plus) - eval(minus)) / (2 * h);
      CAPTURE(vi);
      CAPTURE(i);
      CHECK(g.data()[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
  }
}

// Reduce an arbitrary matrix to a scalar with fixed weights so every entry
// contributes to the loss. The weights depend only on the seed, so repeated
// evaluations of the same graph (for finite differences) stay identical.
Var reduce(Tape& t, Var v, uint64_t seed) {
  const auto& val = t.value(v);
  Rng rng(seed);
  Var w = t.leaf(random_matrix(val.cols(), 1, rng), false);
  Var col = t.matmul(v, w);  // R×1
  Var ones = t.leaf(Matrix<double>::full(1, val.rows(), 1.0), false);
  return t.matmul(ones, col);  // 1×1
}

}  // namespace

TEST_CASE("matmul forward matches hand computation") {
  Matrix<double> a(2, 3), b(3, 2);
  double av[] = {1, 2, 3, 4, 5, 6};
  double bv[] = {7, 8, 9, 10, 11, 12};
  for (size_t i = 0; i < 6; ++i) a.data()[i] = av[i];
  for (size_t i = 0; i < 6; ++i) b.data()[i] = bv[i];
  auto c = vqa::matmul(a, b);
  CHECK(c(0, 0) == doctest::Approx(58));
  CHECK(c(0, 1) == doctest::Approx(64));
  CHECK(c(1, 0) == doctest::Approx(139));
  CHECK(c(1, 1) == doctest::Approx(154));
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
  Rng rng(11);
  auto a = random_matrix(3, 4, rng);
  auto b = random_matrix(2, 4, rng);
  auto nt = vqa::matmul_nt(a, b);  // 3×2
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += a(i, k) * b(j, k);
      CHECK(nt(i, j) == doctest::Approx(s));
    }
  auto c = random_matrix(4, 3, rng);
  auto d = random_matrix(4, 2, rng);
  auto tn = vqa::matmul_tn(c, d);  // 3×2
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += c(k, i) * d(k, j);
      CHECK(tn(i, j) == doctest::Approx(s));
    }
}

TEST_CASE("gradients: matmul") {
  Rng rng(1);
  check_gradients({random_matrix(2, 3, rng), random_matrix(3, 4, rng)},
                  [&](Tape& t, const std::vector<Var>& v) {
                    return reduce(t, t.matmul(v[0], v[1]), 999);
                  });
}

TEST_CASE("gradients: add, sub, add_rowvec, add_const, scale") {
  Rng rng(2);
  check_gradients({random_matrix(3, 2, rng), random_matrix(3, 2, rng), random_matrix(1, 2, rng)},
                  [&](Tape& t, const std::vector<Var>& v) {
                    Var x = t.add(v[0], v[1]);
                    x = t.sub(x, v[1]);
                    x = t.add_rowvec(x, v[2]);
                    x = t.add_const(x, 0.3);
                    x = t.scale(x, -1.7);
                    return reduce(t, x, 999);
                  });
}

TEST_CASE("gradients: tanh, sigmoid, hadamard") {
  Rng rng(3);
  check_gradients({random_matrix(2, 3, rng), random_matrix(2, 3, rng)},
                  [&](Tape& t, const std::vector<Var>& v) {
                    Var x = t.hadamard(t.tanh(v[0]), t.sigmoid(v[1]));
                    return reduce(t, x, 999);
                  });
}

TEST_CASE("gradients: relu away from the kink") {
  Rng rng(4);
  Matrix<double> x = random_matrix(3, 3, rng);
  for (size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x.data()[i]) < 0.05) x.data()[i] = 0.2;  // keep FD away from the kink
  }
  check_gradients({x}, [&](Tape& t, const std::vector<Var>& v) {
    return reduce(t, t.relu(v[0]), 999);
  });
}

TEST_CASE("gradients: mul_colvec, softmax_col, col_sum") {
  Rng rng(5);
  check_gradients({random_matrix(4, 3, rng), random_matrix(4, 1, rng)},
                  [&](Tape& t, const std::vector<Var>& v) {
                    Var alpha = t.softmax_col(v[1]);
                    Var weighted = t.mul_colvec(v[0], alpha);
                    return reduce(t, t.col_sum(weighted), 999);
                  });
}

TEST_CASE("gradients: concat_cols, stack_rows, slice_cols") {
  Rng rng(6);
  check_gradients(
      {random_matrix(1, 3, rng), random_matrix(1, 2, rng), random_matrix(1, 5, rng)},
      [&](Tape& t, const std::vector<Var>& v) {
        Var cat = t.concat_cols(v[0], v[1]);  // 1×5
        std::vector<Var> rows = {cat, v[2]};
        Var stacked = t.stack_rows(std::span<const Var>(rows));  // 2×5
        Var sl = t.slice_cols(stacked, 1, 3);
        return reduce(t, sl, 999);
      });
}

TEST_CASE("softmax_col output is a probability vector") {
  Rng rng(7);
  for (int n : {1, 2, 5, 17}) {
    Tape t;
    Var x = t.leaf(random_matrix(n, 1, rng), false);
    const auto& y = t.value(t.softmax_col(x));
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      CHECK(y(i, 0) >= 0.0);
      CHECK(y(i, 0) <= 1.0);
      sum += y(i, 0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("grad flows through shared subexpressions") {
  // f(x) = x*x with x reused: df/dx = 2x
  Tape t;
  Var x = t.leaf(Matrix<double>::full(1, 1, 3.0), true);
  Var y = t.hadamard(x, x);
  t.backward(y);
  CHECK(t.grad(x)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar roots and double use") {
  Tape t;
  Var x = t.leaf(Matrix<double>::full(2, 1, 1.0), true);
  CHECK_THROWS_AS(t.backward(x), vqa::numeric_error);
  Var y = t.leaf(Matrix<double>::full(1, 1, 1.0), true);
  t.backward(y);
  CHECK_THROWS_AS(t.backward(y), vqa::numeric_error);
}
