#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "vqa/matrix.hpp"

namespace vqa {

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, so walking the tape backwards is a valid topological order for
// gradient accumulation. A tape is single-use: build the graph, call
// backward() once, read grads.
template <typename T>
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  Var leaf(Matrix<T> value, bool needs_grad = false) {
    return push(std::move(value), needs_grad, nullptr);
  }

  const Matrix<T>& value(Var v) const { return nodes_[v.id].value; }
  const Matrix<T>& grad(Var v) const { return nodes_[v.id].grad; }
  size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b) {
    Matrix<T> out = vqa::matmul(value(a), value(b));
    return push(std::move(out), ng(a) || ng(b), [a, b](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      if (t.ng(a)) accumulate(t.nodes_[a.id].grad, matmul_nt(g, t.value(b)));
      if (t.ng(b)) accumulate(t.nodes_[b.id].grad, matmul_tn(t.value(a), g));
    });
  }

  Var add(Var a, Var b) {
    const Matrix<T>&va = value(a), &vb = value(b);
    if (!va.same_shape(vb)) throw numeric_error("add: shape mismatch");
    Matrix<T> out = va;
    accumulate(out, vb);
    return push(std::move(out), ng(a) || ng(b), [a, b](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      if (t.ng(a)) accumulate(t.nodes_[a.id].grad, g);
      if (t.ng(b)) accumulate(t.nodes_[b.id].grad, g);
    });
  }

  Var sub(Var a, Var b) {
    const Matrix<T>&va = value(a), &vb = value(b);
    if (!va.same_shape(vb)) throw numeric_error("sub: shape mismatch");
    Matrix<T> out = va;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] -= vb.data()[i];
    return push(std::move(out), ng(a) || ng(b), [a, b](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      if (t.ng(a)) accumulate(t.nodes_[a.id].grad, g);
      if (t.ng(b)) {
        Matrix<T>& gb = t.nodes_[b.id].grad;
        for (size_t i = 0; i < gb.size(); ++i) gb.data()[i] -= g.data()[i];
      }
    });
  }

  // N×C plus a 1×C row vector broadcast over the N rows.
  Var add_rowvec(Var a, Var r) {
    const Matrix<T>&va = value(a), &vr = value(r);
    if (vr.rows() != 1 || vr.cols() != va.cols())
      throw numeric_error("add_rowvec: row vector shape mismatch");
    Matrix<T> out = va;
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j) out(i, j) += vr(0, j);
    return push(std::move(out), ng(a) || ng(r), [a, r](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      if (t.ng(a)) accumulate(t.nodes_[a.id].grad, g);
      if (t.ng(r)) {
        Matrix<T>& gr = t.nodes_[r.id].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      }
    });
  }

  Var tanh(Var a) {
    Matrix<T> out = value(a);
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
    return push(std::move(out), ng(a), [a](Tape& t, int id) {
      if (!t.ng(a)) return;
      const Matrix<T>& g = t.nodes_[id].grad;
      const Matrix<T>& y = t.nodes_[id].value;
      Matrix<T>& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < g.size(); ++i)
        ga.data()[i] += g.data()[i] * (T(1) - y.data()[i] * y.data()[i]);
    });
  }

  Var sigmoid(Var a) {
    Matrix<T> out = value(a);
    for (size_t i = 0; i < out.size(); ++i)
      out.data()[i] = T(1) / (T(1) + std::exp(-out.data()[i]));
    return push(std::move(out), ng(a), [a](Tape& t, int id) {
      if (!t.ng(a)) return;
      const Matrix<T>& g = t.nodes_[id].grad;
      const Matrix<T>& y = t.nodes_[id].value;
      Matrix<T>& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < g.size(); ++i)
        ga.data()[i] += g.data()[i] * y.data()[i] * (T(1) - y.data()[i]);
    });
  }

  // Subgradient 0 at the kink.
  Var relu(Var a) {
    Matrix<T> out = value(a);
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(T(0), out.data()[i]);
    return push(std::move(out), ng(a), [a](Tape& t, int id) {
      if (!t.ng(a)) return;
      const Matrix<T>& g = t.nodes_[id].grad;
      const Matrix<T>& x = t.nodes_[a.id].value;
      Matrix<T>& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < g.size(); ++i)
        if (x.data()[i] > T(0)) ga.data()[i] += g.data()[i];
    });
  }

  Var hadamard(Var a, Var b) {
    const Matrix<T>&va = value(a), &vb = value(b);
    if (!va.same_shape(vb)) throw numeric_error("hadamard: shape mismatch");
    Matrix<T> out = va;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= vb.data()[i];
    return push(std::move(out), ng(a) || ng(b), [a, b](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      if (t.ng(a)) {
        const Matrix<T>& vb2 = t.value(b);
        Matrix<T>& ga = t.nodes_[a.id].grad;
        for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * vb2.data()[i];
      }
      if (t.ng(b)) {
        const Matrix<T>& va2 = t.value(a);
        Matrix<T>& gb = t.nodes_[b.id].grad;
        for (size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * va2.data()[i];
      }
    });
  }

  // N×C scaled row-wise by an N×1 column vector.
  Var mul_colvec(Var a, Var col) {
    const Matrix<T>&va = value(a), &vc = value(col);
    if (vc.cols() != 1 || vc.rows() != va.rows())
      throw numeric_error("mul_colvec: column vector shape mismatch");
    Matrix<T> out = va;
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j) out(i, j) *= vc(i, 0);
    return push(std::move(out), ng(a) || ng(col), [a, col](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      if (t.ng(a)) {
        const Matrix<T>& vc2 = t.value(col);
        Matrix<T>& ga = t.nodes_[a.id].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * vc2(i, 0);
      }
      if (t.ng(col)) {
        const Matrix<T>& va2 = t.value(a);
        Matrix<T>& gc = t.nodes_[col.id].grad;
        for (int i = 0; i < g.rows(); ++i) {
          T s = T(0);
          for (int j = 0; j < g.cols(); ++j) s += g(i, j) * va2(i, j);
          gc(i, 0) += s;
        }
      }
    });
  }

  // Softmax over the entries of an N×1 column vector (max-shifted).
  Var softmax_col(Var a) {
    const Matrix<T>& x = value(a);
    if (x.cols() != 1 || x.rows() < 1) throw numeric_error("softmax_col: expected N×1, N ≥ 1");
    Matrix<T> out(x.rows(), 1);
    T mx = x(0, 0);
    for (int i = 1; i < x.rows(); ++i) mx = std::max(mx, x(i, 0));
    T z = T(0);
    for (int i = 0; i < x.rows(); ++i) {
      out(i, 0) = std::exp(x(i, 0) - mx);
      z += out(i, 0);
    }
    for (int i = 0; i < x.rows(); ++i) out(i, 0) /= z;
    return push(std::move(out), ng(a), [a](Tape& t, int id) {
      if (!t.ng(a)) return;
      const Matrix<T>& g = t.nodes_[id].grad;
      const Matrix<T>& y = t.nodes_[id].value;
      Matrix<T>& ga = t.nodes_[a.id].grad;
      T dot = T(0);
      for (int i = 0; i < g.rows(); ++i) dot += g(i, 0) * y(i, 0);
      for (int i = 0; i < g.rows(); ++i) ga(i, 0) += y(i, 0) * (g(i, 0) - dot);
    });
  }

  // Column-wise sum: N×C -> 1×C (the ones-row product).
  Var col_sum(Var a) {
    const Matrix<T>& x = value(a);
    Matrix<T> out(1, x.cols());
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
    return push(std::move(out), ng(a), [a](Tape& t, int id) {
      if (!t.ng(a)) return;
      const Matrix<T>& g = t.nodes_[id].grad;
      Matrix<T>& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < ga.rows(); ++i)
        for (int j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j);
    });
  }

  Var concat_cols(Var a, Var b) {
    const Matrix<T>&va = value(a), &vb = value(b);
    if (va.rows() != vb.rows()) throw numeric_error("concat_cols: row counts differ");
    Matrix<T> out(va.rows(), va.cols() + vb.cols());
    for (int i = 0; i < va.rows(); ++i) {
      for (int j = 0; j < va.cols(); ++j) out(i, j) = va(i, j);
      for (int j = 0; j < vb.cols(); ++j) out(i, va.cols() + j) = vb(i, j);
    }
    const int ac = va.cols();
    return push(std::move(out), ng(a) || ng(b), [a, b, ac](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      if (t.ng(a)) {
        Matrix<T>& ga = t.nodes_[a.id].grad;
        for (int i = 0; i < ga.rows(); ++i)
          for (int j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, j);
      }
      if (t.ng(b)) {
        Matrix<T>& gb = t.nodes_[b.id].grad;
        for (int i = 0; i < gb.rows(); ++i)
          for (int j = 0; j < gb.cols(); ++j) gb(i, j) += g(i, ac + j);
      }
    });
  }

  // Stack k row vectors (1×C each) into a k×C matrix.
  Var stack_rows(std::span<const Var> rows) {
    if (rows.empty()) throw numeric_error("stack_rows: empty input");
    const int c = value(rows[0]).cols();
    Matrix<T> out(int(rows.size()), c);
    bool needs = false;
    for (size_t i = 0; i < rows.size(); ++i) {
      const Matrix<T>& r = value(rows[i]);
      if (r.rows() != 1 || r.cols() != c) throw numeric_error("stack_rows: shape mismatch");
      for (int j = 0; j < c; ++j) out(int(i), j) = r(0, j);
      needs = needs || ng(rows[i]);
    }
    std::vector<Var> rv(rows.begin(), rows.end());
    return push(std::move(out), needs, [rv = std::move(rv)](Tape& t, int id) {
      const Matrix<T>& g = t.nodes_[id].grad;
      for (size_t i = 0; i < rv.size(); ++i) {
        if (!t.ng(rv[i])) continue;
        Matrix<T>& gr = t.nodes_[rv[i].id].grad;
        for (int j = 0; j < g.cols(); ++j) gr(0, j) += g(int(i), j);
      }
    });
  }

  Var slice_cols(Var a, int from, int width) {
    const Matrix<T>& x = value(a);
    if (from < 0 || width < 1 || from + width > x.cols())
      throw numeric_error("slice_cols: range out of bounds");
    Matrix<T> out(x.rows(), width);
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < width; ++j) out(i, j) = x(i, from + j);
    return push(std::move(out), ng(a), [a, from](Tape& t, int id) {
      if (!t.ng(a)) return;
      const Matrix<T>& g = t.nodes_[id].grad;
      Matrix<T>& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) ga(i, from + j) += g(i, j);
    });
  }

  Var add_const(Var a, T c) {
    Matrix<T> out = value(a);
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] += c;
    return push(std::move(out), ng(a), [a](Tape& t, int id) {
      if (t.ng(a)) accumulate(t.nodes_[a.id].grad, t.nodes_[id].grad);
    });
  }

  Var scale(Var a, T c) {
    Matrix<T> out = value(a);
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= c;
    return push(std::move(out), ng(a), [a, c](Tape& t, int id) {
      if (!t.ng(a)) return;
      const Matrix<T>& g = t.nodes_[id].grad;
      Matrix<T>& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += c * g.data()[i];
    });
  }

  void backward(Var root) {
    Node& rn = nodes_[root.id];
    if (rn.value.rows() != 1 || rn.value.cols() != 1)
      throw numeric_error("backward: root must be a 1×1 scalar");
    if (ran_backward_) throw numeric_error("backward: tape already consumed");
    ran_backward_ = true;
    rn.grad(0, 0) = T(1);
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.needs_grad && n.backprop) n.backprop(*this, i);
    }
  }

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool needs_grad = false;
    std::function<void(Tape&, int)> backprop;
  };

  bool ng(Var v) const { return nodes_[v.id].needs_grad; }

  Var push(Matrix<T> value, bool needs_grad, std::function<void(Tape&, int)> backprop) {
    Node n;
    n.grad = Matrix<T>::zeros(value.rows(), value.cols());
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace vqa
