//===- autodiff.h - Dense tensors and a reverse-mode tape ------*- C++ -*-===//
//
// Tensors are 2-D row-major arrays of doubles (vectors are N x 1). A Tape
// records every primitive applied to its Vars together with a pullback; a
// single backward() call then accumulates d(loss)/d(node) into every node
// that depends on a leaf created with requiresGrad.
//
// Sparse operands of spmm are constants held by reference: they must
// outlive the tape.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_AUTODIFF_H
#define POLARCORE_AUTODIFF_H

#include "polarcore/hypergraph.h"

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polarcore {

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Tensor {
public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor(rows, cols, 0.0);
  }
  static Tensor ones(std::size_t rows, std::size_t cols) {
    return Tensor(rows, cols, 1.0);
  }
  static Tensor identity(std::size_t n);
  static Tensor column(std::vector<double> values);
  static Tensor scalar(double value) { return Tensor(1, 1, value); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool sameShape(const Tensor &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double> &storage() { return data_; }
  const double *rowPtr(std::size_t r) const { return data_.data() + r * cols_; }
  double *rowPtr(std::size_t r) { return data_.data() + r * cols_; }

  bool allFinite() const;
  std::string shapeString() const;

  friend bool operator==(const Tensor &, const Tensor &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid with its tape.
class Var {
public:
  Var() = default;

  const Tensor &value() const;
  const Tensor &grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape *tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

private:
  friend class Tape;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
public:
  using Pullback = std::function<void(Tape &, std::size_t self)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var leaf(Tensor value, bool requiresGrad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an op output. `inputs` decide whether the node needs a grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, Pullback pullback);
  Var record(Tensor value, std::span<const Var> inputs, Pullback pullback);

  const Tensor &value(std::size_t id) const { return nodes_[id].value; }
  const Tensor &grad(std::size_t id) const;
  bool requiresGrad(std::size_t id) const { return nodes_[id].requiresGrad; }
  /// Adds `delta` into the grad of `id` if that node tracks gradients.
  void accumulate(std::size_t id, const Tensor &delta);
  Tensor &gradRef(std::size_t id);

  /// Throws ShapeError if loss is not 1x1, std::logic_error if the tape was
  /// already consumed by an earlier backward().
  void backward(Var loss);

  /// When enabled (default), an op producing NaN/Inf throws NumericError.
  void setTrapNonFinite(bool enabled) { trapNonFinite_ = enabled; }
  bool trapNonFinite() const { return trapNonFinite_; }

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requiresGrad = false;
    Pullback pullback;
  };
  std::deque<Node> nodes_;
  bool consumed_ = false;
  bool trapNonFinite_ = true;
};

enum class Activation { Relu, Tanh };

Activation parseActivation(const std::string &name);
const char *toString(Activation activation);

namespace ad {

Var matmul(Var a, Var b);
/// Sparse constant times dense: (S.rows x S.cols) * (S.cols x k).
Var spmm(const SparseMatrix &s, Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Adds a 1 x cols row vector to every row.
Var addRowVector(Var a, Var row);
Var scale(Var a, double factor);
/// Scalar (1x1) Var times tensor.
Var scaleBy(Var scalar, Var a);
Var relu(Var a);
Var tanh(Var a);
Var activate(Var a, Activation activation);
Var softmaxRows(Var a);
/// Shifted (max-subtracted) log-softmax along each row.
Var logSoftmaxRows(Var a);
Var log(Var a);
/// Elementwise max(a, floor); gradient routes only where a > floor.
Var clampMin(Var a, double floor);
Var concatCols(std::span<const Var> parts);
Var concatCols(std::initializer_list<Var> parts);
Var concatRows(std::span<const Var> parts);
Var concatRows(std::initializer_list<Var> parts);
/// out[i] = a[index[i]].
Var rowPermute(Var a, std::vector<std::size_t> index);
/// Rows start, start + stride, ... (count of them).
Var rowSlice(Var a, std::size_t start, std::size_t count,
             std::size_t stride = 1);
Var transpose(Var a);
Var sum(Var a);
Var mean(Var a);
/// Sum of squared entries (1x1).
Var squaredL2(Var a);

} // namespace ad

//===----------------------------------------------------------------------===//
// Finite-difference checking
//===----------------------------------------------------------------------===//

struct GradCheckReport {
  bool passed = true;
  double maxRelError = 0.0;
  std::size_t worstInput = 0;
  std::size_t worstIndex = 0;
  double worstAnalytic = 0.0;
  double worstNumeric = 0.0;
  std::size_t coordinates = 0;
};

using ScalarFn = std::function<Var(Tape &, std::span<const Var>)>;

/// Compares tape gradients of fn at `inputs` with central differences
/// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. The per-coordinate
/// error is |a - n| / max(|a|, |n|, scaleFloor).
GradCheckReport gradCheck(const ScalarFn &fn, const std::vector<Tensor> &inputs,
                          double h = 1e-5, double tol = 1e-4,
                          double scaleFloor = 1e-3);

} // namespace polarcore

#endif // POLARCORE_AUTODIFF_H
