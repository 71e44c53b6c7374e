#include "polarcore/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace polarcore {

//===----------------------------------------------------------------------===//
// Tensor
//===----------------------------------------------------------------------===//

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    throw ShapeError("tensor data has " + std::to_string(data_.size()) +
                     " values for shape " + shapeString());
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i)
    t(i, i) = 1.0;
  return t;
}

Tensor Tensor::column(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

bool Tensor::allFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

std::string Tensor::shapeString() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Activation parseActivation(const std::string &name) {
  if (name == "relu")
    return Activation::Relu;
  if (name == "tanh")
    return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

const char *toString(Activation activation) {
  return activation == Activation::Relu ? "relu" : "tanh";
}

//===----------------------------------------------------------------------===//
// Tape
//===----------------------------------------------------------------------===//

const Tensor &Var::value() const { return tape_->value(id_); }
const Tensor &Var::grad() const { return tape_->grad(id_); }

Var Tape::leaf(Tensor value, bool requiresGrad) {
  if (trapNonFinite_ && !value.allFinite())
    throw NumericError("non-finite leaf value");
  nodes_.push_back(Node{std::move(value), Tensor(), requiresGrad, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs,
                 Pullback pullback) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(pullback));
}

Var Tape::record(Tensor value, std::span<const Var> inputs,
                 Pullback pullback) {
  if (consumed_)
    throw std::logic_error("tape already consumed by backward()");
  if (trapNonFinite_ && !value.allFinite())
    throw NumericError("non-finite value produced by a tape op " +
                       value.shapeString());
  bool needs = false;
  for (const Var &in : inputs) {
    if (in.tape() != this)
      throw std::logic_error("op mixes Vars from different tapes");
    needs = needs || nodes_[in.id()].requiresGrad;
  }
  nodes_.push_back(
      Node{std::move(value), Tensor(), needs, needs ? std::move(pullback) : nullptr});
  return Var(this, nodes_.size() - 1);
}

const Tensor &Tape::grad(std::size_t id) const {
  const Node &n = nodes_[id];
  if (!n.requiresGrad)
    throw std::logic_error("node does not track gradients");
  if (n.grad.size() != n.value.size())
    throw std::logic_error("gradient not computed; call backward() first");
  return n.grad;
}

Tensor &Tape::gradRef(std::size_t id) {
  Node &n = nodes_[id];
  if (n.grad.size() != n.value.size() || !n.grad.sameShape(n.value))
    n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor &delta) {
  if (!nodes_[id].requiresGrad)
    return;
  Tensor &g = gradRef(id);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] += delta[i];
}

void Tape::backward(Var loss) {
  if (consumed_)
    throw std::logic_error("tape already consumed by backward()");
  if (loss.tape() != this)
    throw std::logic_error("loss belongs to a different tape");
  const Tensor &lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ShapeError("backward() needs a scalar loss, got " + lv.shapeString());
  consumed_ = true;
  if (nodes_[loss.id()].requiresGrad) {
    gradRef(loss.id())[0] = 1.0;
    for (std::size_t k = loss.id() + 1; k-- > 0;) {
      Node &n = nodes_[k];
      if (!n.requiresGrad || !n.pullback || n.grad.size() != n.value.size())
        continue;
      n.pullback(*this, k);
    }
  }
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    if (nodes_[k].requiresGrad)
      gradRef(k);
}

namespace ad {

namespace {

void requireSameShape(const Tensor &a, const Tensor &b, const char *op) {
  if (!a.sameShape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shapeString() +
                     " vs " + b.shapeString());
}

// out(m x n) += a(m x k) * b(k x n), optionally with either operand
// transposed in storage.
void gemmAccumulate(const Tensor &a, bool transA, const Tensor &b, bool transB,
                    Tensor &out) {
  std::size_t m = out.rows(), n = out.cols();
  std::size_t k = transA ? a.rows() : a.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double *o = out.rowPtr(i);
    for (std::size_t p = 0; p < k; ++p) {
      double av = transA ? a(p, i) : a(i, p);
      if (av == 0.0)
        continue;
      if (!transB) {
        const double *br = b.rowPtr(p);
        for (std::size_t j = 0; j < n; ++j)
          o[j] += av * br[j];
      } else {
        for (std::size_t j = 0; j < n; ++j)
          o[j] += av * b(j, p);
      }
    }
  }
}

template <typename Fn> Tensor mapValues(const Tensor &a, Fn fn) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = fn(a[i]);
  return out;
}

} // namespace

Var matmul(Var a, Var b) {
  const Tensor &av = a.value(), &bv = b.value();
  if (av.cols() != bv.rows())
    throw ShapeError("matmul: inner dimensions differ " + av.shapeString() +
                     " * " + bv.shapeString());
  Tensor out(av.rows(), bv.cols());
  gemmAccumulate(av, false, bv, false, out);
  std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    if (t.requiresGrad(ia))
      gemmAccumulate(g, false, t.value(ib), true, t.gradRef(ia));
    if (t.requiresGrad(ib))
      gemmAccumulate(t.value(ia), true, g, false, t.gradRef(ib));
  });
}

Var spmm(const SparseMatrix &s, Var x) {
  const Tensor &xv = x.value();
  if (s.cols() != xv.rows())
    throw ShapeError("spmm: sparse operand has " + std::to_string(s.cols()) +
                     " columns, dense operand " + xv.shapeString());
  std::size_t k = xv.cols();
  Tensor out(s.rows(), k);
  auto rowPtr = s.rowPtr();
  auto colIdx = s.colIdx();
  auto vals = s.values();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double *o = out.rowPtr(r);
    for (std::size_t e = rowPtr[r]; e < rowPtr[r + 1]; ++e) {
      const double *xr = xv.rowPtr(colIdx[e]);
      double v = vals[e];
      for (std::size_t j = 0; j < k; ++j)
        o[j] += v * xr[j];
    }
  }
  std::size_t ix = x.id();
  const SparseMatrix *sp = &s;
  return x.tape()->record(std::move(out), {x}, [sp, ix](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    Tensor &gx = t.gradRef(ix);
    auto rowPtr = sp->rowPtr();
    auto colIdx = sp->colIdx();
    auto vals = sp->values();
    std::size_t k = g.cols();
    for (std::size_t r = 0; r < sp->rows(); ++r) {
      const double *gr = g.rowPtr(r);
      for (std::size_t e = rowPtr[r]; e < rowPtr[r + 1]; ++e) {
        double *dst = gx.rowPtr(colIdx[e]);
        double v = vals[e];
        for (std::size_t j = 0; j < k; ++j)
          dst[j] += v * gr[j];
      }
    }
  });
}

Var add(Var a, Var b) {
  requireSameShape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor &bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  requireSameShape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor &bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] -= bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    t.accumulate(ia, g);
    if (t.requiresGrad(ib)) {
      Tensor &gb = t.gradRef(ib);
      for (std::size_t i = 0; i < g.size(); ++i)
        gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  requireSameShape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor &bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    if (t.requiresGrad(ia)) {
      Tensor &ga = t.gradRef(ia);
      const Tensor &bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * bv[i];
    }
    if (t.requiresGrad(ib)) {
      Tensor &gb = t.gradRef(ib);
      const Tensor &av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        gb[i] += g[i] * av[i];
    }
  });
}

Var addRowVector(Var a, Var row) {
  const Tensor &av = a.value(), &rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols())
    throw ShapeError("addRowVector: " + rv.shapeString() +
                     " does not broadcast over " + av.shapeString());
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double *o = out.rowPtr(r);
    for (std::size_t c = 0; c < out.cols(); ++c)
      o[c] += rv[c];
  }
  std::size_t ia = a.id(), ir = row.id();
  return a.tape()->record(std::move(out), {a, row}, [ia, ir](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    t.accumulate(ia, g);
    if (t.requiresGrad(ir)) {
      Tensor &gr = t.gradRef(ir);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c)
          gr[c] += g(r, c);
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = mapValues(a.value(), [factor](double x) { return factor * x; });
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, factor](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += factor * g[i];
  });
}

Var scaleBy(Var scalar, Var a) {
  const Tensor &sv = scalar.value();
  if (sv.rows() != 1 || sv.cols() != 1)
    throw ShapeError("scaleBy: scalar operand has shape " + sv.shapeString());
  double f = sv[0];
  Tensor out = mapValues(a.value(), [f](double x) { return f * x; });
  std::size_t is = scalar.id(), ia = a.id();
  return a.tape()->record(std::move(out), {scalar, a}, [is, ia](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    const Tensor &av = t.value(ia);
    if (t.requiresGrad(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i)
        acc += g[i] * av[i];
      t.gradRef(is)[0] += acc;
    }
    if (t.requiresGrad(ia)) {
      double f = t.value(is)[0];
      Tensor &ga = t.gradRef(ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += f * g[i];
    }
  });
}

Var relu(Var a) {
  Tensor out = mapValues(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    const Tensor &av = t.value(ia);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0)
        ga[i] += g[i];
  });
}

Var tanh(Var a) {
  Tensor out = mapValues(a.value(), [](double x) { return std::tanh(x); });
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    const Tensor &y = t.value(self);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var activate(Var a, Activation activation) {
  return activation == Activation::Relu ? relu(a) : tanh(a);
}

Var softmaxRows(Var a) {
  const Tensor &av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const double *x = av.rowPtr(r);
    double *y = out.rowPtr(r);
    double mx = *std::max_element(x, x + av.cols());
    double total = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c)
      total += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < av.cols(); ++c)
      y[c] /= total;
  }
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    const Tensor &y = t.value(self);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c)
        dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c)
        ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var logSoftmaxRows(Var a) {
  const Tensor &av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const double *x = av.rowPtr(r);
    double *y = out.rowPtr(r);
    double mx = *std::max_element(x, x + av.cols());
    double total = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c)
      total += std::exp(x[c] - mx);
    double lse = mx + std::log(total);
    for (std::size_t c = 0; c < av.cols(); ++c)
      y[c] = x[c] - lse;
  }
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    const Tensor &y = t.value(self);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c)
        total += g(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c)
        ga(r, c) += g(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var log(Var a) {
  Tensor out = mapValues(a.value(), [](double x) { return std::log(x); });
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    const Tensor &av = t.value(ia);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] / av[i];
  });
}

Var clampMin(Var a, double floor) {
  Tensor out = mapValues(a.value(), [floor](double x) { return std::max(x, floor); });
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, floor](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    const Tensor &av = t.value(ia);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > floor)
        ga[i] += g[i];
  });
}

Var concatCols(std::span<const Var> parts) {
  if (parts.empty())
    throw ShapeError("concatCols: no operands");
  std::size_t rows = parts[0].rows(), cols = 0;
  for (const Var &p : parts) {
    if (p.rows() != rows)
      throw ShapeError("concatCols: row counts differ");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  for (const Var &p : parts) {
    const Tensor &pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(pv.rowPtr(r), pv.rowPtr(r) + pv.cols(), out.rowPtr(r) + offset);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += pv.cols();
  }
  return parts[0].tape()->record(
      std::move(out), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Tape &t, std::size_t self) {
        const Tensor &g = t.gradRef(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requiresGrad(ids[k]))
            continue;
          Tensor &gp = t.gradRef(ids[k]);
          for (std::size_t r = 0; r < gp.rows(); ++r)
            for (std::size_t c = 0; c < gp.cols(); ++c)
              gp(r, c) += g(r, offsets[k] + c);
        }
      });
}

Var concatCols(std::initializer_list<Var> parts) {
  return concatCols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concatRows(std::span<const Var> parts) {
  if (parts.empty())
    throw ShapeError("concatRows: no operands");
  std::size_t cols = parts[0].cols(), rows = 0;
  for (const Var &p : parts) {
    if (p.cols() != cols)
      throw ShapeError("concatRows: column counts differ");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  for (const Var &p : parts) {
    const Tensor &pv = p.value();
    std::copy(pv.data().begin(), pv.data().end(), out.rowPtr(offset));
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += pv.rows();
  }
  return parts[0].tape()->record(
      std::move(out), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Tape &t, std::size_t self) {
        const Tensor &g = t.gradRef(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requiresGrad(ids[k]))
            continue;
          Tensor &gp = t.gradRef(ids[k]);
          const double *src = g.rowPtr(offsets[k]);
          for (std::size_t i = 0; i < gp.size(); ++i)
            gp[i] += src[i];
        }
      });
}

Var concatRows(std::initializer_list<Var> parts) {
  return concatRows(std::span<const Var>(parts.begin(), parts.size()));
}

Var rowPermute(Var a, std::vector<std::size_t> index) {
  const Tensor &av = a.value();
  Tensor out(index.size(), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.rows())
      throw ShapeError("rowPermute: index " + std::to_string(index[i]) +
                       " out of range for " + av.shapeString());
    std::copy(av.rowPtr(index[i]), av.rowPtr(index[i]) + av.cols(), out.rowPtr(i));
  }
  std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), {a}, [ia, index = std::move(index)](Tape &t, std::size_t self) {
        const Tensor &g = t.gradRef(self);
        Tensor &ga = t.gradRef(ia);
        for (std::size_t i = 0; i < index.size(); ++i) {
          const double *src = g.rowPtr(i);
          double *dst = ga.rowPtr(index[i]);
          for (std::size_t c = 0; c < g.cols(); ++c)
            dst[c] += src[c];
        }
      });
}

Var rowSlice(Var a, std::size_t start, std::size_t count, std::size_t stride) {
  if (stride == 0)
    throw ShapeError("rowSlice: zero stride");
  if (count > 0 && start + (count - 1) * stride >= a.rows())
    throw ShapeError("rowSlice: range exceeds " + a.value().shapeString());
  std::vector<std::size_t> index(count);
  for (std::size_t i = 0; i < count; ++i)
    index[i] = start + i * stride;
  return rowPermute(a, std::move(index));
}

Var transpose(Var a) {
  const Tensor &av = a.value();
  Tensor out(av.cols(), av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c)
      out(c, r) = av(r, c);
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape &t, std::size_t self) {
    const Tensor &g = t.gradRef(self);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c)
        ga(r, c) += g(c, r);
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().data())
    total += x;
  std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(total), {a}, [ia](Tape &t, std::size_t self) {
    double g = t.gradRef(self)[0];
    Tensor &ga = t.gradRef(ia);
    for (std::size_t i = 0; i < ga.size(); ++i)
      ga[i] += g;
  });
}

Var mean(Var a) {
  std::size_t n = a.value().size();
  if (n == 0)
    throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var squaredL2(Var a) {
  double total = 0.0;
  for (double x : a.value().data())
    total += x * x;
  std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(total), {a}, [ia](Tape &t, std::size_t self) {
    double g = t.gradRef(self)[0];
    const Tensor &av = t.value(ia);
    Tensor &ga = t.gradRef(ia);
    for (std::size_t i = 0; i < ga.size(); ++i)
      ga[i] += 2.0 * g * av[i];
  });
}

} // namespace ad

//===----------------------------------------------------------------------===//
// Gradient checking
//===----------------------------------------------------------------------===//

namespace {

double evaluate(const ScalarFn &fn, const std::vector<Tensor> &inputs) {
  Tape tape;
  tape.setTrapNonFinite(false);
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor &x : inputs)
    vars.push_back(tape.constant(x));
  Var out = fn(tape, vars);
  if (out.rows() != 1 || out.cols() != 1)
    throw ShapeError("gradCheck: function is not scalar-valued");
  return out.value()[0];
}

} // namespace

GradCheckReport gradCheck(const ScalarFn &fn, const std::vector<Tensor> &inputs,
                          double h, double tol, double scaleFloor) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor &x : inputs)
    vars.push_back(tape.leaf(x, true));
  Var out = fn(tape, vars);
  tape.backward(out);

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor &analytic = vars[k].grad();
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      double original = inputs[k][i];
      probe[k][i] = original + h;
      double up = evaluate(fn, probe);
      probe[k][i] = original - h;
      double down = evaluate(fn, probe);
      probe[k][i] = original;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[i];
      double denom = std::max({std::abs(a), std::abs(numeric), scaleFloor});
      double err = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (err > report.maxRelError || std::isnan(err)) {
        report.maxRelError = std::isnan(err)
                                 ? std::numeric_limits<double>::infinity()
                                 : err;
        report.worstInput = k;
        report.worstIndex = i;
        report.worstAnalytic = a;
        report.worstNumeric = numeric;
      }
    }
  }
  report.passed = report.maxRelError <= tol;
  return report;
}

} // namespace polarcore
