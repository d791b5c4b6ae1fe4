#include "shillab/autodiff.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>

#include "shillab/errors.hpp"

namespace shillab::num {

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape != b.tape)
    throw ContractError(std::string(op) + ": vars from different tapes");
}

void check_valid(Var a, const char* op) {
  if (!a.valid()) throw ContractError(std::string(op) + ": invalid var");
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() +
                   " and " + b.shape_str());
}

Tensor& ensure_grad(Node& n) {
  if (n.grad.empty()) n.grad = Tensor(n.val.rows(), n.val.cols());
  return n.grad;
}

}  // namespace

const Tensor& Var::value() const {
  check_valid(*this, "Var::value");
  return tape->value(*this);
}

const Tensor& Var::grad() const {
  check_valid(*this, "Var::grad");
  return tape->grad(*this);
}

int Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const SparseMatrix& Tape::own(SparseMatrix&& s) {
  owned_sparse_.push_back(std::make_unique<SparseMatrix>(std::move(s)));
  return *owned_sparse_.back();
}

Node& Tape::at(int id) { return nodes_[static_cast<std::size_t>(id)]; }
const Node& Tape::at(int id) const {
  return nodes_[static_cast<std::size_t>(id)];
}

Var Tape::input(Tensor v) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = true;
  n.val = std::move(v);
  return {this, push(std::move(n))};
}

Var Tape::constant(Tensor v) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = false;
  n.val = std::move(v);
  return {this, push(std::move(n))};
}

const Tensor& Tape::value(Var v) const { return at(v.id).val; }

bool Tape::has_grad(Var v) const {
  return v.valid() && !at(v.id).grad.empty();
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = at(v.id);
  if (n.grad.empty())
    throw LookupError("Tape::grad: no gradient recorded for node " +
                      std::to_string(v.id));
  return n.grad;
}

namespace {

// Pushes contribution g into input slot `in` of the tape, respecting
// requires_grad. Shapes must already agree.
void accum(Tape& t, int in, const Tensor& g) {
  Node& n = t.at(in);
  if (!n.requires_grad) return;
  Tensor& dst = ensure_grad(n);
  dst.map() += g.map();
}

}  // namespace

void Tape::backward(Var loss) {
  check_valid(loss, "Tape::backward");
  if (loss.tape != this)
    throw ContractError("Tape::backward: loss from another tape");
  Node& top = at(loss.id);
  if (top.val.size() != 1)
    throw ContractError("Tape::backward: loss must be scalar, got " +
                        top.val.shape_str());
  if (!top.requires_grad)
    throw ContractError("Tape::backward: loss does not depend on any input");
  ensure_grad(top)[0] += 1.0;

  for (int i = loss.id; i >= 0; --i) {
    Node& n = at(i);
    if (!n.requires_grad || n.grad.empty()) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        accum(*this, n.a, g);
        accum(*this, n.b, g);
        break;
      }
      case Op::kSub: {
        accum(*this, n.a, g);
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          dst.map() -= g.map();
        }
        break;
      }
      case Op::kMul: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map().array() += g.map().array() * at(n.b).val.map().array();
        }
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          dst.map().array() += g.map().array() * at(n.a).val.map().array();
        }
        break;
      }
      case Op::kAddRowvec: {
        accum(*this, n.a, g);
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          dst.map() += g.map().colwise().sum();
        }
        break;
      }
      case Op::kScale: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map() += n.s0 * g.map();
        }
        break;
      }
      case Op::kAffine: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map() += n.s0 * g.map();
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& av = at(n.a).val;
        const Tensor& bv = at(n.b).val;
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map() += g.map() * bv.map().transpose();
        }
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          dst.map() += av.map().transpose() * g.map();
        }
        break;
      }
      case Op::kTranspose: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map() += g.map().transpose();
        }
        break;
      }
      case Op::kLeakyRelu: {
        if (at(n.a).requires_grad) {
          const Tensor& x = at(n.a).val;
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t k = 0; k < x.size(); ++k)
            dst[k] += g[k] * (x[k] > 0.0 ? 1.0 : n.s0);
        }
        break;
      }
      case Op::kSigmoid: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          const Tensor& y = n.val;
          for (std::size_t k = 0; k < y.size(); ++k)
            dst[k] += g[k] * y[k] * (1.0 - y[k]);
        }
        break;
      }
      case Op::kLog: {
        if (at(n.a).requires_grad) {
          const Tensor& x = at(n.a).val;
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t k = 0; k < x.size(); ++k) dst[k] += g[k] / x[k];
        }
        break;
      }
      case Op::kExp: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map().array() += g.map().array() * n.val.map().array();
        }
        break;
      }
      case Op::kSquare: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map().array() +=
              2.0 * g.map().array() * at(n.a).val.map().array();
        }
        break;
      }
      case Op::kAbs: {
        if (at(n.a).requires_grad) {
          const Tensor& x = at(n.a).val;
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t k = 0; k < x.size(); ++k) {
            double s = x[k] > 0.0 ? 1.0 : (x[k] < 0.0 ? -1.0 : 0.0);
            dst[k] += g[k] * s;
          }
        }
        break;
      }
      case Op::kClampMin: {
        if (at(n.a).requires_grad) {
          const Tensor& x = at(n.a).val;
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t k = 0; k < x.size(); ++k)
            if (x[k] > n.s0) dst[k] += g[k];
        }
        break;
      }
      case Op::kSoftmaxRows: {
        if (at(n.a).requires_grad) {
          const Tensor& y = n.val;
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c)
              dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c)
              dst(r, c) += y(r, c) * (g(r, c) - dot);
          }
        }
        break;
      }
      case Op::kSumAll: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map().array() += g[0];
        }
        break;
      }
      case Op::kMeanAll: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map().array() += g[0] / static_cast<double>(dst.size());
        }
        break;
      }
      case Op::kRowSums: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t r = 0; r < dst.rows(); ++r)
            for (std::size_t c = 0; c < dst.cols(); ++c)
              dst(r, c) += g(r, 0);
        }
        break;
      }
      case Op::kGatherRows: {
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t r = 0; r < n.idx.size(); ++r) {
            std::size_t src = n.idx[r];
            for (std::size_t c = 0; c < dst.cols(); ++c)
              dst(src, c) += g(r, c);
          }
        }
        break;
      }
      case Op::kScaleRows: {
        const Tensor& x = at(n.a).val;
        const Tensor& w = at(n.b).val;
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
              dst(r, c) += g(r, c) * w(r, 0);
        }
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          for (std::size_t r = 0; r < x.rows(); ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < x.cols(); ++c)
              acc += g(r, c) * x(r, c);
            dst(r, 0) += acc;
          }
        }
        break;
      }
      case Op::kMulScalar: {
        const Tensor& x = at(n.a).val;
        double s = at(n.b).val[0];
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map() += s * g.map();
        }
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          dst[0] += (g.map().array() * x.map().array()).sum();
        }
        break;
      }
      case Op::kCosineRows: {
        const Tensor& av = at(n.a).val;
        const Tensor& bv = at(n.b).val;
        bool need_a = at(n.a).requires_grad;
        bool need_b = at(n.b).requires_grad;
        if (!need_a && !need_b) break;
        for (std::size_t r = 0; r < av.rows(); ++r) {
          double nu2 = 0.0, nv2 = 0.0, uv = 0.0;
          for (std::size_t c = 0; c < av.cols(); ++c) {
            nu2 += av(r, c) * av(r, c);
            nv2 += bv(r, c) * bv(r, c);
            uv += av(r, c) * bv(r, c);
          }
          double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
          if (nu == 0.0 || nv == 0.0) continue;  // value was 0, subgrad 0
          double inv = 1.0 / (nu * nv);
          double cosv = uv * inv;
          double gr = g(r, 0);
          if (need_a) {
            Tensor& dst = ensure_grad(at(n.a));
            for (std::size_t c = 0; c < av.cols(); ++c)
              dst(r, c) += gr * (bv(r, c) * inv - cosv * av(r, c) / nu2);
          }
          if (need_b) {
            Tensor& dst = ensure_grad(at(n.b));
            for (std::size_t c = 0; c < av.cols(); ++c)
              dst(r, c) += gr * (av(r, c) * inv - cosv * bv(r, c) / nv2);
          }
        }
        break;
      }
      case Op::kSpmm: {
        if (at(n.a).requires_grad) {
          const SparseMatrix& s = *n.sp;
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t r = 0; r < s.rows; ++r)
            for (std::size_t e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) {
              std::size_t c = s.col_idx[e];
              double v = s.vals[e];
              for (std::size_t j = 0; j < dst.cols(); ++j)
                dst(c, j) += v * g(r, j);
            }
        }
        break;
      }
      case Op::kLinsolveSpd: {
        const Tensor& av = at(n.a).val;
        const Tensor& x = n.val;
        // adjoint solves against A^T so slightly asymmetric inputs still
        // differentiate exactly
        Eigen::MatrixXd at_mat = av.map().transpose();
        Eigen::MatrixXd s = at_mat.partialPivLu().solve(g.map());
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          dst.map() += s;
        }
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          dst.map() -= s * x.map().transpose();
        }
        break;
      }
      case Op::kConcatRows: {
        std::size_t top_rows = at(n.a).val.rows();
        if (at(n.a).requires_grad) {
          Tensor& dst = ensure_grad(at(n.a));
          for (std::size_t r = 0; r < top_rows; ++r)
            for (std::size_t c = 0; c < dst.cols(); ++c)
              dst(r, c) += g(r, c);
        }
        if (at(n.b).requires_grad) {
          Tensor& dst = ensure_grad(at(n.b));
          for (std::size_t r = 0; r < dst.rows(); ++r)
            for (std::size_t c = 0; c < dst.cols(); ++c)
              dst(r, c) += g(top_rows + r, c);
        }
        break;
      }
    }
  }
}

namespace {

Var unary(Var x, Op op, double s0 = 0.0, double s1 = 0.0) {
  check_valid(x, "unary op");
  const Tensor& xv = x.value();
  Node n;
  n.op = op;
  n.a = x.id;
  n.requires_grad = x.tape->at(x.id).requires_grad;
  n.s0 = s0;
  n.s1 = s1;
  Tensor out(xv.rows(), xv.cols());
  switch (op) {
    case Op::kScale:
      out.map() = s0 * xv.map();
      break;
    case Op::kAffine:
      out.map() = (s0 * xv.map()).array() + s1;
      break;
    case Op::kLeakyRelu:
      for (std::size_t k = 0; k < xv.size(); ++k)
        out[k] = xv[k] > 0.0 ? xv[k] : s0 * xv[k];
      break;
    case Op::kSigmoid:
      for (std::size_t k = 0; k < xv.size(); ++k)
        out[k] = 1.0 / (1.0 + std::exp(-xv[k]));
      break;
    case Op::kLog:
      for (std::size_t k = 0; k < xv.size(); ++k) out[k] = std::log(xv[k]);
      break;
    case Op::kExp:
      for (std::size_t k = 0; k < xv.size(); ++k) out[k] = std::exp(xv[k]);
      break;
    case Op::kSquare:
      out.map().array() = xv.map().array().square();
      break;
    case Op::kAbs:
      out.map().array() = xv.map().array().abs();
      break;
    case Op::kClampMin:
      for (std::size_t k = 0; k < xv.size(); ++k) out[k] = std::max(xv[k], s0);
      break;
    case Op::kTranspose: {
      out = Tensor(xv.cols(), xv.rows());
      out.map() = xv.map().transpose();
      break;
    }
    case Op::kSoftmaxRows: {
      for (std::size_t r = 0; r < xv.rows(); ++r) {
        double m = xv(r, 0);
        for (std::size_t c = 1; c < xv.cols(); ++c) m = std::max(m, xv(r, c));
        double s = 0.0;
        for (std::size_t c = 0; c < xv.cols(); ++c) {
          out(r, c) = std::exp(xv(r, c) - m);
          s += out(r, c);
        }
        for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) /= s;
      }
      break;
    }
    case Op::kSumAll:
      out = Tensor::scalar(xv.map().sum());
      break;
    case Op::kMeanAll:
      if (xv.empty()) throw ContractError("mean_all: empty tensor");
      out = Tensor::scalar(xv.map().sum() / static_cast<double>(xv.size()));
      break;
    case Op::kRowSums: {
      out = Tensor(xv.rows(), 1);
      for (std::size_t r = 0; r < xv.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < xv.cols(); ++c) s += xv(r, c);
        out(r, 0) = s;
      }
      break;
    }
    default:
      throw ContractError("unary: bad op");
  }
  n.val = std::move(out);
  return {x.tape, x.tape->push(std::move(n))};
}

Var binary_same_shape(Var a, Var b, Op op, const char* name) {
  check_same_tape(a, b, name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) shape_fail(name, av, bv);
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad =
      a.tape->at(a.id).requires_grad || b.tape->at(b.id).requires_grad;
  Tensor out(av.rows(), av.cols());
  switch (op) {
    case Op::kAdd:
      out.map() = av.map() + bv.map();
      break;
    case Op::kSub:
      out.map() = av.map() - bv.map();
      break;
    case Op::kMul:
      out.map().array() = av.map().array() * bv.map().array();
      break;
    default:
      throw ContractError("binary_same_shape: bad op");
  }
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

}  // namespace

Var add(Var a, Var b) { return binary_same_shape(a, b, Op::kAdd, "add"); }
Var sub(Var a, Var b) { return binary_same_shape(a, b, Op::kSub, "sub"); }
Var mul(Var a, Var b) { return binary_same_shape(a, b, Op::kMul, "mul"); }

Var add_rowvec(Var x, Var b) {
  check_same_tape(x, b, "add_rowvec");
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) shape_fail("add_rowvec", xv, bv);
  Node n;
  n.op = Op::kAddRowvec;
  n.a = x.id;
  n.b = b.id;
  n.requires_grad =
      x.tape->at(x.id).requires_grad || b.tape->at(b.id).requires_grad;
  Tensor out(xv.rows(), xv.cols());
  out.map() = xv.map().rowwise() + bv.map().row(0);
  n.val = std::move(out);
  return {x.tape, x.tape->push(std::move(n))};
}

Var scale(Var x, double c) { return unary(x, Op::kScale, c); }
Var affine(Var x, double k, double b) { return unary(x, Op::kAffine, k, b); }

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_fail("matmul", av, bv);
  Node n;
  n.op = Op::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad =
      a.tape->at(a.id).requires_grad || b.tape->at(b.id).requires_grad;
  Tensor out(av.rows(), bv.cols());
  out.map() = av.map() * bv.map();
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var transpose(Var x) { return unary(x, Op::kTranspose); }
Var leaky_relu(Var x, double slope) { return unary(x, Op::kLeakyRelu, slope); }
Var sigmoid(Var x) { return unary(x, Op::kSigmoid); }
Var elem_log(Var x) { return unary(x, Op::kLog); }
Var elem_exp(Var x) { return unary(x, Op::kExp); }
Var square(Var x) { return unary(x, Op::kSquare); }
Var elem_abs(Var x) { return unary(x, Op::kAbs); }
Var clamp_min(Var x, double floor) { return unary(x, Op::kClampMin, floor); }
Var softmax_rows(Var x) { return unary(x, Op::kSoftmaxRows); }
Var sum_all(Var x) { return unary(x, Op::kSumAll); }
Var mean_all(Var x) { return unary(x, Op::kMeanAll); }
Var row_sums(Var x) { return unary(x, Op::kRowSums); }

Var gather_rows(Var x, std::vector<std::size_t> rows) {
  check_valid(x, "gather_rows");
  const Tensor& xv = x.value();
  for (std::size_t r : rows)
    if (r >= xv.rows())
      throw ContractError("gather_rows: row " + std::to_string(r) +
                          " out of range for " + xv.shape_str());
  Node n;
  n.op = Op::kGatherRows;
  n.a = x.id;
  n.requires_grad = x.tape->at(x.id).requires_grad;
  Tensor out(rows.size(), xv.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) = xv(rows[r], c);
  n.idx = std::move(rows);
  n.val = std::move(out);
  return {x.tape, x.tape->push(std::move(n))};
}

Var scale_rows(Var x, Var w) {
  check_same_tape(x, w, "scale_rows");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.cols() != 1 || wv.rows() != xv.rows()) shape_fail("scale_rows", xv, wv);
  Node n;
  n.op = Op::kScaleRows;
  n.a = x.id;
  n.b = w.id;
  n.requires_grad =
      x.tape->at(x.id).requires_grad || w.tape->at(w.id).requires_grad;
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c)
      out(r, c) = xv(r, c) * wv(r, 0);
  n.val = std::move(out);
  return {x.tape, x.tape->push(std::move(n))};
}

Var mul_scalar(Var x, Var s) {
  check_same_tape(x, s, "mul_scalar");
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (sv.size() != 1) shape_fail("mul_scalar", xv, sv);
  Node n;
  n.op = Op::kMulScalar;
  n.a = x.id;
  n.b = s.id;
  n.requires_grad =
      x.tape->at(x.id).requires_grad || s.tape->at(s.id).requires_grad;
  Tensor out(xv.rows(), xv.cols());
  out.map() = sv[0] * xv.map();
  n.val = std::move(out);
  return {x.tape, x.tape->push(std::move(n))};
}

Var cosine_rows(Var a, Var b) {
  check_same_tape(a, b, "cosine_rows");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) shape_fail("cosine_rows", av, bv);
  Node n;
  n.op = Op::kCosineRows;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad =
      a.tape->at(a.id).requires_grad || b.tape->at(b.id).requires_grad;
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double nu2 = 0.0, nv2 = 0.0, uv = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) {
      nu2 += av(r, c) * av(r, c);
      nv2 += bv(r, c) * bv(r, c);
      uv += av(r, c) * bv(r, c);
    }
    double denom = std::sqrt(nu2) * std::sqrt(nv2);
    out(r, 0) = denom == 0.0 ? 0.0 : uv / denom;
  }
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var spmm(const SparseMatrix& s, Var x) {
  check_valid(x, "spmm");
  const Tensor& xv = x.value();
  if (s.cols != xv.rows())
    throw ShapeError("spmm: sparse " + std::to_string(s.rows) + "x" +
                     std::to_string(s.cols) + " vs dense " + xv.shape_str());
  Node n;
  n.op = Op::kSpmm;
  n.a = x.id;
  n.sp = &s;
  n.requires_grad = x.tape->at(x.id).requires_grad;
  Tensor out(s.rows, xv.cols());
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) {
      std::size_t c = s.col_idx[e];
      double v = s.vals[e];
      for (std::size_t j = 0; j < xv.cols(); ++j)
        out(r, j) += v * xv(c, j);
    }
  n.val = std::move(out);
  return {x.tape, x.tape->push(std::move(n))};
}

Var linsolve_spd(Var a, Var b) {
  check_same_tape(a, b, "linsolve_spd");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != av.cols() || av.rows() != bv.rows())
    shape_fail("linsolve_spd", av, bv);
  // LLT only probes positive definiteness; the value comes from a full LU so
  // it depends on every entry of a, which keeps finite differences honest.
  Eigen::LLT<Eigen::MatrixXd> llt(av.map());
  if (llt.info() != Eigen::Success)
    throw NumericError("linsolve_spd: matrix is not positive definite");
  Node n;
  n.op = Op::kLinsolveSpd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad =
      a.tape->at(a.id).requires_grad || b.tape->at(b.id).requires_grad;
  Tensor out(bv.rows(), bv.cols());
  out.map() = av.map().partialPivLu().solve(bv.map());
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

Var concat_rows(Var a, Var b) {
  check_same_tape(a, b, "concat_rows");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) shape_fail("concat_rows", av, bv);
  Node n;
  n.op = Op::kConcatRows;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad =
      a.tape->at(a.id).requires_grad || b.tape->at(b.id).requires_grad;
  Tensor out(av.rows() + bv.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c);
  for (std::size_t r = 0; r < bv.rows(); ++r)
    for (std::size_t c = 0; c < bv.cols(); ++c)
      out(av.rows() + r, c) = bv(r, c);
  n.val = std::move(out);
  return {a.tape, a.tape->push(std::move(n))};
}

SparseMatrix SparseMatrix::from_triplets(
    std::size_t rows, std::size_t cols,
    const std::vector<std::tuple<std::size_t, std::size_t, double>>& trip) {
  SparseMatrix s;
  s.rows = rows;
  s.cols = cols;
  std::vector<std::size_t> counts(rows, 0);
  for (const auto& [r, c, v] : trip) {
    if (r >= rows || c >= cols)
      throw ContractError("SparseMatrix::from_triplets: entry out of range");
    (void)v;
    ++counts[r];
  }
  s.row_ptr.assign(rows + 1, 0);
  for (std::size_t r = 0; r < rows; ++r)
    s.row_ptr[r + 1] = s.row_ptr[r] + counts[r];
  s.col_idx.resize(trip.size());
  s.vals.resize(trip.size());
  std::vector<std::size_t> cursor(s.row_ptr.begin(), s.row_ptr.end() - 1);
  for (const auto& [r, c, v] : trip) {
    std::size_t at = cursor[r]++;
    s.col_idx[at] = c;
    s.vals[at] = v;
  }
  // entries within a row keep triplet order; callers sort if they care
  return s;
}

}  // namespace shillab::num
