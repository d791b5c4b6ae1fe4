#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "shillab/tensor.hpp"

namespace shillab::num {

class Tape;

// Handle into a tape. Cheap to copy; dies with its tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Tensor& grad() const;
};

enum class Op {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kAddRowvec,
  kScale,     // s0 * x
  kAffine,    // s0 * x + s1
  kMatmul,
  kTranspose,
  kLeakyRelu, // slope s0
  kSigmoid,
  kLog,
  kExp,
  kSquare,
  kAbs,
  kClampMin,  // max(x, s0)
  kSoftmaxRows,
  kSumAll,
  kMeanAll,
  kRowSums,
  kGatherRows,
  kScaleRows,
  kMulScalar,
  kCosineRows,
  kSpmm,
  kLinsolveSpd,
  kConcatRows,
};

struct Node {
  Op op = Op::kLeaf;
  int a = -1;
  int b = -1;
  bool requires_grad = false;
  Tensor val;
  Tensor grad;  // allocated on first contribution during backward
  double s0 = 0.0;
  double s1 = 0.0;
  std::vector<std::size_t> idx;
  const SparseMatrix* sp = nullptr;
};

// Eager reverse-mode tape over 2-D tensors. Build a fresh tape per
// optimization step; parameters live outside as plain Tensors and come in
// through input().
class Tape {
 public:
  Var input(Tensor v);
  Var constant(Tensor v);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const;

  // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse. loss must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Keeps a sparse matrix alive for the lifetime of the tape, so spmm nodes
  // built from temporaries stay valid through backward.
  const SparseMatrix& own(SparseMatrix&& s);

  int push(Node&& n);
  Node& at(int id);
  const Node& at(int id) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::unique_ptr<SparseMatrix>> owned_sparse_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_rowvec(Var x, Var b);           // b is 1 x cols
Var scale(Var x, double c);
Var affine(Var x, double k, double b);  // k*x + b elementwise
Var matmul(Var a, Var b);
Var transpose(Var x);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
Var elem_log(Var x);
Var elem_exp(Var x);
Var square(Var x);
Var elem_abs(Var x);
Var clamp_min(Var x, double floor);
Var softmax_rows(Var x);
Var sum_all(Var x);
Var mean_all(Var x);
Var row_sums(Var x);
Var gather_rows(Var x, std::vector<std::size_t> rows);
Var scale_rows(Var x, Var w);           // w is rows x 1
Var mul_scalar(Var x, Var s);           // s is 1 x 1
Var cosine_rows(Var a, Var b);          // per-row cosine, result rows x 1
Var spmm(const SparseMatrix& s, Var x); // s is held by the caller, not copied
Var linsolve_spd(Var a, Var b);         // solves a * out = b, a SPD
Var concat_rows(Var a, Var b);

}  // namespace shillab::num
