#pragma once

#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ad/tensor.hpp"

namespace ad {

enum class Op {
  Leaf,
  Matmul,
  Add,
  Mul,
  Div,
  Exp,
  Log,
  Sqrt,
  Softplus,
  Sigmoid,
  Silu,
  SoftmaxLast,
  LayerNormLast,
  Slice,
  Concat,
  Transpose,
  Reshape,
  ReduceSum,
  ReduceMean,
  GatherRows,
  SsmScan,
};

std::string_view op_name(Op op);

/// Coarse floating-op counter over the primitive layer (matmul MACs and
/// elementwise element counts). Single-threaded; scoped via Guard.
struct FlopCount {
  static int64_t count;
  static bool enabled;
  struct Guard {
    Guard() {
      count = 0;
      enabled = true;
    }
    ~Guard() { enabled = false; }
  };
};

struct OpAttrs {
  int64_t axis = 0;
  int64_t start = 0, stop = 0;          // slice
  std::vector<int64_t> perm;            // transpose
  Shape target;                         // reshape
  std::vector<int64_t> index;           // gather-rows
  double eps = 1e-5;                    // layernorm
};

struct TapeNode {
  Op op = Op::Leaf;
  OpAttrs attrs;
  std::vector<int64_t> inputs;   // node ids, -1 for untracked inputs
  std::vector<Tensor> saved_in;  // forward inputs, in call order
  Tensor saved_out;
  Tensor extra;                  // op-specific state (ssm-scan hidden trajectory)
};

using GradMap = std::unordered_map<int64_t, Tensor>;

/// Reverse-mode computation record. Append-only and topologically ordered by
/// construction: a node's inputs always have smaller ids.
class Tape {
 public:
  /// Registers `value` as a differentiable leaf and returns the tracked handle.
  Tensor leaf(const Tensor& value);

  /// Gradients of a scalar loss w.r.t. every leaf of this tape. Leaves the
  /// loss does not depend on map to zero tensors.
  GradMap backward(const Tensor& loss) const;

  size_t size() const { return nodes_.size(); }
  const TapeNode& node(int64_t id) const { return nodes_.at(id); }

  /// Re-runs every recorded primitive from its saved inputs and checks the
  /// recorded output is reproduced bit-identically.
  bool replay_matches() const;

  Tensor record(Op op, OpAttrs attrs, const std::vector<Tensor>& inputs, Tensor out,
                Tensor extra = {});

 private:
  std::vector<TapeNode> nodes_;
};

// --- primitive forward ops -------------------------------------------------
// Each op computes eagerly; if `tape` is non-null and any input is tracked,
// the application is recorded for backward.

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor divide(Tape* tape, const Tensor& a, const Tensor& b);
Tensor exp(Tape* tape, const Tensor& x);
Tensor log(Tape* tape, const Tensor& x);
Tensor sqrt(Tape* tape, const Tensor& x);
Tensor softplus(Tape* tape, const Tensor& x);
Tensor sigmoid(Tape* tape, const Tensor& x);
Tensor silu(Tape* tape, const Tensor& x);
Tensor softmax_lastdim(Tape* tape, const Tensor& x);
Tensor layernorm_lastdim(Tape* tape, const Tensor& x, double eps = 1e-5);
Tensor slice(Tape* tape, const Tensor& x, int64_t axis, int64_t start, int64_t stop);
Tensor concat(Tape* tape, const std::vector<Tensor>& xs, int64_t axis);
Tensor transpose(Tape* tape, const Tensor& x, std::vector<int64_t> perm);
Tensor reshape(Tape* tape, const Tensor& x, Shape target);
Tensor reduce_sum(Tape* tape, const Tensor& x);
Tensor reduce_mean(Tape* tape, const Tensor& x);
Tensor gather_rows(Tape* tape, const Tensor& table, std::vector<int64_t> index);

/// Fused selective-scan primitive.
///   delta (B,L,D) > 0, a_eff (D,N) < 0, b_in (B,L,N), c_out (B,L,N), x (B,L,D)
/// Per step: h_t = exp(delta_t*A) * h_{t-1} + (delta_t*B_t) * x_t,
/// y_td = sum_n C_t[n] h_t[d,n]. Returns y (B,L,D).
Tensor ssm_scan(Tape* tape, const Tensor& delta, const Tensor& a_eff, const Tensor& b_in,
                const Tensor& c_out, const Tensor& x);

// convenience wrappers built on the primitives
Tensor neg(Tape* tape, const Tensor& x);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& x, double c);
Tensor add_const(Tape* tape, const Tensor& x, double c);

/// Generic string-keyed dispatch over the primitive set.
Tensor apply_primitive(Tape* tape, std::string_view kind, const std::vector<Tensor>& inputs,
                       const OpAttrs& attrs = {});

}  // namespace ad
