#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uniskel/tensor.hpp"

namespace uniskel {

/// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class BatchNormMode { train, eval };

/// Running statistics owned by the model, updated in-place by train-mode
/// forward passes and read by eval-mode passes.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;  // biased, matching the train-mode normalizer
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Reverse-mode automatic differentiation over dense double tensors.
///
/// Every operation appends one record (input ids, output id, backward rule)
/// in execution order, so records are topologically sorted by construction.
/// backward() zeroes all gradient buffers, seeds the scalar root with 1 and
/// replays the records exactly once in reverse; calling it again without
/// recording new ops reproduces identical gradients.
///
/// A tape is a single-threaded builder. Concurrent use is only safe on
/// disjoint tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New graph input; gradients are tracked iff value.requires_grad.
  Var leaf(Tensor value);
  /// New graph input that never tracks gradients.
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  /// Gradient accumulated by the last backward(); zeros beforehand.
  const Tensor& grad(Var v) const;
  bool tracked(Var v) const;

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_ops() const { return static_cast<int>(ops_.size()); }
  const std::vector<int>& op_inputs(int op) const;
  const char* op_name(int op) const;

  /// Reverse sweep from a scalar root.
  void backward(Var root);

  // ---- elementwise ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var rsub_scalar(double c, Var a);  // c - a
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var gelu(Var a);  // tanh approximation
  Var sqrt_guarded(Var a);  // d/dx clamped near zero

  // ---- linear algebra ----
  Var matmul(Var a, Var b);     // [M,K]x[K,N] or batched [B,M,K]x[B,K,N]
  Var matmul_nt(Var a, Var b);  // a x b^T over the last two dims
  Var matmul_tn(Var a, Var b);  // a^T x b, rank-2 operands
  Var linear(Var x, Var w, Var bias);  // rows of x times w, plus bias

  // ---- shape and indexing ----
  Var reshape(Var a, std::vector<int> shape);
  Var gather_slots(Var u, std::vector<int> slots);
  Var scatter_slots(Var x, std::vector<int> slots, int n_slots);
  Var fill_slots(Var u, Var rows, std::vector<int> slots);
  Var lookup(Var table, std::vector<int> indices, std::vector<int> out_shape);
  Var regroup(Var x, int groups, int t, int s);  // [G*t,s,d] -> [G*s,t,d]

  // ---- reductions and broadcasts ----
  Var sum_all(Var a);
  Var mean_all(Var a);
  Var col_mean(Var a);  // [N,D] -> [D]
  Var col_sum(Var a);   // [N,D] -> [D]
  Var sub_row(Var a, Var row);
  Var add_positional(Var x, Var spatial, Var temporal, std::vector<int> frame_of_row);
  Var pool_rows(Var x, int groups);  // [R,L,D] -> [groups,D] mean
  Var sum_offdiag_sq(Var a);         // [D,D] -> scalar

  // ---- neural-net blocks ----
  Var softmax_rows(Var a);
  Var attention(Var q, Var k, Var v);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var batch_norm(Var x, Var gain, Var bias, BatchNormState& state, BatchNormMode mode);
  Var softmax_cross_entropy(Var logits, std::vector<int> labels);
  Var stop_gradient(Var a);

 private:
  struct Node {
    Tensor value;
    bool track = false;
  };
  struct OpRecord {
    const char* name;
    std::vector<int> inputs;
    int output;
    std::function<void()> backward;
  };

  Var make_node(Tensor value, bool track);
  void record(const char* name, std::vector<int> inputs, int output, std::function<void()> bw);
  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Tensor& gbuf(int id) { return grads_[static_cast<std::size_t>(id)]; }
  bool track_of(int id) const { return nodes_[static_cast<std::size_t>(id)].track; }
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;  // parallel to nodes_, empty when untracked
  std::vector<OpRecord> ops_;
  Tensor empty_grad_;
};

}  // namespace uniskel
