#include "uniskel/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace uniskel {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

std::invalid_argument op_error(const char* op, const std::string& detail) {
  return std::invalid_argument(std::string(op) + ": " + detail);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw op_error(op, "shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

}  // namespace

Var Tape::make_node(Tensor value, bool track) {
  Node n;
  n.track = track;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  grads_.emplace_back(track ? Tensor(nodes_.back().value.shape()) : Tensor());
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::record(const char* name, std::vector<int> inputs, int output,
                  std::function<void()> bw) {
  ops_.push_back(OpRecord{name, std::move(inputs), output, std::move(bw)});
}

void Tape::check(Var v) const {
  if (!v.valid() || v.id >= num_nodes()) {
    throw std::logic_error("invalid tape handle");
  }
}

Var Tape::leaf(Tensor value) { return make_node(std::move(value), value.requires_grad); }

Var Tape::constant(Tensor value) { return make_node(std::move(value), false); }

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

const Tensor& Tape::grad(Var v) const {
  check(v);
  const Tensor& g = grads_[static_cast<std::size_t>(v.id)];
  return g.size() > 0 ? g : empty_grad_;
}

bool Tape::tracked(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)].track;
}

const std::vector<int>& Tape::op_inputs(int op) const {
  return ops_[static_cast<std::size_t>(op)].inputs;
}

const char* Tape::op_name(int op) const { return ops_[static_cast<std::size_t>(op)].name; }

void Tape::backward(Var root) {
  check(root);
  const Tensor& rv = val(root.id);
  if (rv.size() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " + rv.shape_str());
  }
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    Tensor& g = grads_[i];
    std::fill(g.data(), g.data() + g.size(), 0.0);
  }
  if (track_of(root.id)) {
    gbuf(root.id)[0] = 1.0;
  }
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (track_of(it->output) && it->backward) {
      it->backward();
    }
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  require_same_shape("add", ta, tb);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + tb[i];
  const bool track = track_of(a.id) || track_of(b.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("add", {a.id, b.id}, o.id, [this, a, b, o] {
      const Tensor& g = gbuf(o.id);
      if (track_of(a.id)) {
        Tensor& ga = gbuf(a.id);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (track_of(b.id)) {
        Tensor& gb = gbuf(b.id);
        for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return o;
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  require_same_shape("sub", ta, tb);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] - tb[i];
  const bool track = track_of(a.id) || track_of(b.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("sub", {a.id, b.id}, o.id, [this, a, b, o] {
      const Tensor& g = gbuf(o.id);
      if (track_of(a.id)) {
        Tensor& ga = gbuf(a.id);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (track_of(b.id)) {
        Tensor& gb = gbuf(b.id);
        for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return o;
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  require_same_shape("mul", ta, tb);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * tb[i];
  const bool track = track_of(a.id) || track_of(b.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("mul", {a.id, b.id}, o.id, [this, a, b, o] {
      const Tensor& g = gbuf(o.id);
      const Tensor& ta2 = val(a.id);
      const Tensor& tb2 = val(b.id);
      if (track_of(a.id)) {
        Tensor& ga = gbuf(a.id);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * tb2[i];
      }
      if (track_of(b.id)) {
        Tensor& gb = gbuf(b.id);
        for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ta2[i];
      }
    });
  }
  return o;
}

Var Tape::scale(Var a, double c) {
  check(a);
  const Tensor& ta = val(a.id);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * c;
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("scale", {a.id}, o.id, [this, a, o, c] {
      const Tensor& g = gbuf(o.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }
  return o;
}

Var Tape::add_scalar(Var a, double c) {
  check(a);
  const Tensor& ta = val(a.id);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + c;
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("add_scalar", {a.id}, o.id, [this, a, o] {
      const Tensor& g = gbuf(o.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return o;
}

Var Tape::rsub_scalar(double c, Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = c - ta[i];
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("rsub_scalar", {a.id}, o.id, [this, a, o] {
      const Tensor& g = gbuf(o.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
    });
  }
  return o;
}

Var Tape::relu(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("relu", {a.id}, o.id, [this, a, o] {
      const Tensor& g = gbuf(o.id);
      const Tensor& ta2 = val(a.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        if (ta2[i] > 0.0) ga[i] += g[i];
      }
    });
  }
  return o;
}

Var Tape::leaky_relu(Var a, double slope) {
  check(a);
  if (!(slope > 0.0 && slope < 1.0)) {
    throw op_error("leaky_relu", "slope must lie in (0,1), got " + std::to_string(slope));
  }
  const Tensor& ta = val(a.id);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] >= 0.0 ? ta[i] : slope * ta[i];
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    // x == 0 takes the positive branch factor.
    record("leaky_relu", {a.id}, o.id, [this, a, o, slope] {
      const Tensor& g = gbuf(o.id);
      const Tensor& ta2 = val(a.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        ga[i] += ta2[i] >= 0.0 ? g[i] : slope * g[i];
      }
    });
  }
  return o;
}

Var Tape::gelu(Var a) {
  check(a);
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kB = 0.044715;
  const Tensor& ta = val(a.id);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) {
    const double x = ta[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kB * x * x * x)));
  }
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("gelu", {a.id}, o.id, [this, a, o] {
      const Tensor& g = gbuf(o.id);
      const Tensor& ta2 = val(a.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        const double x = ta2[i];
        const double u = kC * (x + kB * x * x * x);
        const double th = std::tanh(u);
        const double sech2 = 1.0 - th * th;
        const double du = kC * (1.0 + 3.0 * kB * x * x);
        ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * x * sech2 * du);
      }
    });
  }
  return o;
}

Var Tape::sqrt_guarded(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) {
    if (ta[i] < 0.0) {
      throw op_error("sqrt_guarded", "negative input " + std::to_string(ta[i]));
    }
    out[i] = std::sqrt(ta[i]);
  }
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("sqrt", {a.id}, o.id, [this, a, o] {
      const Tensor& g = gbuf(o.id);
      const Tensor& y = val(o.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * 0.5 / std::max(y[i], 1e-12);  // guards the Var -> 0 pole
      }
    });
  }
  return o;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (ta.rank() != tb.rank() || (ta.rank() != 2 && ta.rank() != 3)) {
    throw op_error("matmul", "operands must both be rank 2 or rank 3, got " + ta.shape_str() +
                                 " vs " + tb.shape_str());
  }
  const int batches = ta.rank() == 3 ? ta.dim(0) : 1;
  if (ta.rank() == 3 && tb.dim(0) != batches) {
    throw op_error("matmul", "batch mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
  const int m = ta.dim(ta.rank() - 2);
  const int k = ta.dim(ta.rank() - 1);
  const int k2 = tb.dim(tb.rank() - 2);
  const int n = tb.dim(tb.rank() - 1);
  if (k != k2) {
    throw op_error("matmul",
                   "inner dimensions mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out(ta.rank() == 3 ? std::vector<int>{batches, m, n} : std::vector<int>{m, n});
  for (int bi = 0; bi < batches; ++bi) {
    MapC A(ta.data() + static_cast<std::int64_t>(bi) * m * k, m, k);
    MapC B(tb.data() + static_cast<std::int64_t>(bi) * k * n, k, n);
    MapM C(out.data() + static_cast<std::int64_t>(bi) * m * n, m, n);
    C.noalias() = A * B;
  }
  const bool track = track_of(a.id) || track_of(b.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("matmul", {a.id, b.id}, o.id, [this, a, b, o, batches, m, k, n] {
      const Tensor& g = gbuf(o.id);
      const Tensor& ta2 = val(a.id);
      const Tensor& tb2 = val(b.id);
      for (int bi = 0; bi < batches; ++bi) {
        MapC G(g.data() + static_cast<std::int64_t>(bi) * m * n, m, n);
        MapC A(ta2.data() + static_cast<std::int64_t>(bi) * m * k, m, k);
        MapC B(tb2.data() + static_cast<std::int64_t>(bi) * k * n, k, n);
        if (track_of(a.id)) {
          MapM GA(gbuf(a.id).data() + static_cast<std::int64_t>(bi) * m * k, m, k);
          GA.noalias() += G * B.transpose();
        }
        if (track_of(b.id)) {
          MapM GB(gbuf(b.id).data() + static_cast<std::int64_t>(bi) * k * n, k, n);
          GB.noalias() += A.transpose() * G;
        }
      }
    });
  }
  return o;
}

Var Tape::matmul_nt(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (ta.rank() != tb.rank() || (ta.rank() != 2 && ta.rank() != 3)) {
    throw op_error("matmul_nt", "operands must both be rank 2 or rank 3, got " + ta.shape_str() +
                                    " vs " + tb.shape_str());
  }
  const int batches = ta.rank() == 3 ? ta.dim(0) : 1;
  if (ta.rank() == 3 && tb.dim(0) != batches) {
    throw op_error("matmul_nt", "batch mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
  const int m = ta.dim(ta.rank() - 2);
  const int k = ta.dim(ta.rank() - 1);
  const int n = tb.dim(tb.rank() - 2);
  if (tb.dim(tb.rank() - 1) != k) {
    throw op_error("matmul_nt",
                   "inner dimensions mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out(ta.rank() == 3 ? std::vector<int>{batches, m, n} : std::vector<int>{m, n});
  for (int bi = 0; bi < batches; ++bi) {
    MapC A(ta.data() + static_cast<std::int64_t>(bi) * m * k, m, k);
    MapC B(tb.data() + static_cast<std::int64_t>(bi) * n * k, n, k);
    MapM C(out.data() + static_cast<std::int64_t>(bi) * m * n, m, n);
    C.noalias() = A * B.transpose();
  }
  const bool track = track_of(a.id) || track_of(b.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("matmul_nt", {a.id, b.id}, o.id, [this, a, b, o, batches, m, k, n] {
      const Tensor& g = gbuf(o.id);
      const Tensor& ta2 = val(a.id);
      const Tensor& tb2 = val(b.id);
      for (int bi = 0; bi < batches; ++bi) {
        MapC G(g.data() + static_cast<std::int64_t>(bi) * m * n, m, n);
        MapC A(ta2.data() + static_cast<std::int64_t>(bi) * m * k, m, k);
        MapC B(tb2.data() + static_cast<std::int64_t>(bi) * n * k, n, k);
        if (track_of(a.id)) {
          MapM GA(gbuf(a.id).data() + static_cast<std::int64_t>(bi) * m * k, m, k);
          GA.noalias() += G * B;
        }
        if (track_of(b.id)) {
          MapM GB(gbuf(b.id).data() + static_cast<std::int64_t>(bi) * n * k, n, k);
          GB.noalias() += G.transpose() * A;
        }
      }
    });
  }
  return o;
}

Var Tape::matmul_tn(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(0) != tb.dim(0)) {
    throw op_error("matmul_tn",
                   "wants rank-2 operands with equal rows, got " + ta.shape_str() + " vs " +
                       tb.shape_str());
  }
  const int n = ta.dim(0);
  const int m = ta.dim(1);
  const int k = tb.dim(1);
  Tensor out({m, k});
  {
    MapC A(ta.data(), n, m);
    MapC B(tb.data(), n, k);
    MapM C(out.data(), m, k);
    C.noalias() = A.transpose() * B;
  }
  const bool track = track_of(a.id) || track_of(b.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("matmul_tn", {a.id, b.id}, o.id, [this, a, b, o, n, m, k] {
      const Tensor& g = gbuf(o.id);
      MapC G(g.data(), m, k);
      MapC A(val(a.id).data(), n, m);
      MapC B(val(b.id).data(), n, k);
      if (track_of(a.id)) {
        MapM GA(gbuf(a.id).data(), n, m);
        GA.noalias() += B * G.transpose();
      }
      if (track_of(b.id)) {
        MapM GB(gbuf(b.id).data(), n, k);
        GB.noalias() += A * G;
      }
    });
  }
  return o;
}

Var Tape::linear(Var x, Var w, Var bias) {
  check(x);
  check(w);
  check(bias);
  const Tensor& tx = val(x.id);
  const Tensor& tw = val(w.id);
  const Tensor& tb = val(bias.id);
  if (tx.rank() < 2 || tw.rank() != 2) {
    throw op_error("linear", "wants x rank >= 2 and rank-2 weights, got " + tx.shape_str() +
                                 " vs " + tw.shape_str());
  }
  const int k = tx.dim(tx.rank() - 1);
  if (tw.dim(0) != k) {
    throw op_error("linear",
                   "input width mismatch " + tx.shape_str() + " vs weights " + tw.shape_str());
  }
  const int n = tw.dim(1);
  if (tb.rank() != 1 || tb.dim(0) != n) {
    throw op_error("linear", "bias shape " + tb.shape_str() + " does not match output width " +
                                 std::to_string(n));
  }
  const std::int64_t rows = tx.size() / k;
  std::vector<int> out_shape = tx.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  {
    MapC X(tx.data(), rows, k);
    MapC W(tw.data(), k, n);
    MapM Y(out.data(), rows, n);
    Y.noalias() = X * W;
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(tb.data(), n);
  }
  const bool track = track_of(x.id) || track_of(w.id) || track_of(bias.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("linear", {x.id, w.id, bias.id}, o.id, [this, x, w, bias, o, rows, k, n] {
      const Tensor& g = gbuf(o.id);
      MapC G(g.data(), rows, n);
      if (track_of(x.id)) {
        MapC W(val(w.id).data(), k, n);
        MapM GX(gbuf(x.id).data(), rows, k);
        GX.noalias() += G * W.transpose();
      }
      if (track_of(w.id)) {
        MapC X(val(x.id).data(), rows, k);
        MapM GW(gbuf(w.id).data(), k, n);
        GW.noalias() += X.transpose() * G;
      }
      if (track_of(bias.id)) {
        Eigen::Map<Eigen::RowVectorXd> GB(gbuf(bias.id).data(), n);
        GB += G.colwise().sum();
      }
    });
  }
  return o;
}

// ---------------------------------------------------------------------------
// shape and indexing
// ---------------------------------------------------------------------------

Var Tape::reshape(Var a, std::vector<int> shape) {
  check(a);
  const Tensor& ta = val(a.id);
  if (shape_size(shape) != ta.size()) {
    throw op_error("reshape",
                   "cannot reshape " + ta.shape_str() + " to " + uniskel::shape_str(shape));
  }
  Tensor out(shape);
  std::copy(ta.data(), ta.data() + ta.size(), out.data());
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("reshape", {a.id}, o.id, [this, a, o] {
      const Tensor& g = gbuf(o.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return o;
}

Var Tape::gather_slots(Var u, std::vector<int> slots) {
  check(u);
  const Tensor& tu = val(u.id);
  if (tu.rank() != 3) {
    throw op_error("gather_slots", "wants [R,S,C], got " + tu.shape_str());
  }
  const int R = tu.dim(0), S = tu.dim(1), C = tu.dim(2);
  for (int s : slots) {
    if (s < 0 || s >= S) throw op_error("gather_slots", "slot index out of range");
  }
  const int P = static_cast<int>(slots.size());
  Tensor out({R, P, C});
  for (int r = 0; r < R; ++r) {
    for (int p = 0; p < P; ++p) {
      const double* src = tu.data() + (static_cast<std::int64_t>(r) * S + slots[p]) * C;
      double* dst = out.data() + (static_cast<std::int64_t>(r) * P + p) * C;
      std::copy(src, src + C, dst);
    }
  }
  const bool track = track_of(u.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("gather_slots", {u.id}, o.id, [this, u, o, slots = std::move(slots), R, S, C, P] {
      const Tensor& g = gbuf(o.id);
      Tensor& gu = gbuf(u.id);
      for (int r = 0; r < R; ++r) {
        for (int p = 0; p < P; ++p) {
          const double* gs = g.data() + (static_cast<std::int64_t>(r) * P + p) * C;
          double* gd = gu.data() + (static_cast<std::int64_t>(r) * S + slots[p]) * C;
          for (int c = 0; c < C; ++c) gd[c] += gs[c];
        }
      }
    });
  }
  return o;
}

Var Tape::scatter_slots(Var x, std::vector<int> slots, int n_slots) {
  check(x);
  const Tensor& tx = val(x.id);
  if (tx.rank() != 3) {
    throw op_error("scatter_slots", "wants [R,J,C], got " + tx.shape_str());
  }
  const int R = tx.dim(0), J = tx.dim(1), C = tx.dim(2);
  if (static_cast<int>(slots.size()) != J) {
    throw op_error("scatter_slots", "slot map size does not match joint count");
  }
  std::vector<char> seen(static_cast<std::size_t>(n_slots), 0);
  for (int s : slots) {
    if (s < 0 || s >= n_slots || seen[static_cast<std::size_t>(s)]) {
      throw op_error("scatter_slots", "slot map must be injective into [0,n_slots)");
    }
    seen[static_cast<std::size_t>(s)] = 1;
  }
  Tensor out({R, n_slots, C});
  for (int r = 0; r < R; ++r) {
    for (int j = 0; j < J; ++j) {
      const double* src = tx.data() + (static_cast<std::int64_t>(r) * J + j) * C;
      double* dst = out.data() + (static_cast<std::int64_t>(r) * n_slots + slots[j]) * C;
      std::copy(src, src + C, dst);
    }
  }
  const bool track = track_of(x.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("scatter_slots", {x.id}, o.id,
           [this, x, o, slots = std::move(slots), R, J, C, n_slots] {
             const Tensor& g = gbuf(o.id);
             Tensor& gx = gbuf(x.id);
             for (int r = 0; r < R; ++r) {
               for (int j = 0; j < J; ++j) {
                 const double* gs =
                     g.data() + (static_cast<std::int64_t>(r) * n_slots + slots[j]) * C;
                 double* gd = gx.data() + (static_cast<std::int64_t>(r) * J + j) * C;
                 for (int c = 0; c < C; ++c) gd[c] += gs[c];
               }
             }
           });
  }
  return o;
}

Var Tape::fill_slots(Var u, Var rows, std::vector<int> slots) {
  check(u);
  check(rows);
  const Tensor& tu = val(u.id);
  const Tensor& tr = val(rows.id);
  if (tu.rank() != 3 || tr.rank() != 2 || tr.dim(1) != tu.dim(2)) {
    throw op_error("fill_slots",
                   "wants u [R,S,C] and rows [P,C], got " + tu.shape_str() + " vs " +
                       tr.shape_str());
  }
  const int R = tu.dim(0), S = tu.dim(1), C = tu.dim(2);
  const int P = tr.dim(0);
  if (static_cast<int>(slots.size()) != P) {
    throw op_error("fill_slots", "slot list size does not match prompt rows");
  }
  for (int s : slots) {
    if (s < 0 || s >= S) throw op_error("fill_slots", "slot index out of range");
  }
  Tensor out = tu;
  out.requires_grad = false;
  for (int r = 0; r < R; ++r) {
    for (int p = 0; p < P; ++p) {
      const double* src = tr.data() + static_cast<std::int64_t>(p) * C;
      double* dst = out.data() + (static_cast<std::int64_t>(r) * S + slots[p]) * C;
      std::copy(src, src + C, dst);
    }
  }
  const bool track = track_of(u.id) || track_of(rows.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("fill_slots", {u.id, rows.id}, o.id,
           [this, u, rows, o, slots = std::move(slots), R, S, C, P] {
             const Tensor& g = gbuf(o.id);
             if (track_of(u.id)) {
               std::vector<char> filled(static_cast<std::size_t>(S), 0);
               for (int s : slots) filled[static_cast<std::size_t>(s)] = 1;
               Tensor& gu = gbuf(u.id);
               for (int r = 0; r < R; ++r) {
                 for (int s = 0; s < S; ++s) {
                   if (filled[static_cast<std::size_t>(s)]) continue;
                   const double* gs = g.data() + (static_cast<std::int64_t>(r) * S + s) * C;
                   double* gd = gu.data() + (static_cast<std::int64_t>(r) * S + s) * C;
                   for (int c = 0; c < C; ++c) gd[c] += gs[c];
                 }
               }
             }
             if (track_of(rows.id)) {
               Tensor& gr = gbuf(rows.id);
               for (int r = 0; r < R; ++r) {
                 for (int p = 0; p < P; ++p) {
                   const double* gs =
                       g.data() + (static_cast<std::int64_t>(r) * S + slots[p]) * C;
                   double* gd = gr.data() + static_cast<std::int64_t>(p) * C;
                   for (int c = 0; c < C; ++c) gd[c] += gs[c];
                 }
               }
             }
           });
  }
  return o;
}

Var Tape::lookup(Var table, std::vector<int> indices, std::vector<int> out_shape) {
  check(table);
  const Tensor& tt = val(table.id);
  if (tt.rank() != 1) {
    throw op_error("lookup", "wants a rank-1 table, got " + tt.shape_str());
  }
  if (shape_size(out_shape) != static_cast<std::int64_t>(indices.size())) {
    throw op_error("lookup", "index count does not match output shape");
  }
  const int W = tt.dim(0);
  Tensor out(out_shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int ix = indices[i];
    if (ix < 0 || ix >= W) throw op_error("lookup", "index out of table range");
    out[static_cast<std::int64_t>(i)] = tt[ix];
  }
  const bool track = track_of(table.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("lookup", {table.id}, o.id, [this, table, o, indices = std::move(indices)] {
      const Tensor& g = gbuf(o.id);
      Tensor& gt = gbuf(table.id);
      for (std::size_t i = 0; i < indices.size(); ++i) {
        gt[indices[i]] += g[static_cast<std::int64_t>(i)];
      }
    });
  }
  return o;
}

Var Tape::regroup(Var x, int groups, int t, int s) {
  check(x);
  const Tensor& tx = val(x.id);
  if (tx.rank() != 3 || tx.dim(0) != groups * t || tx.dim(1) != s) {
    throw op_error("regroup", "wants [" + std::to_string(groups * t) + "," + std::to_string(s) +
                                  ",d], got " + tx.shape_str());
  }
  const int d = tx.dim(2);
  Tensor out({groups * s, t, d});
  for (int gidx = 0; gidx < groups; ++gidx) {
    for (int ti = 0; ti < t; ++ti) {
      for (int si = 0; si < s; ++si) {
        const double* src =
            tx.data() + ((static_cast<std::int64_t>(gidx) * t + ti) * s + si) * d;
        double* dst = out.data() + ((static_cast<std::int64_t>(gidx) * s + si) * t + ti) * d;
        std::copy(src, src + d, dst);
      }
    }
  }
  const bool track = track_of(x.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("regroup", {x.id}, o.id, [this, x, o, groups, t, s, d] {
      const Tensor& g = gbuf(o.id);
      Tensor& gx = gbuf(x.id);
      for (int gidx = 0; gidx < groups; ++gidx) {
        for (int ti = 0; ti < t; ++ti) {
          for (int si = 0; si < s; ++si) {
            const double* gs =
                g.data() + ((static_cast<std::int64_t>(gidx) * s + si) * t + ti) * d;
            double* gd = gx.data() + ((static_cast<std::int64_t>(gidx) * t + ti) * s + si) * d;
            for (int c = 0; c < d; ++c) gd[c] += gs[c];
          }
        }
      }
    });
  }
  return o;
}

// ---------------------------------------------------------------------------
// reductions and broadcasts
// ---------------------------------------------------------------------------

Var Tape::sum_all(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  double s = 0.0;
  for (std::int64_t i = 0; i < ta.size(); ++i) s += ta[i];
  const bool track = track_of(a.id);
  Var o = make_node(Tensor::scalar(s), track);
  if (track) {
    record("sum_all", {a.id}, o.id, [this, a, o] {
      const double g = gbuf(o.id)[0];
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return o;
}

Var Tape::mean_all(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  const double inv = 1.0 / static_cast<double>(ta.size());
  double s = 0.0;
  for (std::int64_t i = 0; i < ta.size(); ++i) s += ta[i];
  const bool track = track_of(a.id);
  Var o = make_node(Tensor::scalar(s * inv), track);
  if (track) {
    record("mean_all", {a.id}, o.id, [this, a, o, inv] {
      const double g = gbuf(o.id)[0] * inv;
      Tensor& ga = gbuf(a.id);
      for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return o;
}

Var Tape::col_sum(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  if (ta.rank() != 2) throw op_error("col_sum", "wants [N,D], got " + ta.shape_str());
  const int N = ta.dim(0), D = ta.dim(1);
  Tensor out({D});
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < D; ++j) out[j] += ta[static_cast<std::int64_t>(i) * D + j];
  }
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("col_sum", {a.id}, o.id, [this, a, o, N, D] {
      const Tensor& g = gbuf(o.id);
      Tensor& ga = gbuf(a.id);
      for (int i = 0; i < N; ++i) {
        for (int j = 0; j < D; ++j) ga[static_cast<std::int64_t>(i) * D + j] += g[j];
      }
    });
  }
  return o;
}

Var Tape::col_mean(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  if (ta.rank() != 2) throw op_error("col_mean", "wants [N,D], got " + ta.shape_str());
  return scale(col_sum(a), 1.0 / static_cast<double>(ta.dim(0)));
}

Var Tape::sub_row(Var a, Var row) {
  check(a);
  check(row);
  const Tensor& ta = val(a.id);
  const Tensor& tr = val(row.id);
  if (ta.rank() != 2 || tr.rank() != 1 || tr.dim(0) != ta.dim(1)) {
    throw op_error("sub_row",
                   "wants [N,D] minus [D], got " + ta.shape_str() + " vs " + tr.shape_str());
  }
  const int N = ta.dim(0), D = ta.dim(1);
  Tensor out({N, D});
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < D; ++j) {
      out[static_cast<std::int64_t>(i) * D + j] = ta[static_cast<std::int64_t>(i) * D + j] - tr[j];
    }
  }
  const bool track = track_of(a.id) || track_of(row.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("sub_row", {a.id, row.id}, o.id, [this, a, row, o, N, D] {
      const Tensor& g = gbuf(o.id);
      if (track_of(a.id)) {
        Tensor& ga = gbuf(a.id);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (track_of(row.id)) {
        Tensor& gr = gbuf(row.id);
        for (int i = 0; i < N; ++i) {
          for (int j = 0; j < D; ++j) gr[j] -= g[static_cast<std::int64_t>(i) * D + j];
        }
      }
    });
  }
  return o;
}

Var Tape::add_positional(Var x, Var spatial, Var temporal, std::vector<int> frame_of_row) {
  check(x);
  check(spatial);
  check(temporal);
  const Tensor& tx = val(x.id);
  const Tensor& ts = val(spatial.id);
  const Tensor& tt = val(temporal.id);
  if (tx.rank() != 3 || ts.rank() != 2 || tt.rank() != 2 || ts.dim(0) != tx.dim(1) ||
      ts.dim(1) != tx.dim(2) || tt.dim(1) != tx.dim(2)) {
    throw op_error("add_positional", "shape mismatch " + tx.shape_str() + " + " + ts.shape_str() +
                                         " + " + tt.shape_str());
  }
  const int R = tx.dim(0), S = tx.dim(1), d = tx.dim(2);
  if (static_cast<int>(frame_of_row.size()) != R) {
    throw op_error("add_positional", "frame index list must have one entry per row");
  }
  for (int f : frame_of_row) {
    if (f < 0 || f >= tt.dim(0)) {
      throw op_error("add_positional", "frame index exceeds temporal table " + tt.shape_str());
    }
  }
  Tensor out({R, S, d});
  for (int r = 0; r < R; ++r) {
    const double* trow = tt.data() + static_cast<std::int64_t>(frame_of_row[r]) * d;
    for (int s = 0; s < S; ++s) {
      const double* xp = tx.data() + (static_cast<std::int64_t>(r) * S + s) * d;
      const double* sp = ts.data() + static_cast<std::int64_t>(s) * d;
      double* op = out.data() + (static_cast<std::int64_t>(r) * S + s) * d;
      for (int c = 0; c < d; ++c) op[c] = xp[c] + sp[c] + trow[c];
    }
  }
  const bool track = track_of(x.id) || track_of(spatial.id) || track_of(temporal.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("add_positional", {x.id, spatial.id, temporal.id}, o.id,
           [this, x, spatial, temporal, o, frames = std::move(frame_of_row), R, S, d] {
             const Tensor& g = gbuf(o.id);
             if (track_of(x.id)) {
               Tensor& gx = gbuf(x.id);
               for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
             }
             if (track_of(spatial.id)) {
               Tensor& gs = gbuf(spatial.id);
               for (int r = 0; r < R; ++r) {
                 for (int s = 0; s < S; ++s) {
                   const double* gp = g.data() + (static_cast<std::int64_t>(r) * S + s) * d;
                   double* gd = gs.data() + static_cast<std::int64_t>(s) * d;
                   for (int c = 0; c < d; ++c) gd[c] += gp[c];
                 }
               }
             }
             if (track_of(temporal.id)) {
               Tensor& gt = gbuf(temporal.id);
               for (int r = 0; r < R; ++r) {
                 double* gd = gt.data() + static_cast<std::int64_t>(frames[r]) * d;
                 for (int s = 0; s < S; ++s) {
                   const double* gp = g.data() + (static_cast<std::int64_t>(r) * S + s) * d;
                   for (int c = 0; c < d; ++c) gd[c] += gp[c];
                 }
               }
             }
           });
  }
  return o;
}

Var Tape::pool_rows(Var x, int groups) {
  check(x);
  const Tensor& tx = val(x.id);
  if (tx.rank() != 3 || groups <= 0 || tx.dim(0) % groups != 0) {
    throw op_error("pool_rows", "row count " + tx.shape_str() + " not divisible into " +
                                    std::to_string(groups) + " groups");
  }
  const int R = tx.dim(0), L = tx.dim(1), D = tx.dim(2);
  const int per = R / groups;
  const double inv = 1.0 / (static_cast<double>(per) * static_cast<double>(L));
  Tensor out({groups, D});
  for (int gi = 0; gi < groups; ++gi) {
    double* op = out.data() + static_cast<std::int64_t>(gi) * D;
    for (int r = gi * per; r < (gi + 1) * per; ++r) {
      for (int l = 0; l < L; ++l) {
        const double* xp = tx.data() + (static_cast<std::int64_t>(r) * L + l) * D;
        for (int c = 0; c < D; ++c) op[c] += xp[c];
      }
    }
    for (int c = 0; c < D; ++c) op[c] *= inv;
  }
  const bool track = track_of(x.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("pool_rows", {x.id}, o.id, [this, x, o, groups, per, L, D, inv] {
      const Tensor& g = gbuf(o.id);
      Tensor& gx = gbuf(x.id);
      for (int gi = 0; gi < groups; ++gi) {
        const double* gp = g.data() + static_cast<std::int64_t>(gi) * D;
        for (int r = gi * per; r < (gi + 1) * per; ++r) {
          for (int l = 0; l < L; ++l) {
            double* gd = gx.data() + (static_cast<std::int64_t>(r) * L + l) * D;
            for (int c = 0; c < D; ++c) gd[c] += gp[c] * inv;
          }
        }
      }
    });
  }
  return o;
}

Var Tape::sum_offdiag_sq(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  if (ta.rank() != 2 || ta.dim(0) != ta.dim(1)) {
    throw op_error("sum_offdiag_sq", "wants a square matrix, got " + ta.shape_str());
  }
  const int D = ta.dim(0);
  double s = 0.0;
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < D; ++j) {
      if (i == j) continue;
      const double v = ta[static_cast<std::int64_t>(i) * D + j];
      s += v * v;
    }
  }
  const bool track = track_of(a.id);
  Var o = make_node(Tensor::scalar(s), track);
  if (track) {
    record("sum_offdiag_sq", {a.id}, o.id, [this, a, o, D] {
      const double g = gbuf(o.id)[0];
      const Tensor& ta2 = val(a.id);
      Tensor& ga = gbuf(a.id);
      for (int i = 0; i < D; ++i) {
        for (int j = 0; j < D; ++j) {
          if (i == j) continue;
          ga[static_cast<std::int64_t>(i) * D + j] +=
              2.0 * g * ta2[static_cast<std::int64_t>(i) * D + j];
        }
      }
    });
  }
  return o;
}

// ---------------------------------------------------------------------------
// neural-net blocks
// ---------------------------------------------------------------------------

Var Tape::softmax_rows(Var a) {
  check(a);
  const Tensor& ta = val(a.id);
  if (ta.rank() < 1) throw op_error("softmax_rows", "wants rank >= 1");
  const int L = ta.dim(ta.rank() - 1);
  const std::int64_t rows = ta.size() / L;
  Tensor out(ta.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xp = ta.data() + r * L;
    double* op = out.data() + r * L;
    double mx = xp[0];
    for (int i = 1; i < L; ++i) mx = std::max(mx, xp[i]);
    double z = 0.0;
    for (int i = 0; i < L; ++i) {
      op[i] = std::exp(xp[i] - mx);
      z += op[i];
    }
    const double inv = 1.0 / z;
    for (int i = 0; i < L; ++i) op[i] *= inv;
  }
  const bool track = track_of(a.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("softmax_rows", {a.id}, o.id, [this, a, o, rows, L] {
      const Tensor& g = gbuf(o.id);
      const Tensor& y = val(o.id);
      Tensor& ga = gbuf(a.id);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* gp = g.data() + r * L;
        const double* yp = y.data() + r * L;
        double dot = 0.0;
        for (int i = 0; i < L; ++i) dot += gp[i] * yp[i];
        double* gd = ga.data() + r * L;
        for (int i = 0; i < L; ++i) gd[i] += yp[i] * (gp[i] - dot);
      }
    });
  }
  return o;
}

Var Tape::attention(Var q, Var k, Var v) {
  check(q);
  check(k);
  check(v);
  const Tensor& tq = val(q.id);
  const Tensor& tk = val(k.id);
  const Tensor& tv = val(v.id);
  if (!tq.same_shape(tk) || !tq.same_shape(tv)) {
    throw op_error("attention", "q/k/v must share extents, got " + tq.shape_str() + ", " +
                                    tk.shape_str() + ", " + tv.shape_str());
  }
  if (tq.rank() != 2 && tq.rank() != 3) {
    throw op_error("attention", "wants [L,d] or [B,L,d], got " + tq.shape_str());
  }
  const int d = tq.dim(tq.rank() - 1);
  Var scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
  Var attn = softmax_rows(scores);
  return matmul(attn, v);
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  check(x);
  check(gain);
  check(bias);
  const Tensor& tx = val(x.id);
  const Tensor& tg = val(gain.id);
  const Tensor& tb = val(bias.id);
  const int d = tx.dim(tx.rank() - 1);
  if (tg.rank() != 1 || tg.dim(0) != d || !tg.same_shape(tb)) {
    throw op_error("layer_norm", "gain/bias must be [" + std::to_string(d) + "]");
  }
  const std::int64_t rows = tx.size() / d;
  Tensor out(tx.shape());
  Tensor xhat(tx.shape());
  Tensor rstd({static_cast<int>(rows)});
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xp = tx.data() + r * d;
    double mu = 0.0;
    for (int i = 0; i < d; ++i) mu += xp[i];
    mu /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) var += (xp[i] - mu) * (xp[i] - mu);
    var /= d;
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    double* hp = xhat.data() + r * d;
    double* op = out.data() + r * d;
    for (int i = 0; i < d; ++i) {
      hp[i] = (xp[i] - mu) * rs;
      op[i] = tg[i] * hp[i] + tb[i];
    }
  }
  const bool track = track_of(x.id) || track_of(gain.id) || track_of(bias.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    record("layer_norm", {x.id, gain.id, bias.id}, o.id,
           [this, x, gain, bias, o, rows, d, xhat = std::move(xhat), rstd = std::move(rstd)] {
             const Tensor& g = gbuf(o.id);
             const Tensor& tg2 = val(gain.id);
             for (std::int64_t r = 0; r < rows; ++r) {
               const double* gp = g.data() + r * d;
               const double* hp = xhat.data() + r * d;
               if (track_of(x.id)) {
                 double mean_gg = 0.0, mean_ggh = 0.0;
                 for (int i = 0; i < d; ++i) {
                   const double gg = gp[i] * tg2[i];
                   mean_gg += gg;
                   mean_ggh += gg * hp[i];
                 }
                 mean_gg /= d;
                 mean_ggh /= d;
                 double* gd = gbuf(x.id).data() + r * d;
                 for (int i = 0; i < d; ++i) {
                   const double gg = gp[i] * tg2[i];
                   gd[i] += rstd[r] * (gg - mean_gg - hp[i] * mean_ggh);
                 }
               }
               if (track_of(gain.id)) {
                 Tensor& gg = gbuf(gain.id);
                 for (int i = 0; i < d; ++i) gg[i] += gp[i] * hp[i];
               }
               if (track_of(bias.id)) {
                 Tensor& gb = gbuf(bias.id);
                 for (int i = 0; i < d; ++i) gb[i] += gp[i];
               }
             }
           });
  }
  return o;
}

Var Tape::batch_norm(Var x, Var gain, Var bias, BatchNormState& state, BatchNormMode mode) {
  check(x);
  check(gain);
  check(bias);
  const Tensor& tx = val(x.id);
  if (tx.rank() != 2) throw op_error("batch_norm", "wants [N,F], got " + tx.shape_str());
  const int N = tx.dim(0), F = tx.dim(1);
  const Tensor& tg = val(gain.id);
  const Tensor& tb = val(bias.id);
  if (tg.rank() != 1 || tg.dim(0) != F || !tg.same_shape(tb)) {
    throw op_error("batch_norm", "gain/bias must be [" + std::to_string(F) + "]");
  }
  if (state.running_mean.size() != F || state.running_var.size() != F) {
    throw op_error("batch_norm", "running stats do not match feature width");
  }
  if (mode == BatchNormMode::train && N < 2) {
    throw op_error("batch_norm",
                   "degenerate batch: train mode needs N >= 2, got N = " + std::to_string(N));
  }

  Tensor xhat({N, F});
  Tensor rstd({F});
  if (mode == BatchNormMode::train) {
    for (int j = 0; j < F; ++j) {
      double mu = 0.0;
      for (int i = 0; i < N; ++i) mu += tx[static_cast<std::int64_t>(i) * F + j];
      mu /= N;
      double var = 0.0;
      for (int i = 0; i < N; ++i) {
        const double c = tx[static_cast<std::int64_t>(i) * F + j] - mu;
        var += c * c;
      }
      var /= N;  // biased, matching the normalizer
      const double rs = 1.0 / std::sqrt(var + state.eps);
      rstd[j] = rs;
      for (int i = 0; i < N; ++i) {
        xhat[static_cast<std::int64_t>(i) * F + j] =
            (tx[static_cast<std::int64_t>(i) * F + j] - mu) * rs;
      }
      state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mu;
      state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * var;
    }
  } else {
    for (int j = 0; j < F; ++j) {
      const double rs = 1.0 / std::sqrt(state.running_var[j] + state.eps);
      rstd[j] = rs;
      for (int i = 0; i < N; ++i) {
        xhat[static_cast<std::int64_t>(i) * F + j] =
            (tx[static_cast<std::int64_t>(i) * F + j] - state.running_mean[j]) * rs;
      }
    }
  }
  Tensor out({N, F});
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < F; ++j) {
      out[static_cast<std::int64_t>(i) * F + j] =
          tg[j] * xhat[static_cast<std::int64_t>(i) * F + j] + tb[j];
    }
  }
  const bool track = track_of(x.id) || track_of(gain.id) || track_of(bias.id);
  Var o = make_node(std::move(out), track);
  if (track) {
    const bool train = mode == BatchNormMode::train;
    record("batch_norm", {x.id, gain.id, bias.id}, o.id,
           [this, x, gain, bias, o, N, F, train, xhat = std::move(xhat), rstd = std::move(rstd)] {
             const Tensor& g = gbuf(o.id);
             const Tensor& tg2 = val(gain.id);
             if (track_of(gain.id)) {
               Tensor& gg = gbuf(gain.id);
               for (int i = 0; i < N; ++i) {
                 for (int j = 0; j < F; ++j) {
                   gg[j] += g[static_cast<std::int64_t>(i) * F + j] *
                            xhat[static_cast<std::int64_t>(i) * F + j];
                 }
               }
             }
             if (track_of(bias.id)) {
               Tensor& gb = gbuf(bias.id);
               for (int i = 0; i < N; ++i) {
                 for (int j = 0; j < F; ++j) gb[j] += g[static_cast<std::int64_t>(i) * F + j];
               }
             }
             if (track_of(x.id)) {
               Tensor& gx = gbuf(x.id);
               if (train) {
                 for (int j = 0; j < F; ++j) {
                   double mean_g = 0.0, mean_gh = 0.0;
                   for (int i = 0; i < N; ++i) {
                     const double gi = g[static_cast<std::int64_t>(i) * F + j];
                     mean_g += gi;
                     mean_gh += gi * xhat[static_cast<std::int64_t>(i) * F + j];
                   }
                   mean_g /= N;
                   mean_gh /= N;
                   for (int i = 0; i < N; ++i) {
                     const double gi = g[static_cast<std::int64_t>(i) * F + j];
                     gx[static_cast<std::int64_t>(i) * F + j] +=
                         tg2[j] * rstd[j] *
                         (gi - mean_g - xhat[static_cast<std::int64_t>(i) * F + j] * mean_gh);
                   }
                 }
               } else {
                 for (int i = 0; i < N; ++i) {
                   for (int j = 0; j < F; ++j) {
                     gx[static_cast<std::int64_t>(i) * F + j] +=
                         g[static_cast<std::int64_t>(i) * F + j] * tg2[j] * rstd[j];
                   }
                 }
               }
             }
           });
  }
  return o;
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<int> labels) {
  check(logits);
  const Tensor& tl = val(logits.id);
  if (tl.rank() != 2) {
    throw op_error("softmax_cross_entropy", "wants [N,K] logits, got " + tl.shape_str());
  }
  const int N = tl.dim(0), K = tl.dim(1);
  if (static_cast<int>(labels.size()) != N) {
    throw op_error("softmax_cross_entropy", "label count does not match batch");
  }
  Tensor probs({N, K});
  double loss = 0.0;
  for (int i = 0; i < N; ++i) {
    if (labels[i] < 0 || labels[i] >= K) {
      throw op_error("softmax_cross_entropy", "label out of range");
    }
    const double* xp = tl.data() + static_cast<std::int64_t>(i) * K;
    double mx = xp[0];
    for (int j = 1; j < K; ++j) mx = std::max(mx, xp[j]);
    double z = 0.0;
    for (int j = 0; j < K; ++j) z += std::exp(xp[j] - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < K; ++j) {
      probs[static_cast<std::int64_t>(i) * K + j] = std::exp(xp[j] - lse);
    }
    loss += lse - xp[labels[i]];
  }
  loss /= N;
  const bool track = track_of(logits.id);
  Var o = make_node(Tensor::scalar(loss), track);
  if (track) {
    record("softmax_cross_entropy", {logits.id}, o.id,
           [this, logits, o, N, K, labels = std::move(labels), probs = std::move(probs)] {
             const double g = gbuf(o.id)[0] / N;
             Tensor& gl = gbuf(logits.id);
             for (int i = 0; i < N; ++i) {
               for (int j = 0; j < K; ++j) {
                 double p = probs[static_cast<std::int64_t>(i) * K + j];
                 if (j == labels[i]) p -= 1.0;
                 gl[static_cast<std::int64_t>(i) * K + j] += g * p;
               }
             }
           });
  }
  return o;
}

Var Tape::stop_gradient(Var a) {
  check(a);
  Tensor copy = val(a.id);
  copy.requires_grad = false;
  return make_node(std::move(copy), false);
}

}  // namespace uniskel
