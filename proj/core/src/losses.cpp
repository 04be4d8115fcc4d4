#include "uniskel/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace uniskel {

namespace {

void require_batch(const Tape& tape, Var z, const char* what) {
  const Tensor& t = tape.value(z);
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(what) + " wants [N,D], got " + t.shape_str());
  }
  if (t.dim(0) < 2) {
    throw std::invalid_argument(std::string(what) + ": degenerate batch, needs N >= 2, got N = " +
                                std::to_string(t.dim(0)));
  }
}

}  // namespace

Var mse(Tape& tape, Var a, Var b) {
  Var d = tape.sub(a, b);
  return tape.mean_all(tape.mul(d, d));
}

ConsistencyTerms consistency_loss(Tape& tape, const std::vector<std::pair<Var, Var>>& pairs,
                                  const LossConfig& cfg) {
  if (pairs.empty()) {
    throw std::invalid_argument("consistency_loss needs at least one stream");
  }
  ConsistencyTerms out;
  Var total;
  auto accumulate = [&](Var term) {
    total = total.valid() ? tape.add(total, term) : term;
  };
  for (const auto& [z, z_fused] : pairs) {
    accumulate(mse(tape, z, z_fused));
    out.fused_terms += 1;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      Var term = mse(tape, pairs[i].first, pairs[j].first);
      if (cfg.ordered_pairs) term = tape.scale(term, 2.0);
      accumulate(term);
      out.cross_terms += cfg.ordered_pairs ? 2 : 1;
    }
  }
  out.value = total;
  return out;
}

Var variance_term(Tape& tape, Var z, const LossConfig& cfg) {
  require_batch(tape, z, "variance_term");
  const int n = tape.value(z).dim(0);
  Var centered = tape.sub_row(z, tape.col_mean(z));
  Var var = tape.scale(tape.col_sum(tape.mul(centered, centered)), 1.0 / (n - 1));
  Var hinge;
  if (cfg.epsilon_inside_sqrt) {
    Var std_dev = tape.sqrt_guarded(tape.add_scalar(var, cfg.epsilon));
    hinge = tape.relu(tape.rsub_scalar(cfg.gamma, std_dev));
  } else {
    // as written: eps added after the square root
    Var std_dev = tape.sqrt_guarded(var);
    hinge = tape.relu(tape.rsub_scalar(cfg.gamma + cfg.epsilon, std_dev));
  }
  return tape.mean_all(hinge);
}

Var covariance_term(Tape& tape, Var z) {
  require_batch(tape, z, "covariance_term");
  const Tensor& t = tape.value(z);
  const int n = t.dim(0), d = t.dim(1);
  Var centered = tape.sub_row(z, tape.col_mean(z));
  Var cov = tape.scale(tape.matmul_tn(centered, centered), 1.0 / (n - 1));
  return tape.scale(tape.sum_offdiag_sq(cov), 1.0 / d);
}

Var vc(Tape& tape, Var z, const LossConfig& cfg) {
  return tape.add(tape.scale(variance_term(tape, z, cfg), cfg.mu), covariance_term(tape, z));
}

Var vc_loss(Tape& tape, const std::vector<Var>& zs, const LossConfig& cfg) {
  if (zs.empty()) throw std::invalid_argument("vc_loss needs at least one projected set");
  Var total;
  for (Var z : zs) {
    Var term = vc(tape, z, cfg);
    total = total.valid() ? tape.add(total, term) : term;
  }
  return total;
}

Var total_loss(Tape& tape, Var l_con, Var l_reg, Var l_rec, const LossConfig& cfg) {
  auto check_finite = [&](Var v, const char* name) {
    if (v.valid() && !std::isfinite(tape.value(v).item())) {
      throw std::runtime_error(std::string("total_loss: non-finite component ") + name);
    }
  };
  check_finite(l_con, "L_con");
  check_finite(l_reg, "L_reg");
  check_finite(l_rec, "L_rec");
  Var total;
  auto accumulate = [&](Var term) {
    if (!term.valid()) return;
    total = total.valid() ? tape.add(total, term) : term;
  };
  if (l_con.valid()) accumulate(tape.scale(l_con, cfg.lambda));
  accumulate(l_reg);
  accumulate(l_rec);
  if (!total.valid()) {
    throw std::invalid_argument("total_loss: all components absent");
  }
  return total;
}

}  // namespace uniskel
