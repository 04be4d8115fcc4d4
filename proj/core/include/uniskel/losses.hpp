#pragma once

#include <utility>
#include <vector>

#include "uniskel/tape.hpp"

namespace uniskel {

/// Objective weights. `epsilon_inside_sqrt = false` keeps the variance
/// stabilizer outside the square root, i.e. max(0, gamma - sqrt(Var) + eps);
/// true selects the sqrt(Var + eps) variant for comparison.
struct LossConfig {
  double lambda = 1.0;  // consistency weight in the total objective
  double mu = 1.0;      // variance-term weight inside VC
  double gamma = 1.0;   // variance threshold
  double epsilon = 1e-4;
  bool epsilon_inside_sqrt = false;
  bool ordered_pairs = false;  // count MSE(Z_i,Z_j) for ordered pairs (doubles the sum)
};

/// Mean over all entries of the squared difference.
Var mse(Tape& tape, Var a, Var b);

struct ConsistencyTerms {
  Var value;
  int fused_terms = 0;  // MSE(Z_i, Z'_i) count
  int cross_terms = 0;  // MSE(Z_i, Z_j) count
};

/// Sum of MSE(Z_i, Z'_i) over streams plus MSE(Z_i, Z_j) over stream pairs
/// (unordered by default). `pairs[i]` is (Z_i, Z'_i).
ConsistencyTerms consistency_loss(Tape& tape, const std::vector<std::pair<Var, Var>>& pairs,
                                  const LossConfig& cfg);

/// Hinge on the per-column standard deviation: (1/D) sum_j max(0, gamma -
/// sqrt(Var(Z_:,j)) + eps), sample variance with divisor N-1.
Var variance_term(Tape& tape, Var z, const LossConfig& cfg);

/// Squared off-diagonal entries of the column covariance (divisor N-1),
/// scaled by 1/D.
Var covariance_term(Tape& tape, Var z);

/// VC(Z) = mu * V(Z) + C(Z).
Var vc(Tape& tape, Var z, const LossConfig& cfg);

/// Sum of VC over all projected sets (each stream's Z and Z').
Var vc_loss(Tape& tape, const std::vector<Var>& zs, const LossConfig& cfg);

/// lambda * L_con + L_reg + L_rec. Invalid handles stand for absent terms;
/// a non-finite component aborts, naming the component.
Var total_loss(Tape& tape, Var l_con, Var l_reg, Var l_rec, const LossConfig& cfg);

}  // namespace uniskel
