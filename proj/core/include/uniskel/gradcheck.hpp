#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uniskel/tape.hpp"
#include "uniskel/tensor.hpp"

namespace uniskel {

/// Scalar-valued expression builder: given a fresh tape and leaves for the
/// supplied inputs (in order), returns the scalar output node.
using GradFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares reverse-mode gradients against central finite differences.
/// Returns the max over all input entries of
///   |analytic - numeric| / max(1, |analytic|).
double gradient_check(const GradFn& f, const std::vector<Tensor>& inputs, double h = 1e-4);

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

/// Finite-difference suites over every tape primitive plus the full model
/// objective on toy shapes. Results carry per-suite thresholds; `seed`
/// drives all random inputs.
std::vector<GradCheckCase> run_gradcheck_suites(std::uint64_t seed = 0);

}  // namespace uniskel
