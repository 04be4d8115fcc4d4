#include "uniskel/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace uniskel {

namespace {

double eval_forward(const GradFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    Tensor copy = t;
    copy.requires_grad = false;
    vars.push_back(tape.leaf(std::move(copy)));
  }
  return tape.value(f(tape, vars)).item();
}

}  // namespace

double gradient_check(const GradFn& f, const std::vector<Tensor>& inputs, double h) {
  if (h <= 0.0) throw std::invalid_argument("gradient_check: h must be positive");

  // Analytic pass.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    Tensor copy = t;
    copy.requires_grad = true;
    vars.push_back(tape.leaf(std::move(copy)));
  }
  Var out = f(tape, vars);
  if (tape.value(out).size() != 1) {
    throw std::invalid_argument("gradient_check: expression must be scalar-valued");
  }
  tape.backward(out);

  double max_rel = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Tensor& analytic = tape.grad(vars[i]);
    for (std::int64_t j = 0; j < probe[i].size(); ++j) {
      const double saved = probe[i][j];
      probe[i][j] = saved + h;
      const double up = eval_forward(f, probe);
      probe[i][j] = saved - h;
      const double down = eval_forward(f, probe);
      probe[i][j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[j];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace uniskel
