#include "uniskel/params.hpp"

#include <cmath>
#include <stdexcept>

namespace uniskel {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) {
    throw std::logic_error("parameter '" + name + "' registered twice");
  }
  order_.push_back(name);
  init.requires_grad = true;
  return index_.emplace(name, std::move(init)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::int64_t ParamStore::total_size() const {
  std::int64_t n = 0;
  for (const auto& name : order_) n += index_.at(name).size();
  return n;
}

Var BoundParams::operator[](const std::string& name) {
  auto it = vars_.find(name);
  if (it != vars_.end()) return it->second;
  Var v = tape_.leaf(store_.get(name));
  vars_.emplace(name, v);
  return v;
}

Var BoundParams::var_of(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("parameter '" + name + "' not bound");
  return it->second;
}

std::vector<std::pair<std::string, const Tensor*>> BoundParams::gradients() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& name : store_.names()) {
    auto it = vars_.find(name);
    if (it == vars_.end()) continue;
    out.emplace_back(name, &tape_.grad(it->second));
  }
  return out;
}

Tensor uniform_init(std::vector<int> shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor xavier_init(std::vector<int> shape, Rng& rng) {
  if (shape.size() != 2) throw std::invalid_argument("xavier_init wants a rank-2 shape");
  const double a = std::sqrt(6.0 / (shape[0] + shape[1]));
  return uniform_init(std::move(shape), -a, a, rng);
}

Tensor identity_matrix(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t[static_cast<std::int64_t>(i) * n + i] = 1.0;
  return t;
}

}  // namespace uniskel
