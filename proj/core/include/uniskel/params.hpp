#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "uniskel/rng.hpp"
#include "uniskel/tape.hpp"
#include "uniskel/tensor.hpp"

namespace uniskel {

/// Named trainable tensors in registration order. Order is the canonical
/// iteration order for optimizer updates and serialization.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }
  std::int64_t total_size() const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> index_;
};

/// Binds a ParamStore to one tape for a single forward/backward pass.
/// Each parameter becomes exactly one leaf per tape, so every use of a
/// name shares the same node id (weight sharing is structural).
class BoundParams {
 public:
  BoundParams(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

  Var operator[](const std::string& name);

  bool bound(const std::string& name) const { return vars_.count(name) != 0; }
  Var var_of(const std::string& name) const;

  /// (name, gradient) pairs for every bound parameter, in store order.
  std::vector<std::pair<std::string, const Tensor*>> gradients() const;

 private:
  Tape& tape_;
  ParamStore& store_;
  std::unordered_map<std::string, Var> vars_;
};

// Seeded initializers.
Tensor uniform_init(std::vector<int> shape, double lo, double hi, Rng& rng);
Tensor xavier_init(std::vector<int> shape, Rng& rng);
Tensor identity_matrix(int n);

}  // namespace uniskel
