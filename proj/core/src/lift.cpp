#include "uniskel/lift.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uniskel {

void init_lift_params(ParamStore& params, const LiftConfig& cfg, Rng& rng) {
  const int h = cfg.hidden;
  params.add("lift.bn.gain", Tensor::full({40}, 1.0));
  params.add("lift.bn.bias", Tensor({40}));
  params.add("lift.fc1.w", xavier_init({40, h}, rng));
  params.add("lift.fc1.b", Tensor({h}));
  params.add("lift.fc2.w", xavier_init({h, h}, rng));
  params.add("lift.fc2.b", Tensor({h}));
  params.add("lift.fc3.w", xavier_init({h, h}, rng));
  params.add("lift.fc3.b", Tensor({h}));
  params.add("lift.fc4.w", xavier_init({h, 60}, rng));
  params.add("lift.fc4.b", Tensor({60}));
}

BatchNormState make_lift_bn_state() {
  BatchNormState bn;
  bn.running_mean = Tensor({40});
  bn.running_var = Tensor::full({40}, 1.0);
  return bn;
}

Var lift_rows(Tape& tape, BoundParams& bound, const LiftConfig& cfg, Var x2d,
              BatchNormState& bn, BatchNormMode mode) {
  const Tensor& tv = tape.value(x2d);
  if (tv.rank() != 3 || tv.dim(1) != 20 || tv.dim(2) != 2) {
    throw std::invalid_argument("lift wants [rows,20,2] input, got " + tv.shape_str());
  }
  const int rows = tv.dim(0);
  Var x = tape.reshape(x2d, {rows, 40});
  x = tape.batch_norm(x, bound["lift.bn.gain"], bound["lift.bn.bias"], bn, mode);
  x = tape.linear(x, bound["lift.fc1.w"], bound["lift.fc1.b"]);
  x = tape.leaky_relu(x, cfg.leaky_slope);
  x = tape.linear(x, bound["lift.fc2.w"], bound["lift.fc2.b"]);
  x = tape.leaky_relu(x, cfg.leaky_slope);
  x = tape.linear(x, bound["lift.fc3.w"], bound["lift.fc3.b"]);
  x = tape.leaky_relu(x, cfg.leaky_slope);
  x = tape.linear(x, bound["lift.fc4.w"], bound["lift.fc4.b"]);
  return tape.reshape(x, {rows, 20, 3});
}

SkeletonSequence lift_sequence(Tape& tape, BoundParams& bound, const LiftConfig& cfg,
                               const SkeletonSequence& s, BatchNormState& bn,
                               BatchNormMode mode) {
  if (s.topology != TopologyId::C20 || s.dims() != 2) {
    throw std::invalid_argument("lift_sequence wants a 2D C20 sequence, got " +
                                topology_name(s.topology) + " with " + std::to_string(s.dims()) +
                                " dims");
  }
  const int rows = s.persons * s.frames;
  Tensor flat({rows, 20, 2});
  std::copy(s.data.data(), s.data.data() + s.data.size(), flat.data());
  Var lifted = lift_rows(tape, bound, cfg, tape.constant(std::move(flat)), bn, mode);
  SkeletonSequence out;
  out.topology = TopologyId::C20;
  out.persons = s.persons;
  out.frames = s.frames;
  out.label = s.label;
  out.data = Tensor({s.persons, s.frames, 20, 3});
  const Tensor& lv = tape.value(lifted);
  std::copy(lv.data(), lv.data() + lv.size(), out.data.data());
  return out;
}

SkeletonSequence normalize_2d(const SkeletonSequence& s) {
  SkeletonSequence out = s;
  double max_abs = 0.0;
  for (std::int64_t i = 0; i < out.data.size(); ++i) {
    max_abs = std::max(max_abs, std::abs(out.data[i]));
  }
  if (max_abs > 0.0) {
    const double inv = 1.0 / max_abs;
    for (std::int64_t i = 0; i < out.data.size(); ++i) out.data[i] *= inv;
  }
  return out;
}

void normalize_rows_2d(Tensor& data, int sequences) {
  if (sequences <= 0 || data.size() % sequences != 0) {
    throw std::invalid_argument("normalize_rows_2d: sequence count does not divide batch");
  }
  const std::int64_t per = data.size() / sequences;
  for (std::int64_t q = 0; q < sequences; ++q) {
    double* base = data.data() + q * per;
    double max_abs = 0.0;
    for (std::int64_t i = 0; i < per; ++i) max_abs = std::max(max_abs, std::abs(base[i]));
    if (max_abs > 0.0) {
      const double inv = 1.0 / max_abs;
      for (std::int64_t i = 0; i < per; ++i) base[i] *= inv;
    }
  }
}

Var rec_loss(Tape& tape, const UnifiedSkeleton& uc, const UnifiedSkeleton& uj) {
  const Tensor& ca = tape.value(uc.data);
  const Tensor& cb = tape.value(uj.data);
  if (!ca.same_shape(cb)) {
    throw std::invalid_argument("rec_loss: unpaired batch, " + ca.shape_str() + " vs " +
                                cb.shape_str());
  }
  const UnifiedSlotMap& map = unified_slot_map();
  std::vector<int> common(map.common_slots.begin(), map.common_slots.end());
  Var a = tape.gather_slots(uc.data, common);
  Var b = tape.gather_slots(tape.stop_gradient(uj.data), common);
  Var d = tape.sub(a, b);
  const double denom = static_cast<double>(ca.dim(0)) * 15.0;
  return tape.scale(tape.sum_all(tape.mul(d, d)), 1.0 / denom);
}

}  // namespace uniskel
