#pragma once

#include "uniskel/params.hpp"
#include "uniskel/tape.hpp"
#include "uniskel/topology.hpp"

namespace uniskel {

/// The 2D-to-3D regressor: batch norm on the 40-wide input, then four fully
/// connected layers (40 -> hidden -> hidden -> hidden -> 60) with LeakyReLU
/// between them. Applied per frame and person, no temporal context.
struct LiftConfig {
  int hidden = 32;  // 256 reproduces the full-scale depth/width
  double leaky_slope = 0.01;
};

void init_lift_params(ParamStore& params, const LiftConfig& cfg, Rng& rng);
BatchNormState make_lift_bn_state();

/// x2d: [rows, 20, 2] normalized coordinates; returns [rows, 20, 3].
Var lift_rows(Tape& tape, BoundParams& bound, const LiftConfig& cfg, Var x2d,
              BatchNormState& bn, BatchNormMode mode);

/// Per-frame lifting of a whole C20 sequence (inference helper).
SkeletonSequence lift_sequence(Tape& tape, BoundParams& bound, const LiftConfig& cfg,
                               const SkeletonSequence& s, BatchNormState& bn, BatchNormMode mode);

/// Scales all coordinates of a sequence into [-1,1] by its max absolute
/// value (identity for an all-zero sequence).
SkeletonSequence normalize_2d(const SkeletonSequence& s);
/// Same, applied in place to `sequences` contiguous equal-size chunks.
void normalize_rows_2d(Tensor& data, int sequences);

/// Mean over the common band of the squared distance between the two
/// prompted unified skeletons: (1/|B|) sum_i ||u_i^C - u_i^J||^2 averaged
/// over rows. Gradients flow into the C branch only; the J branch is the
/// regression target.
Var rec_loss(Tape& tape, const UnifiedSkeleton& uc, const UnifiedSkeleton& uj);

}  // namespace uniskel
