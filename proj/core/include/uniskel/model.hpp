#pragma once

#include <string>
#include <vector>

#include "uniskel/encoder.hpp"
#include "uniskel/lift.hpp"
#include "uniskel/losses.hpp"
#include "uniskel/semantic.hpp"
#include "uniskel/topology.hpp"

namespace uniskel {

struct ModelConfig {
  EncoderConfig encoder;
  LiftConfig lift;
  std::uint64_t init_seed = 0;
};

/// Which skeleton streams participate in a run.
struct StreamSet {
  bool j = true;
  bool c = true;
  bool s = true;
  int count() const { return (j ? 1 : 0) + (c ? 1 : 0) + (s ? 1 : 0); }
  bool has(StreamId id) const;
  static StreamSet parse(const std::string& text);  // e.g. "JCS", "JC", "S"
  std::string str() const;
};

/// Every trainable parameter (prompts, lifter, reducer, embedders, fusion,
/// encoder, projectors), the lift batch-norm buffers, and the semantic
/// embedding table.
struct Model {
  ModelConfig cfg;
  SemanticTable semantic;
  ParamStore params;
  BatchNormState lift_bn;
};

Model make_model(const ModelConfig& cfg, SemanticTable table);

/// Assembled mini-batch of raw streams. Cell rows are (sample, person)
/// pairs, sample-major; the 2D stream is spine-interpolated and normalized.
struct RawBatch {
  Tensor j25;     // [samples*persons, frames, 25, 3]
  Tensor c20_2d;  // [samples*persons, frames, 20, 2]
  std::vector<int> labels;
  BatchMeta meta;
};

struct StreamOutputs {
  Var y;        // encoder feature of the stream
  Var z;        // projector_i(y_i)
  Var z_fused;  // projector_i(y_F)
};

struct ForwardResult {
  BatchMeta meta;
  UnifiedSkeleton u_j, u_c, u_s;
  Var y_fused;
  StreamOutputs j, c, s;
  Var l_con, l_reg, l_rec;
  Var loss;
  int consistency_fused_terms = 0;
  int consistency_cross_terms = 0;
};

struct ForwardOptions {
  StreamSet streams;
  LossConfig loss;
  BatchNormMode mode = BatchNormMode::train;
  bool with_losses = true;
};

/// Full pipeline on one tape: unify the present streams, embed, fuse,
/// encode all of them with the shared encoder, project, and (optionally)
/// evaluate the training objective. The 3D pose estimation loss is active
/// whenever the C branch runs (its target is built from the raw 25-joint
/// stream and treated as a constant).
ForwardResult model_forward(Tape& tape, Model& model, BoundParams& bound, const RawBatch& batch,
                            const ForwardOptions& options);

}  // namespace uniskel
