#pragma once

#include <vector>

#include "uniskel/params.hpp"
#include "uniskel/tape.hpp"
#include "uniskel/topology.hpp"

namespace uniskel {

/// Shared spatio-temporal encoder dimensions. The defaults are the desk
/// preset; hidden = 1024 reproduces the full-scale backbone width.
struct EncoderConfig {
  int d_model = 32;
  int ffn_hidden = 64;
  int spatial_layers = 1;
  int temporal_layers = 1;
  int feature_dim = 64;       // D
  int projector_hidden = 64;
  int max_frames = 16;        // temporal position table size
};

/// Row bookkeeping for batched stream tensors: rows are (sample, person,
/// frame) flattened sample-major.
struct BatchMeta {
  int samples = 1;
  int persons = 1;
  int frames = 0;
  int rows() const { return samples * persons * frames; }
};

void init_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng);

/// Per-joint linear embedding with stream-specific weights plus learned
/// spatial (per-slot) and temporal (per-frame) offsets shared by all
/// streams: [rows,30,3] -> [rows,30,d_model].
Var embed_stream(Tape& tape, BoundParams& bound, const EncoderConfig& cfg, Var u,
                 StreamId stream, const BatchMeta& meta);

/// Arithmetic mean of the present stream embeddings through one learnable
/// linear map.
Var early_fusion(Tape& tape, BoundParams& bound, const std::vector<Var>& embeddings);

/// Spatial attention over the 30 slots per frame, temporal attention over
/// frames per slot, mean-pool over persons/frames/slots, then a linear map
/// to the feature dimension: [rows,30,d_model] -> [samples,D].
Var encode(Tape& tape, BoundParams& bound, const EncoderConfig& cfg, Var h,
           const BatchMeta& meta);

/// Stream-specific two-layer projector.
Var project(Tape& tape, BoundParams& bound, Var y, StreamId stream);

/// Resets a stream's projector to the identity map (square widths only).
void set_projector_identity(ParamStore& params, StreamId stream);

}  // namespace uniskel
