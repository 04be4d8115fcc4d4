#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uniskel/params.hpp"
#include "uniskel/tape.hpp"
#include "uniskel/topology.hpp"

namespace uniskel {

/// The seven motion-direction words, in canonical order. Axis conventions:
/// x uses right/left, y uses up/down, z uses front/back; a zero difference
/// (and the first frame) maps to unmove.
enum class Direction { right = 0, left, up, down, front, back, unmove };
inline constexpr int kNumDirections = 7;
const std::array<std::string, kNumDirections>& direction_words();

/// Word embeddings for the seven directions, either loaded from a JSON file
/// produced by an external text encoder or generated as a deterministic
/// unit-norm fallback.
struct SemanticTable {
  Tensor embeddings;  // [7, dim]
  std::string source; // "file:<path>" or "fallback:<seed>"
  int dim() const { return embeddings.dim(1); }
};

/// File format: {"dim": l, "words": [...7 words...], "vectors": [[l floats] x 7]}.
SemanticTable load_embedding_file(const std::string& path);
SemanticTable fallback_embeddings(std::uint64_t seed, int dim = 512);

/// Registers the trainable reduction map (dim -> 1).
void init_reducer_params(ParamStore& params, int dim, Rng& rng);

/// Applies the reducer to every word embedding: returns the 7 scalars.
Var reduce_embeddings(Tape& tape, BoundParams& bound, const SemanticTable& table);

/// Direction-word index per (cell, frame, joint, axis) entry. `data` is
/// [cells, frames, joints, 3]; coordinates are quantized to 1e-6 before the
/// frame difference so "no motion" is well defined. Frame 0 has no
/// predecessor and maps to unmove.
std::vector<int> motion_word_indices(const Tensor& data);

/// Semantic motion encoding as a differentiable gather of the reduced
/// scalars: output [cells*frames, joints, 3] whose entries all equal one of
/// the 7 current reduced values.
Var encode_motion(Tape& tape, const Tensor& data, Var reduced);

/// Scatters a 25-joint semantic motion encoding into unified slots and
/// fills the facial band from the semantic prompt.
UnifiedSkeleton prompt_semantic(Tape& tape, Var sem_rows, Var prompt_s, int samples, int persons,
                                int frames);

}  // namespace uniskel
