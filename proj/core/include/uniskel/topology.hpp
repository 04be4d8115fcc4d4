#pragma once

#include <array>
#include <string>
#include <vector>

#include "uniskel/tape.hpp"
#include "uniskel/tensor.hpp"

namespace uniskel {

/// Skeleton layouts handled by the pipeline:
///   J25 - depth-sensor skeleton, 25 joints, 3D (Kinect V2 joint order)
///   C17 - video keypoints, 17 joints, 2D (COCO joint order)
///   C20 - C17 plus the three interpolated spine joints, still 2D until lifted
///   U30 - the unified 30-slot skeleton all streams are mapped into
enum class TopologyId { J25, C17, C20, U30 };

struct Topology {
  TopologyId id;
  std::vector<std::string> joint_names;
  int dims;  // coordinate dimensions of the canonical stream
  int joints() const { return static_cast<int>(joint_names.size()); }
};

const Topology& topology(TopologyId id);
std::string topology_name(TopologyId id);
TopologyId topology_from_name(const std::string& name);

// Canonical joint indices (see the tables in topology.cpp).
namespace j25 {
inline constexpr int base_of_spine = 0, middle_of_spine = 1, neck = 2, head = 3;
inline constexpr int l_shoulder = 4, l_elbow = 5, l_wrist = 6, l_hand = 7;
inline constexpr int r_shoulder = 8, r_elbow = 9, r_wrist = 10, r_hand = 11;
inline constexpr int l_hip = 12, l_knee = 13, l_ankle = 14, l_foot = 15;
inline constexpr int r_hip = 16, r_knee = 17, r_ankle = 18, r_foot = 19;
inline constexpr int spine = 20;
inline constexpr int l_hand_tip = 21, l_thumb = 22, r_hand_tip = 23, r_thumb = 24;
}  // namespace j25

namespace c17 {
inline constexpr int nose = 0, l_eye = 1, r_eye = 2, l_ear = 3, r_ear = 4;
inline constexpr int l_shoulder = 5, r_shoulder = 6, l_elbow = 7, r_elbow = 8;
inline constexpr int l_wrist = 9, r_wrist = 10, l_hip = 11, r_hip = 12;
inline constexpr int l_knee = 13, r_knee = 14, l_ankle = 15, r_ankle = 16;
}  // namespace c17

namespace c20 {
inline constexpr int spine = 17, base_of_spine = 18, middle_of_spine = 19;
}  // namespace c20

/// The unified skeleton is split into three slot bands:
///   facial slots 0..4, common slots 5..19, head-hand-foot slots 20..29.
/// C20 covers exactly slots 0..19, J25 exactly slots 5..29, and the common
/// band is their intersection (15 joints).
struct UnifiedSlotMap {
  std::array<int, 25> slot_of_j25;
  std::array<int, 20> slot_of_c20;
  std::array<int, 15> common_slots;  // the band 5..19
  std::array<std::string, 30> slot_names;
};

const UnifiedSlotMap& unified_slot_map();

enum class StreamId { J, C, S };
std::string stream_name(StreamId s);

/// Raw motion data for one sample of one stream.
struct SkeletonSequence {
  TopologyId topology = TopologyId::J25;
  int persons = 1;
  int frames = 0;
  Tensor data;  // [persons, frames, joints, dims]
  int label = -1;

  int joints() const { return data.rank() == 4 ? data.dim(2) : 0; }
  int dims() const { return data.rank() == 4 ? data.dim(3) : 0; }
  void validate() const;
};

/// Appends the three spine joints to a C17 sequence (per frame and person):
/// spine = midpoint of the shoulders, base = midpoint of the hips, middle =
/// midpoint of those two. The original 17 joints are untouched.
SkeletonSequence interpolate_spine(const SkeletonSequence& s);

/// A 30-slot array with only one stream's joints placed.
struct PartialSlots {
  Tensor data;  // [persons, frames, 30, 3]
  std::array<bool, 30> occupied{};
  int persons = 0;
  int frames = 0;
};

/// Reorders a 3D J25 or (lifted) C20 sequence into unified slots. 2D input
/// is rejected: C20 must be lifted to 3D first.
PartialSlots to_unified_slots(const SkeletonSequence& s);

/// Reads a stream's joints back out of a 30-slot array (inverse of
/// to_unified_slots for the slots that stream occupies).
Tensor read_back_slots(const Tensor& slots_data, TopologyId source);

enum class SlotProvenance { real, interpolated, prompt };

/// A prompted unified skeleton on the tape. Rows are (sample, person,
/// frame) triples flattened in that order.
struct UnifiedSkeleton {
  Var data;  // [rows, 30, 3]
  std::array<SlotProvenance, 30> provenance{};
  int samples = 1;
  int persons = 1;
  int frames = 0;
  int rows() const { return samples * persons * frames; }
};

/// Fills the slots a stream is missing with that stream's trainable prompt,
/// broadcast over every row. The prompt stays differentiable; occupied slots
/// are never overwritten.
UnifiedSkeleton build_prompted_unified(Tape& tape, Var partial,
                                       const std::array<bool, 30>& occupied, Var prompt,
                                       StreamId stream, int samples, int persons, int frames);

/// Convenience overload for raw (off-tape) partial slot data.
UnifiedSkeleton build_prompted_unified(Tape& tape, const PartialSlots& partial, Var prompt,
                                       StreamId stream);

/// Slot-aligned values over the common band, prompt slots excluded.
struct CommonJointPairs {
  Tensor a;  // [rows, 15, 3]
  Tensor b;
};
CommonJointPairs common_joint_pairs(const Tensor& ua, const Tensor& ub);

/// Expected missing-slot list for a stream (what its prompt fills).
std::vector<int> prompt_slots(StreamId stream);

/// Writes the joint tables and slot maps as a JSON reference file.
void write_topology_reference(const std::string& path);

}  // namespace uniskel
