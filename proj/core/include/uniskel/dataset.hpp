#pragma once

#include <string>
#include <vector>

#include "uniskel/topology.hpp"

namespace uniskel {

/// Paired motion data: the 3D 25-joint stream and its 2D 17-joint
/// counterpart, index-aligned, with one label per sample.
struct PairedDataset {
  Tensor j25;  // [samples, persons, frames, 25, 3]
  Tensor c17;  // [samples, persons, frames, 17, 2]
  std::vector<int> labels;
  int samples = 0;
  int persons = 0;
  int frames = 0;

  SkeletonSequence sequence_j25(int index) const;
  SkeletonSequence sequence_c17(int index) const;
  void validate() const;
};

/// One stream as stored on disk.
struct HsklFile {
  TopologyId topology = TopologyId::J25;
  Tensor data;  // [samples, persons, frames, joints, dims]
  std::vector<int> labels;
};

/// HSKL container (all fields little-endian):
///   "HSKL" magic, u32 version, u32 topology id,
///   u32 samples, persons, frames, joints, dims,
///   i32 labels[samples],
///   f32 payload[samples*persons*frames*joints*dims] sample-major.
void write_hskl(const std::string& path, TopologyId topology, const Tensor& data,
                const std::vector<int>& labels);
HsklFile read_hskl(const std::string& path);

PairedDataset load_paired(const std::string& path_3d, const std::string& path_2d);

}  // namespace uniskel
