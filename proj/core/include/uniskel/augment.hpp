#pragma once

#include <cstdint>

#include "uniskel/rng.hpp"
#include "uniskel/topology.hpp"

namespace uniskel {

/// One parameter draw, applied identically to every stream of a sample.
/// The seed drives the crop offset (shared across streams) and the noise
/// realizations (decorrelated per stream).
struct AugmentationParams {
  double crop_ratio = 1.0;  // fraction of frames kept before resampling
  double angle = 0.0;       // radians: yaw for 3D streams, in-plane for 2D
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

struct AugmentationRanges {
  double crop_min = 0.6;           // crop ratio drawn from [crop_min, 1]
  double rotation_max = 0.2617993877991494;  // radians (15 degrees)
  double noise_std = 0.01;
};

AugmentationParams draw_augmentation(const AugmentationRanges& ranges, Rng& rng);

/// Temporal crop (window of at least 8 frames) followed by linear
/// resampling to `target_frames`, rotation about the vertical axis (3D) or
/// in the image plane (2D) around the sequence centroid, and additive
/// coordinate noise. Identity parameters reproduce the input bit for bit
/// when target_frames matches.
SkeletonSequence augment(const SkeletonSequence& s, const AugmentationParams& params,
                         int target_frames);

}  // namespace uniskel
