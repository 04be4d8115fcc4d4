#pragma once

#include <array>
#include <cstdint>

#include "uniskel/dataset.hpp"
#include "uniskel/topology.hpp"

namespace uniskel {

/// Pinhole camera on the z axis: a world point (x, y, z) sits at depth
/// z + distance in camera coordinates.
struct Camera {
  double focal = 1.2;
  double distance = 3.0;
};

struct GeneratorConfig {
  int classes = 4;
  int samples_per_class = 128;
  int frames = 16;
  int persons = 1;
  double noise_std = 0.01;  // meters, added to the 3D stream
  Camera camera;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Neutral 25-joint body, meters, spine base at the origin, y up, facing
/// the camera (+z toward it).
const Tensor& body_template25();

/// Pose of one person of class `k` at continuous time `s` (one unit of s is
/// the nominal sequence duration). Each class is a distinct oscillation
/// family over a subset of joints, so a phase offset is exactly a time
/// shift.
Tensor class_pose(const GeneratorConfig& cfg, int k, double s);

/// Phase drawn for a sample; exposed so the time-shift property is
/// verifiable from outside the generator.
double sample_phase(const GeneratorConfig& cfg, int sample_index);

/// Paired, labeled synthetic dataset: class-major sample order, the 2D
/// stream is the exact perspective projection of the (noisy) 3D stream,
/// and all stored values are float32-representable.
PairedDataset generate(const GeneratorConfig& cfg);

/// Projects one camera-frame point; throws if the point is not strictly in
/// front of the camera.
std::array<double, 2> project_point(const std::array<double, 3>& world, const Camera& cam);

/// Perspective projection of a J25 3D sequence into a C17 2D sequence: the
/// 12 limb joints project directly, the 5 facial joints are synthesized at
/// fixed offsets from the projected head, scaled by the projected head-neck
/// distance. `normalize` scales each sequence into [-1,1].
SkeletonSequence project_to_2d(const SkeletonSequence& s, const Camera& cam,
                               bool normalize = true);

}  // namespace uniskel
