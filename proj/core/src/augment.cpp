#include "uniskel/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uniskel {

namespace {

constexpr std::uint64_t kCropStream = 0xC407;

Tensor resample_frames(const Tensor& data, int persons, int frames, int joints, int dims,
                       int start, int window, int target) {
  Tensor out({persons, target, joints, dims});
  const int jd = joints * dims;
  for (int p = 0; p < persons; ++p) {
    for (int f = 0; f < target; ++f) {
      const double pos =
          target == 1 ? 0.0
                      : static_cast<double>(f) * (window - 1) / static_cast<double>(target - 1);
      const int lo = static_cast<int>(pos);
      const int hi = std::min(lo + 1, window - 1);
      const double frac = pos - lo;
      const double* a =
          data.data() + (static_cast<std::int64_t>(p) * frames + start + lo) * jd;
      const double* b =
          data.data() + (static_cast<std::int64_t>(p) * frames + start + hi) * jd;
      double* dst = out.data() + (static_cast<std::int64_t>(p) * target + f) * jd;
      if (frac == 0.0) {
        std::copy(a, a + jd, dst);
      } else {
        for (int i = 0; i < jd; ++i) dst[i] = (1.0 - frac) * a[i] + frac * b[i];
      }
    }
  }
  return out;
}

}  // namespace

AugmentationParams draw_augmentation(const AugmentationRanges& ranges, Rng& rng) {
  AugmentationParams p;
  p.crop_ratio = rng.uniform(ranges.crop_min, 1.0);
  p.angle = rng.uniform(-ranges.rotation_max, ranges.rotation_max);
  p.noise_std = ranges.noise_std;
  p.seed = rng.bits();
  return p;
}

SkeletonSequence augment(const SkeletonSequence& s, const AugmentationParams& params,
                         int target_frames) {
  if (params.crop_ratio <= 0.0 || params.crop_ratio > 1.0) {
    throw std::invalid_argument("augment: crop ratio must lie in (0,1]");
  }
  if (target_frames < 2) throw std::invalid_argument("augment: target frame count must be >= 2");
  const int m = s.persons, t = s.frames, joints = s.joints(), dims = s.dims();

  SkeletonSequence out;
  out.topology = s.topology;
  out.persons = m;
  out.label = s.label;
  out.frames = target_frames;

  // temporal crop, never below 8 frames (or the whole clip if shorter)
  const int min_window = std::min(8, t);
  int window = static_cast<int>(std::lround(params.crop_ratio * t));
  window = std::clamp(window, min_window, t);
  int start = 0;
  if (window < t) {
    Rng crop_rng(derive_seed(params.seed, kCropStream));
    start = crop_rng.uniform_int(0, t - window);
  }
  if (window == t && start == 0 && target_frames == t) {
    out.data = s.data;
  } else {
    out.data = resample_frames(s.data, m, t, joints, dims, start, window, target_frames);
  }

  if (params.angle != 0.0) {
    const double c = std::cos(params.angle);
    const double sn = std::sin(params.angle);
    // rotate about the sequence centroid so bodies stay in place
    const int a0 = 0;                  // x
    const int a1 = dims == 3 ? 2 : 1;  // z for 3D (yaw), y for in-plane 2D
    double c0 = 0.0, c1 = 0.0;
    const std::int64_t points = out.data.size() / dims;
    for (std::int64_t i = 0; i < points; ++i) {
      c0 += out.data[i * dims + a0];
      c1 += out.data[i * dims + a1];
    }
    c0 /= static_cast<double>(points);
    c1 /= static_cast<double>(points);
    for (std::int64_t i = 0; i < points; ++i) {
      const double u = out.data[i * dims + a0] - c0;
      const double v = out.data[i * dims + a1] - c1;
      out.data[i * dims + a0] = c0 + c * u + sn * v;
      out.data[i * dims + a1] = c1 - sn * u + c * v;
    }
  }

  if (params.noise_std > 0.0) {
    Rng noise_rng(derive_seed(params.seed, 0x100 + static_cast<std::uint64_t>(s.topology)));
    for (std::int64_t i = 0; i < out.data.size(); ++i) {
      out.data[i] += noise_rng.normal(0.0, params.noise_std);
    }
  }
  return out;
}

}  // namespace uniskel
