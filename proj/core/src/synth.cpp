#include "uniskel/synth.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "uniskel/rng.hpp"

namespace uniskel {

namespace {

constexpr double kTau = 2.0 * M_PI;

// (c17 joint, j25 joint) pairs for the 12 directly projected limb joints.
constexpr int kLimbPairs[12][2] = {
    {c17::l_shoulder, j25::l_shoulder}, {c17::r_shoulder, j25::r_shoulder},
    {c17::l_elbow, j25::l_elbow},       {c17::r_elbow, j25::r_elbow},
    {c17::l_wrist, j25::l_wrist},       {c17::r_wrist, j25::r_wrist},
    {c17::l_hip, j25::l_hip},           {c17::r_hip, j25::r_hip},
    {c17::l_knee, j25::l_knee},         {c17::r_knee, j25::r_knee},
    {c17::l_ankle, j25::l_ankle},       {c17::r_ankle, j25::r_ankle}};

// facial offsets from the projected head, in units of head-neck distance
constexpr double kFacialOffsets[5][2] = {
    {0.00, -0.12},   // nose
    {+0.12, +0.06},  // l_eye
    {-0.12, +0.06},  // r_eye
    {+0.22, -0.02},  // l_ear
    {-0.22, -0.02},  // r_ear
};

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

void GeneratorConfig::validate() const {
  if (classes < 2) throw std::invalid_argument("generator needs at least 2 classes");
  if (samples_per_class < 1) throw std::invalid_argument("generator needs samples per class >= 1");
  if (frames < 8) throw std::invalid_argument("generator needs at least 8 frames");
  if (persons != 1 && persons != 2) throw std::invalid_argument("generator supports 1 or 2 persons");
  if (noise_std < 0.0) throw std::invalid_argument("noise std must be non-negative");
  if (camera.distance <= 0.0 || camera.focal <= 0.0) {
    throw std::invalid_argument("camera focal length and distance must be positive");
  }
}

const Tensor& body_template25() {
  static const Tensor body = [] {
    Tensor t({25, 3});
    auto set = [&](int j, double x, double y, double z) {
      t[static_cast<std::int64_t>(j) * 3 + 0] = x;
      t[static_cast<std::int64_t>(j) * 3 + 1] = y;
      t[static_cast<std::int64_t>(j) * 3 + 2] = z;
    };
    set(j25::base_of_spine, 0.00, 0.000, 0.00);
    set(j25::middle_of_spine, 0.00, 0.225, 0.00);
    set(j25::neck, 0.00, 0.550, 0.00);
    set(j25::head, 0.00, 0.700, 0.00);
    set(j25::l_shoulder, 0.20, 0.450, 0.00);
    set(j25::l_elbow, 0.48, 0.450, 0.00);
    set(j25::l_wrist, 0.74, 0.450, 0.00);
    set(j25::l_hand, 0.82, 0.450, 0.00);
    set(j25::r_shoulder, -0.20, 0.450, 0.00);
    set(j25::r_elbow, -0.48, 0.450, 0.00);
    set(j25::r_wrist, -0.74, 0.450, 0.00);
    set(j25::r_hand, -0.82, 0.450, 0.00);
    set(j25::l_hip, 0.12, 0.000, 0.00);
    set(j25::l_knee, 0.14, -0.450, 0.00);
    set(j25::l_ankle, 0.15, -0.850, 0.00);
    set(j25::l_foot, 0.16, -0.900, 0.12);
    set(j25::r_hip, -0.12, 0.000, 0.00);
    set(j25::r_knee, -0.14, -0.450, 0.00);
    set(j25::r_ankle, -0.15, -0.850, 0.00);
    set(j25::r_foot, -0.16, -0.900, 0.12);
    set(j25::spine, 0.00, 0.450, 0.00);
    set(j25::l_hand_tip, 0.88, 0.450, 0.00);
    set(j25::l_thumb, 0.84, 0.420, 0.04);
    set(j25::r_hand_tip, -0.88, 0.450, 0.00);
    set(j25::r_thumb, -0.84, 0.420, 0.04);
    return t;
  }();
  return body;
}

Tensor class_pose(const GeneratorConfig& cfg, int k, double s) {
  if (k < 0 || k >= cfg.classes) throw std::invalid_argument("class index out of range");
  Tensor pose = body_template25();
  const int pattern = k % 4;
  const double freq = 1.0 + 0.35 * k;
  const double angle = kTau * freq * s;
  auto shift = [&](int j, double dx, double dy, double dz) {
    pose[static_cast<std::int64_t>(j) * 3 + 0] += dx;
    pose[static_cast<std::int64_t>(j) * 3 + 1] += dy;
    pose[static_cast<std::int64_t>(j) * 3 + 2] += dz;
  };
  const double sn = std::sin(angle);
  const double w = 0.5 * (1.0 - std::cos(angle));
  switch (pattern) {
    case 0:  // right-arm wave
      shift(j25::r_elbow, 0.0, 0.08 * sn, 0.0);
      shift(j25::r_wrist, 0.06 * std::cos(angle), 0.20 * sn, 0.0);
      shift(j25::r_hand, 0.06 * std::cos(angle), 0.24 * sn, 0.0);
      shift(j25::r_hand_tip, 0.07 * std::cos(angle), 0.26 * sn, 0.0);
      shift(j25::r_thumb, 0.06 * std::cos(angle), 0.24 * sn, 0.0);
      break;
    case 1:  // squat bounce
      for (int j = 0; j < 25; ++j) shift(j, 0.0, -0.14 * w, 0.0);
      shift(j25::l_knee, 0.0, 0.04 * w, 0.10 * w);
      shift(j25::r_knee, 0.0, 0.04 * w, 0.10 * w);
      break;
    case 2:  // left kick
      shift(j25::l_knee, 0.0, 0.06 * w, 0.15 * w);
      shift(j25::l_ankle, 0.0, 0.12 * w, 0.30 * w);
      shift(j25::l_foot, 0.0, 0.12 * w, 0.34 * w);
      break;
    case 3:  // head sway
      shift(j25::head, 0.12 * sn, 0.0, 0.0);
      shift(j25::neck, 0.09 * sn, 0.0, 0.0);
      shift(j25::spine, 0.04 * sn, 0.0, 0.0);
      shift(j25::l_shoulder, 0.05 * sn, 0.0, 0.0);
      shift(j25::r_shoulder, 0.05 * sn, 0.0, 0.0);
      break;
    default: break;
  }
  return pose;
}

double sample_phase(const GeneratorConfig& cfg, int sample_index) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(sample_index)));
  return rng.uniform01();
}

std::array<double, 2> project_point(const std::array<double, 3>& world, const Camera& cam) {
  const double depth = world[2] + cam.distance;
  if (depth <= 0.0) {
    throw std::runtime_error("projection error: point at depth " + std::to_string(depth) +
                             " is behind the camera");
  }
  return {cam.focal * world[0] / depth, cam.focal * world[1] / depth};
}

SkeletonSequence project_to_2d(const SkeletonSequence& s, const Camera& cam, bool normalize) {
  if (s.topology != TopologyId::J25 || s.dims() != 3) {
    throw std::invalid_argument("project_to_2d wants a 3D J25 sequence");
  }
  SkeletonSequence out;
  out.topology = TopologyId::C17;
  out.persons = s.persons;
  out.frames = s.frames;
  out.label = s.label;
  out.data = Tensor({s.persons, s.frames, 17, 2});
  const std::int64_t cells = static_cast<std::int64_t>(s.persons) * s.frames;
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const double* src = s.data.data() + cell * 25 * 3;
    double* dst = out.data.data() + cell * 17 * 2;
    auto joint3 = [&](int j) {
      return std::array<double, 3>{src[j * 3 + 0], src[j * 3 + 1], src[j * 3 + 2]};
    };
    for (const auto& [cj, jj] : kLimbPairs) {
      const auto p = project_point(joint3(jj), cam);
      dst[cj * 2 + 0] = p[0];
      dst[cj * 2 + 1] = p[1];
    }
    const auto head = project_point(joint3(j25::head), cam);
    const auto neck = project_point(joint3(j25::neck), cam);
    const double hn = std::hypot(head[0] - neck[0], head[1] - neck[1]);
    for (int f = 0; f < 5; ++f) {
      dst[f * 2 + 0] = head[0] + kFacialOffsets[f][0] * hn;
      dst[f * 2 + 1] = head[1] + kFacialOffsets[f][1] * hn;
    }
  }
  if (normalize) {
    double max_abs = 0.0;
    for (std::int64_t i = 0; i < out.data.size(); ++i) {
      max_abs = std::max(max_abs, std::abs(out.data[i]));
    }
    if (max_abs > 0.0) {
      const double inv = 1.0 / max_abs;
      for (std::int64_t i = 0; i < out.data.size(); ++i) out.data[i] *= inv;
    }
  }
  return out;
}

PairedDataset generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const int n = cfg.classes * cfg.samples_per_class;
  const int m = cfg.persons, t = cfg.frames;
  PairedDataset d;
  d.samples = n;
  d.persons = m;
  d.frames = t;
  d.j25 = Tensor({n, m, t, 25, 3});
  d.c17 = Tensor({n, m, t, 17, 2});
  d.labels.resize(static_cast<std::size_t>(n));

  for (int idx = 0; idx < n; ++idx) {
    const int k = idx / cfg.samples_per_class;
    d.labels[static_cast<std::size_t>(idx)] = k;
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(idx)));
    const double phase = rng.uniform01();

    SkeletonSequence seq;
    seq.topology = TopologyId::J25;
    seq.persons = m;
    seq.frames = t;
    seq.label = k;
    seq.data = Tensor({m, t, 25, 3});
    for (int p = 0; p < m; ++p) {
      const double x_off = m == 1 ? 0.0 : (p == 0 ? -0.45 : 0.45);
      for (int f = 0; f < t; ++f) {
        const double time01 = static_cast<double>(f) / t;
        Tensor pose = class_pose(cfg, k, time01 + phase);
        double* dst = seq.data.data() + (static_cast<std::int64_t>(p) * t + f) * 25 * 3;
        for (int j = 0; j < 25; ++j) {
          double x = pose[static_cast<std::int64_t>(j) * 3 + 0] + x_off;
          double y = pose[static_cast<std::int64_t>(j) * 3 + 1];
          double z = pose[static_cast<std::int64_t>(j) * 3 + 2];
          if (cfg.noise_std > 0.0) {
            x += rng.normal(0.0, cfg.noise_std);
            y += rng.normal(0.0, cfg.noise_std);
            z += rng.normal(0.0, cfg.noise_std);
          }
          // float32 grid so disk round trips are bitwise
          dst[j * 3 + 0] = f32(x);
          dst[j * 3 + 1] = f32(y);
          dst[j * 3 + 2] = f32(z);
        }
      }
    }
    SkeletonSequence proj = project_to_2d(seq, cfg.camera, /*normalize=*/true);
    for (std::int64_t i = 0; i < proj.data.size(); ++i) proj.data[i] = f32(proj.data[i]);

    std::memcpy(d.j25.data() + static_cast<std::int64_t>(idx) * seq.data.size(), seq.data.data(),
                static_cast<std::size_t>(seq.data.size()) * sizeof(double));
    std::memcpy(d.c17.data() + static_cast<std::int64_t>(idx) * proj.data.size(),
                proj.data.data(), static_cast<std::size_t>(proj.data.size()) * sizeof(double));
  }
  d.validate();
  return d;
}

}  // namespace uniskel
