#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uniskel/augment.hpp"
#include "uniskel/losses.hpp"
#include "uniskel/model.hpp"
#include "uniskel/synth.hpp"

namespace uniskel {

struct DataSettings {
  std::string source = "synthetic";  // "synthetic" or "files"
  std::string train_3d, train_2d, test_3d, test_2d;
};

struct GeneratorSettings {
  int classes = 4;
  int train_per_class = 128;
  int test_per_class = 64;
  int frames = 16;
  int persons = 1;
  double noise_std = 0.01;
  double focal = 1.2;
  double distance = 3.0;
  std::uint64_t seed = 0;
};

struct SemanticSettings {
  std::string embeddings;  // JSON path; empty selects the seeded fallback
  int fallback_dim = 512;
  std::uint64_t fallback_seed = 0;
};

struct ModelSettings {
  int d_model = 32;
  int ffn_hidden = 64;
  int spatial_layers = 1;
  int temporal_layers = 1;
  int feature_dim = 64;
  int projector_hidden = 64;
  int lift_hidden = 32;
};

struct AugmentSettings {
  double crop_min = 0.6;
  double rotation_max_deg = 15.0;
  double noise_std = 0.01;
};

struct TrainSettings {
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string streams = "JCS";
};

struct ProbeSettings {
  int epochs = 100;
  double lr = 0.01;
};

struct SemiSettings {
  double fraction = 0.1;
  int epochs = 20;
  double lr = 5e-4;
};

/// Full run description. Round trips through the flat `key = value` text
/// format losslessly; unknown keys are rejected on parse.
struct RunConfig {
  DataSettings data;
  GeneratorSettings generator;
  SemanticSettings semantic;
  ModelSettings model;
  LossConfig loss;
  AugmentSettings augment;
  TrainSettings train;
  ProbeSettings probe;
  SemiSettings semi;

  void validate() const;
  std::string to_text() const;
  /// FNV-1a over the canonical text, as 16 hex digits.
  std::string hash() const;

  GeneratorConfig train_generator() const;
  GeneratorConfig test_generator() const;
  AugmentationRanges augment_ranges() const;
  ModelConfig model_config() const;
  StreamSet stream_set() const;

  /// "section.key=value"; unknown keys are rejected.
  void apply_override(const std::string& assignment);

  static RunConfig parse_text(const std::string& text);
  static RunConfig load_file(const std::string& path);
};

}  // namespace uniskel
