#include "uniskel/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace uniskel {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": '" + v + "' is not a number");
  }
  if (pos != v.size()) {
    throw std::invalid_argument("config key " + key + ": trailing characters in '" + v + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) {
    throw std::invalid_argument("config key " + key + ": '" + v + "' is not an integer");
  }
  return i;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": '" + v + "' is not an unsigned integer");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key " + key + ": '" + v + "' is not a bool");
}

struct KeyBinding {
  std::string key;  // "section.name"
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define BIND_STR(section, field, member)                                           \
  KeyBinding{#section "." #field, [](const RunConfig& c) { return c.member; },     \
             [](RunConfig& c, const std::string& v) { c.member = v; }}
#define BIND_INT(section, field, member)                                           \
  KeyBinding{#section "." #field,                                                  \
             [](const RunConfig& c) { return std::to_string(c.member); },          \
             [](RunConfig& c, const std::string& v) {                              \
               c.member = parse_int(#section "." #field, v);                       \
             }}
#define BIND_DBL(section, field, member)                                           \
  KeyBinding{#section "." #field, [](const RunConfig& c) { return fmt_double(c.member); }, \
             [](RunConfig& c, const std::string& v) {                              \
               c.member = parse_double(#section "." #field, v);                    \
             }}
#define BIND_U64(section, field, member)                                           \
  KeyBinding{#section "." #field,                                                  \
             [](const RunConfig& c) { return std::to_string(c.member); },          \
             [](RunConfig& c, const std::string& v) {                              \
               c.member = parse_u64(#section "." #field, v);                       \
             }}
#define BIND_BOOL(section, field, member)                                          \
  KeyBinding{#section "." #field,                                                  \
             [](const RunConfig& c) { return c.member ? "true" : "false"; },       \
             [](RunConfig& c, const std::string& v) {                              \
               c.member = parse_bool(#section "." #field, v);                      \
             }}

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> list = {
      BIND_STR(data, source, data.source),
      BIND_STR(data, train_3d, data.train_3d),
      BIND_STR(data, train_2d, data.train_2d),
      BIND_STR(data, test_3d, data.test_3d),
      BIND_STR(data, test_2d, data.test_2d),
      BIND_INT(generator, classes, generator.classes),
      BIND_INT(generator, train_per_class, generator.train_per_class),
      BIND_INT(generator, test_per_class, generator.test_per_class),
      BIND_INT(generator, frames, generator.frames),
      BIND_INT(generator, persons, generator.persons),
      BIND_DBL(generator, noise_std, generator.noise_std),
      BIND_DBL(generator, focal, generator.focal),
      BIND_DBL(generator, distance, generator.distance),
      BIND_U64(generator, seed, generator.seed),
      BIND_STR(semantic, embeddings, semantic.embeddings),
      BIND_INT(semantic, fallback_dim, semantic.fallback_dim),
      BIND_U64(semantic, fallback_seed, semantic.fallback_seed),
      BIND_INT(model, d_model, model.d_model),
      BIND_INT(model, ffn_hidden, model.ffn_hidden),
      BIND_INT(model, spatial_layers, model.spatial_layers),
      BIND_INT(model, temporal_layers, model.temporal_layers),
      BIND_INT(model, feature_dim, model.feature_dim),
      BIND_INT(model, projector_hidden, model.projector_hidden),
      BIND_INT(model, lift_hidden, model.lift_hidden),
      BIND_DBL(loss, lambda, loss.lambda),
      BIND_DBL(loss, mu, loss.mu),
      BIND_DBL(loss, gamma, loss.gamma),
      BIND_DBL(loss, epsilon, loss.epsilon),
      BIND_BOOL(loss, epsilon_inside_sqrt, loss.epsilon_inside_sqrt),
      BIND_BOOL(loss, ordered_pairs, loss.ordered_pairs),
      BIND_DBL(augment, crop_min, augment.crop_min),
      BIND_DBL(augment, rotation_max_deg, augment.rotation_max_deg),
      BIND_DBL(augment, noise_std, augment.noise_std),
      BIND_INT(train, epochs, train.epochs),
      BIND_INT(train, batch_size, train.batch_size),
      BIND_DBL(train, lr, train.lr),
      BIND_U64(train, seed, train.seed),
      BIND_STR(train, streams, train.streams),
      BIND_INT(probe, epochs, probe.epochs),
      BIND_DBL(probe, lr, probe.lr),
      BIND_DBL(semi, fraction, semi.fraction),
      BIND_INT(semi, epochs, semi.epochs),
      BIND_DBL(semi, lr, semi.lr),
  };
  return list;
}

const KeyBinding& find_binding(const std::string& key) {
  for (const KeyBinding& b : bindings()) {
    if (b.key == key) return b;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void RunConfig::validate() const {
  if (data.source != "synthetic" && data.source != "files") {
    throw std::invalid_argument("data.source must be 'synthetic' or 'files'");
  }
  if (data.source == "files" &&
      (data.train_3d.empty() || data.train_2d.empty() || data.test_3d.empty() ||
       data.test_2d.empty())) {
    throw std::invalid_argument("data.source=files needs all four dataset paths");
  }
  train_generator().validate();
  if (train.batch_size < 2) {
    throw std::invalid_argument("train.batch_size must be >= 2 (variance terms need a batch)");
  }
  if (train.epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (train.lr <= 0.0 || probe.lr <= 0.0 || semi.lr <= 0.0) {
    throw std::invalid_argument("learning rates must be positive");
  }
  StreamSet::parse(train.streams);
  if (loss.gamma <= 0.0) throw std::invalid_argument("loss.gamma must be positive");
  if (loss.epsilon < 0.0 || loss.lambda < 0.0 || loss.mu < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (augment.crop_min <= 0.0 || augment.crop_min > 1.0) {
    throw std::invalid_argument("augment.crop_min must lie in (0,1]");
  }
  if (semi.fraction <= 0.0 || semi.fraction > 1.0) {
    throw std::invalid_argument("semi.fraction must lie in (0,1]");
  }
  if (model.d_model < 1 || model.feature_dim < 1 || model.lift_hidden < 1) {
    throw std::invalid_argument("model widths must be positive");
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  std::string section;
  for (const KeyBinding& b : bindings()) {
    const auto dot = b.key.find('.');
    const std::string sec = b.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << b.key.substr(dot + 1) << " = " << b.get(*this) << "\n";
  }
  return out.str();
}

std::string RunConfig::hash() const {
  const std::string text = to_text();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GeneratorConfig RunConfig::train_generator() const {
  GeneratorConfig g;
  g.classes = generator.classes;
  g.samples_per_class = generator.train_per_class;
  g.frames = generator.frames;
  g.persons = generator.persons;
  g.noise_std = generator.noise_std;
  g.camera.focal = generator.focal;
  g.camera.distance = generator.distance;
  g.seed = generator.seed;
  return g;
}

GeneratorConfig RunConfig::test_generator() const {
  GeneratorConfig g = train_generator();
  g.samples_per_class = generator.test_per_class;
  g.seed = derive_seed(generator.seed, 0x7e57ULL);
  return g;
}

AugmentationRanges RunConfig::augment_ranges() const {
  AugmentationRanges r;
  r.crop_min = augment.crop_min;
  r.rotation_max = augment.rotation_max_deg * M_PI / 180.0;
  r.noise_std = augment.noise_std;
  return r;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.encoder.d_model = model.d_model;
  m.encoder.ffn_hidden = model.ffn_hidden;
  m.encoder.spatial_layers = model.spatial_layers;
  m.encoder.temporal_layers = model.temporal_layers;
  m.encoder.feature_dim = model.feature_dim;
  m.encoder.projector_hidden = model.projector_hidden;
  m.encoder.max_frames = generator.frames;
  m.lift.hidden = model.lift_hidden;
  m.init_seed = train.seed;
  return m;
}

StreamSet RunConfig::stream_set() const { return StreamSet::parse(train.streams); }

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  find_binding(key).set(*this, value);
}

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": key outside any section");
    }
    find_binding(section + "." + key).set(cfg, value);
  }
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

}  // namespace uniskel
