#include "uniskel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <stdexcept>

#include "uniskel/optim.hpp"
#include "uniskel/trainer.hpp"

namespace uniskel {

namespace {

Var feature_of(const ForwardResult& fwd, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::fused: return fwd.y_fused;
    case FeatureKind::stream_j: return fwd.j.y;
    case FeatureKind::stream_c: return fwd.c.y;
    case FeatureKind::stream_s: return fwd.s.y;
  }
  throw std::logic_error("unknown feature kind");
}

std::vector<int> range_indices(int begin, int end) {
  std::vector<int> v(static_cast<std::size_t>(end - begin));
  std::iota(v.begin(), v.end(), begin);
  return v;
}

int argmax_row(const double* row, int k) {
  int best = 0;
  for (int j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

Tensor extract_features(Model& model, const PairedDataset& data, const StreamSet& streams,
                        FeatureKind kind, int batch_size) {
  if (kind == FeatureKind::stream_j && !streams.j) {
    throw std::invalid_argument("cannot extract J features: stream not in subset");
  }
  if (kind == FeatureKind::stream_c && !streams.c) {
    throw std::invalid_argument("cannot extract C features: stream not in subset");
  }
  if (kind == FeatureKind::stream_s && !streams.s) {
    throw std::invalid_argument("cannot extract S features: stream not in subset");
  }
  const int d = model.cfg.encoder.feature_dim;
  Tensor features({data.samples, d});
  for (int begin = 0; begin < data.samples; begin += batch_size) {
    const int end = std::min(begin + batch_size, data.samples);
    RawBatch batch = assemble_batch(data, range_indices(begin, end), nullptr, 0);
    Tape tape;
    BoundParams bound(tape, model.params);
    ForwardOptions options;
    options.streams = streams;
    options.mode = BatchNormMode::eval;
    options.with_losses = false;
    ForwardResult fwd = model_forward(tape, model, bound, batch, options);
    const Tensor& y = tape.value(feature_of(fwd, kind));
    std::memcpy(features.data() + static_cast<std::int64_t>(begin) * d, y.data(),
                static_cast<std::size_t>(y.size()) * sizeof(double));
  }
  return features;
}

double linear_probe(const Tensor& train_features, const std::vector<int>& train_labels,
                    const Tensor& test_features, const std::vector<int>& test_labels, int classes,
                    const ProbeSettings& cfg, std::uint64_t seed) {
  if (train_features.rank() != 2 || test_features.rank() != 2 ||
      train_features.dim(1) != test_features.dim(1)) {
    throw std::invalid_argument("probe features must be [n,D] with matching widths");
  }
  std::set<int> seen(train_labels.begin(), train_labels.end());
  for (int k = 0; k < classes; ++k) {
    if (!seen.count(k)) {
      throw std::invalid_argument("class " + std::to_string(k) +
                                  " absent from the probe training split");
    }
  }
  const int d = train_features.dim(1);
  Rng rng(derive_seed(seed, 0x9120BEULL));
  ParamStore params;
  params.add("cls.w", xavier_init({d, classes}, rng));
  params.add("cls.b", Tensor({classes}));
  OptimizerState opt;
  opt.lr = cfg.lr;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    BoundParams bound(tape, params);
    Var x = tape.constant(train_features);
    Var logits = tape.linear(x, bound["cls.w"], bound["cls.b"]);
    Var loss = tape.softmax_cross_entropy(logits, train_labels);
    tape.backward(loss);
    adam_step(params, bound.gradients(), opt);
  }
  // frozen evaluation
  Tape tape;
  BoundParams bound(tape, params);
  Var logits = tape.linear(tape.constant(test_features), bound["cls.w"], bound["cls.b"]);
  const Tensor& scores = tape.value(logits);
  int hits = 0;
  const int n = test_features.dim(0);
  for (int i = 0; i < n; ++i) {
    if (argmax_row(scores.data() + static_cast<std::int64_t>(i) * classes, classes) ==
        test_labels[static_cast<std::size_t>(i)]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / n;
}

double retrieve_top1(const Tensor& query_features, const std::vector<int>& query_labels,
                     const Tensor& gallery_features, const std::vector<int>& gallery_labels) {
  if (gallery_features.rank() != 2 || gallery_features.dim(0) == 0) {
    throw std::invalid_argument("retrieval gallery is empty");
  }
  if (query_features.rank() != 2 || query_features.dim(1) != gallery_features.dim(1)) {
    throw std::invalid_argument("query/gallery feature widths disagree");
  }
  const int nq = query_features.dim(0);
  const int ng = gallery_features.dim(0);
  const int d = query_features.dim(1);
  auto norm = [&](const double* v) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += v[c] * v[c];
    return std::max(std::sqrt(s), 1e-12);
  };
  std::vector<double> gallery_norms(static_cast<std::size_t>(ng));
  for (int g = 0; g < ng; ++g) {
    gallery_norms[static_cast<std::size_t>(g)] =
        norm(gallery_features.data() + static_cast<std::int64_t>(g) * d);
  }
  int hits = 0;
  for (int q = 0; q < nq; ++q) {
    const double* qv = query_features.data() + static_cast<std::int64_t>(q) * d;
    const double qn = norm(qv);
    double best = -2.0;
    int best_g = 0;
    for (int g = 0; g < ng; ++g) {
      const double* gv = gallery_features.data() + static_cast<std::int64_t>(g) * d;
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += qv[c] * gv[c];
      const double cosine = dot / (qn * gallery_norms[static_cast<std::size_t>(g)]);
      if (cosine > best) {
        best = cosine;
        best_g = g;
      }
    }
    if (gallery_labels[static_cast<std::size_t>(best_g)] ==
        query_labels[static_cast<std::size_t>(q)]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / nq;
}

std::vector<int> stratified_subsample(const std::vector<int>& labels, double fraction,
                                      std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw std::invalid_argument("fraction must lie in (0,1]");
  }
  int max_label = -1;
  for (int label : labels) max_label = std::max(max_label, label);
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  Rng rng(derive_seed(seed, 0x57A7ULL));
  std::vector<int> out;
  for (auto& members : by_class) {
    if (members.empty()) {
      throw std::invalid_argument("a class has no samples; cannot subsample per class");
    }
    const int keep = static_cast<int>(
        std::ceil(fraction * static_cast<double>(members.size())));
    rng.shuffle(members);
    out.insert(out.end(), members.begin(), members.begin() + keep);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double semi_supervised(Model& model, const PairedDataset& train, const PairedDataset& test,
                       const RunConfig& cfg, double fraction) {
  const std::vector<int> subset = stratified_subsample(train.labels, fraction, cfg.train.seed);
  const StreamSet streams = cfg.stream_set();
  const AugmentationRanges ranges = cfg.augment_ranges();
  const int classes = cfg.generator.classes;
  Rng rng(derive_seed(cfg.train.seed, 0x5E3FULL));
  if (!model.params.has("cls.w")) {
    model.params.add("cls.w", xavier_init({cfg.model.feature_dim, classes}, rng));
    model.params.add("cls.b", Tensor({classes}));
  }
  OptimizerState opt;
  opt.lr = cfg.semi.lr;

  std::vector<int> order = subset;
  for (int epoch = 0; epoch < cfg.semi.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.train.seed, 0xF17E + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.train.batch_size)) {
      const std::size_t end =
          std::min(at + static_cast<std::size_t>(cfg.train.batch_size), order.size());
      if (end - at < 2) continue;
      std::vector<int> indices(order.begin() + static_cast<std::ptrdiff_t>(at),
                               order.begin() + static_cast<std::ptrdiff_t>(end));
      RawBatch batch = assemble_batch(
          train, indices, &ranges,
          derive_seed(cfg.train.seed, 0xF1000 + (static_cast<std::uint64_t>(epoch) << 20) + at));
      Tape tape;
      BoundParams bound(tape, model.params);
      ForwardOptions options;
      options.streams = streams;
      options.mode = BatchNormMode::train;
      options.with_losses = false;
      ForwardResult fwd = model_forward(tape, model, bound, batch, options);
      Var logits = tape.linear(fwd.y_fused, bound["cls.w"], bound["cls.b"]);
      Var loss = tape.softmax_cross_entropy(logits, batch.labels);
      tape.backward(loss);
      adam_step(model.params, bound.gradients(), opt);
    }
  }

  // top-1 on the test split with the fine-tuned encoder + classifier
  Tensor features = extract_features(model, test, streams, FeatureKind::fused);
  Tape tape;
  BoundParams bound(tape, model.params);
  Var logits = tape.linear(tape.constant(features), bound["cls.w"], bound["cls.b"]);
  const Tensor& scores = tape.value(logits);
  int hits = 0;
  for (int i = 0; i < test.samples; ++i) {
    if (argmax_row(scores.data() + static_cast<std::int64_t>(i) * classes, classes) ==
        test.labels[static_cast<std::size_t>(i)]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / test.samples;
}

double lift_mpjpe(Model& model, const PairedDataset& data, int max_samples) {
  const int n = max_samples > 0 ? std::min(max_samples, data.samples) : data.samples;
  const UnifiedSlotMap& map = unified_slot_map();
  double total = 0.0;
  std::int64_t count = 0;
  for (int begin = 0; begin < n; begin += 64) {
    const int end = std::min(begin + 64, n);
    RawBatch batch = assemble_batch(data, range_indices(begin, end), nullptr, 0);
    const int rows = batch.meta.rows();
    Tensor c2d({rows, 20, 2});
    std::memcpy(c2d.data(), batch.c20_2d.data(),
                static_cast<std::size_t>(c2d.size()) * sizeof(double));
    Tape tape;
    BoundParams bound(tape, model.params);
    Var lifted = lift_rows(tape, bound, model.cfg.lift, tape.constant(std::move(c2d)),
                           model.lift_bn, BatchNormMode::eval);
    const Tensor& pred = tape.value(lifted);  // [rows,20,3]
    // ground truth common joints come from the 3D stream
    for (int r = 0; r < rows; ++r) {
      for (int i = 0; i < 15; ++i) {
        const int slot = map.common_slots[static_cast<std::size_t>(i)];
        // find the C20/J25 joints mapping to this slot
        int cj = -1, jj = -1;
        for (int q = 0; q < 20; ++q) {
          if (map.slot_of_c20[static_cast<std::size_t>(q)] == slot) cj = q;
        }
        for (int q = 0; q < 25; ++q) {
          if (map.slot_of_j25[static_cast<std::size_t>(q)] == slot) jj = q;
        }
        const double* pv = pred.data() + (static_cast<std::int64_t>(r) * 20 + cj) * 3;
        const int cell = r / batch.meta.frames;
        const int frame = r % batch.meta.frames;
        const double* gv =
            batch.j25.data() +
            (((static_cast<std::int64_t>(cell) * batch.meta.frames + frame) * 25) + jj) * 3;
        const double dx = pv[0] - gv[0], dy = pv[1] - gv[1], dz = pv[2] - gv[2];
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

double fusion_consistency_mse(Model& model, const PairedDataset& data, const StreamSet& streams,
                              const LossConfig& loss, int max_samples) {
  const int n = std::min(max_samples, data.samples);
  RawBatch batch = assemble_batch(data, range_indices(0, n), nullptr, 0);
  Tape tape;
  BoundParams bound(tape, model.params);
  ForwardOptions options;
  options.streams = streams;
  options.loss = loss;
  options.mode = BatchNormMode::eval;
  ForwardResult fwd = model_forward(tape, model, bound, batch, options);
  double total = 0.0;
  int terms = 0;
  for (const StreamOutputs* so : {&fwd.j, &fwd.c, &fwd.s}) {
    if (!so->z.valid()) continue;
    total += tape.value(mse(tape, so->z, so->z_fused)).item();
    ++terms;
  }
  return total / terms;
}

}  // namespace uniskel
