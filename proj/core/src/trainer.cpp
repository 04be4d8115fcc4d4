#include "uniskel/trainer.hpp"

#include <cstring>
#include <numeric>
#include <stdexcept>

#include "uniskel/optim.hpp"

namespace uniskel {

PairedDataset obtain_train_dataset(const RunConfig& cfg) {
  if (cfg.data.source == "files") {
    return load_paired(cfg.data.train_3d, cfg.data.train_2d);
  }
  return generate(cfg.train_generator());
}

PairedDataset obtain_test_dataset(const RunConfig& cfg) {
  if (cfg.data.source == "files") {
    return load_paired(cfg.data.test_3d, cfg.data.test_2d);
  }
  return generate(cfg.test_generator());
}

SemanticTable obtain_semantic_table(const RunConfig& cfg) {
  if (!cfg.semantic.embeddings.empty()) {
    return load_embedding_file(cfg.semantic.embeddings);
  }
  return fallback_embeddings(cfg.semantic.fallback_seed, cfg.semantic.fallback_dim);
}

Model build_model(const RunConfig& cfg) {
  return make_model(cfg.model_config(), obtain_semantic_table(cfg));
}

RawBatch assemble_batch(const PairedDataset& data, const std::vector<int>& indices,
                        const AugmentationRanges* augment_ranges, std::uint64_t seed) {
  const int n = static_cast<int>(indices.size());
  const int m = data.persons, t = data.frames;
  RawBatch batch;
  batch.meta = BatchMeta{n, m, t};
  batch.j25 = Tensor({n * m, t, 25, 3});
  batch.c20_2d = Tensor({n * m, t, 20, 2});
  batch.labels.resize(static_cast<std::size_t>(n));
  Rng draw_rng(derive_seed(seed, 0xA46ULL));
  for (int b = 0; b < n; ++b) {
    const int idx = indices[static_cast<std::size_t>(b)];
    batch.labels[static_cast<std::size_t>(b)] = data.labels[static_cast<std::size_t>(idx)];
    SkeletonSequence j = data.sequence_j25(idx);
    SkeletonSequence c = data.sequence_c17(idx);
    if (augment_ranges != nullptr) {
      const AugmentationParams params = draw_augmentation(*augment_ranges, draw_rng);
      j = augment(j, params, t);
      c = augment(c, params, t);
    }
    SkeletonSequence c20 = normalize_2d(interpolate_spine(c));
    std::memcpy(batch.j25.data() + static_cast<std::int64_t>(b) * j.data.size(), j.data.data(),
                static_cast<std::size_t>(j.data.size()) * sizeof(double));
    std::memcpy(batch.c20_2d.data() + static_cast<std::int64_t>(b) * c20.data.size(),
                c20.data.data(), static_cast<std::size_t>(c20.data.size()) * sizeof(double));
  }
  return batch;
}

PretrainResult pretrain(Model& model, const PairedDataset& train, const RunConfig& cfg) {
  cfg.validate();
  const StreamSet streams = cfg.stream_set();
  const AugmentationRanges ranges = cfg.augment_ranges();
  OptimizerState opt;
  opt.lr = cfg.train.lr;

  std::vector<int> order(static_cast<std::size_t>(train.samples));
  std::iota(order.begin(), order.end(), 0);

  PretrainResult result;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.train.seed, 0xE90C + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    LossHistoryRow row;
    int batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.train.batch_size)) {
      const std::size_t end = std::min(at + static_cast<std::size_t>(cfg.train.batch_size),
                                       order.size());
      if (end - at < 2) continue;  // variance terms need at least two samples
      std::vector<int> indices(order.begin() + static_cast<std::ptrdiff_t>(at),
                               order.begin() + static_cast<std::ptrdiff_t>(end));
      RawBatch batch = assemble_batch(
          train, indices, &ranges,
          derive_seed(cfg.train.seed, (static_cast<std::uint64_t>(epoch) << 20) + at));

      Tape tape;
      BoundParams bound(tape, model.params);
      ForwardOptions options;
      options.streams = streams;
      options.loss = cfg.loss;
      options.mode = BatchNormMode::train;
      ForwardResult fwd;
      try {
        fwd = model_forward(tape, model, bound, batch, options);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("pretrain aborted at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batches) + ": " + e.what());
      }
      tape.backward(fwd.loss);
      adam_step(model.params, bound.gradients(), opt);

      row.total += tape.value(fwd.loss).item();
      row.con += fwd.l_con.valid() ? tape.value(fwd.l_con).item() : 0.0;
      row.reg += fwd.l_reg.valid() ? tape.value(fwd.l_reg).item() : 0.0;
      row.rec += fwd.l_rec.valid() ? tape.value(fwd.l_rec).item() : 0.0;
      ++batches;
    }
    if (batches == 0) {
      throw std::runtime_error("pretrain: no usable batches (dataset smaller than 2 samples?)");
    }
    row.total /= batches;
    row.con /= batches;
    row.reg /= batches;
    row.rec /= batches;
    result.history.push_back(row);
  }
  return result;
}

}  // namespace uniskel
