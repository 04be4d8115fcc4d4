#pragma once

#include <vector>

#include "uniskel/checkpoint.hpp"
#include "uniskel/config.hpp"
#include "uniskel/dataset.hpp"
#include "uniskel/model.hpp"

namespace uniskel {

/// Dataset per the config: generated in memory or loaded from HSKL files.
PairedDataset obtain_train_dataset(const RunConfig& cfg);
PairedDataset obtain_test_dataset(const RunConfig& cfg);

SemanticTable obtain_semantic_table(const RunConfig& cfg);
Model build_model(const RunConfig& cfg);

/// Assembles one mini-batch: optional per-sample augmentation (the same
/// parameter draw for every stream of a sample), spine interpolation and
/// per-sequence normalization of the 2D stream.
RawBatch assemble_batch(const PairedDataset& data, const std::vector<int>& indices,
                        const AugmentationRanges* augment_ranges, std::uint64_t seed);

struct PretrainResult {
  std::vector<LossHistoryRow> history;
};

/// Self-supervised pretraining over the full objective; one Adam step per
/// mini-batch, loss history recorded per epoch.
PretrainResult pretrain(Model& model, const PairedDataset& train, const RunConfig& cfg);

}  // namespace uniskel
