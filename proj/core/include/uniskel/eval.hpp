#pragma once

#include <vector>

#include "uniskel/config.hpp"
#include "uniskel/dataset.hpp"
#include "uniskel/model.hpp"

namespace uniskel {

enum class FeatureKind { fused, stream_j, stream_c, stream_s };

/// Frozen-encoder features (eval mode, no augmentation): [samples, D].
Tensor extract_features(Model& model, const PairedDataset& data, const StreamSet& streams,
                        FeatureKind kind, int batch_size = 64);

/// Trains only a linear classifier on frozen features; returns top-1
/// accuracy on the test features. Every class must appear in the training
/// labels.
double linear_probe(const Tensor& train_features, const std::vector<int>& train_labels,
                    const Tensor& test_features, const std::vector<int>& test_labels, int classes,
                    const ProbeSettings& cfg, std::uint64_t seed);

/// Cosine 1-nearest-neighbour retrieval: fraction of queries whose nearest
/// gallery feature carries the same label.
double retrieve_top1(const Tensor& query_features, const std::vector<int>& query_labels,
                     const Tensor& gallery_features, const std::vector<int>& gallery_labels);

/// ceil(fraction * n_k) sample indices per class, deterministic.
std::vector<int> stratified_subsample(const std::vector<int>& labels, double fraction,
                                      std::uint64_t seed);

/// Fine-tunes encoder and classifier jointly on a stratified labeled
/// fraction; returns top-1 accuracy on the test set. The model is updated
/// in place.
double semi_supervised(Model& model, const PairedDataset& train, const PairedDataset& test,
                       const RunConfig& cfg, double fraction);

/// Mean per-joint position error of the lifted common joints against the 3D
/// stream, eval mode, no augmentation.
double lift_mpjpe(Model& model, const PairedDataset& data, int max_samples = 0);

/// Mean over present streams of MSE(Z_i, Z'_i) on a fixed deterministic
/// batch (eval mode, no augmentation).
double fusion_consistency_mse(Model& model, const PairedDataset& data, const StreamSet& streams,
                              const LossConfig& loss, int max_samples = 64);

}  // namespace uniskel
