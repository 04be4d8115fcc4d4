#pragma once

#include <string>
#include <vector>

#include "uniskel/config.hpp"
#include "uniskel/model.hpp"

namespace uniskel {

/// Per-epoch mean loss components.
struct LossHistoryRow {
  double total = 0.0;
  double con = 0.0;
  double reg = 0.0;
  double rec = 0.0;
};

/// Named-tensor container (raw little-endian doubles) plus the resolved
/// config snapshot and the training-loss history. Values round trip
/// bitwise.
void save_checkpoint(const std::string& path, const Model& model,
                     const std::string& config_text,
                     const std::vector<LossHistoryRow>& history);

struct LoadedCheckpoint {
  Model model;
  RunConfig config;
  std::string config_text;
  std::vector<LossHistoryRow> history;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace uniskel
