#pragma once

#include "moco/config.hpp"

#include <string>

namespace moco {

/// Phantom ground truth, the calibrated trajectory, the true motion spline
/// and the motion-free / motion-corrupted stacks, all on disk under out_dir.
void cmd_simulate(const Config& cfg, const std::string& out_dir);

/// Training set -> RPEM model + CSV training log.
void cmd_train(const Config& cfg, const std::string& out_dir);

/// Runs every configured method on the simulated stacks; writes compensated
/// volumes, estimated motion splines, per-method run reports and appends
/// Table-style rows to metrics.csv.
void cmd_compensate(const Config& cfg, const std::string& out_dir);

/// Recomputes metrics.csv from the volumes on disk and writes the PGM slice
/// panels (ground truth / motion / compensated / difference).
void cmd_evaluate(const Config& cfg, const std::string& out_dir);

/// simulate -> train (when a regressor method needs a missing model) ->
/// compensate -> evaluate.
void cmd_all(const Config& cfg, const std::string& out_dir);

} // namespace moco
