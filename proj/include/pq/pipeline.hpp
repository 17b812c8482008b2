// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Full run: optional teacher, full-precision warm-up, progressive bit-width
// phases, then progressive freezing. Everything is derived from the config
// seed, so a (config, seed) pair fixes the final checkpoint bit for bit.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "pq/config.hpp"
#include "pq/profit.hpp"
#include "pq/trainer.hpp"

namespace pq {

struct RunResult {
  Trainer trainer;
  std::vector<EpochRecord> epochs;
  std::optional<ProfitResult> profit;
  Accuracy final_test;  // EMA weights when EMA is enabled
};

struct RunOutput {
  /// Directory receiving config.json, metrics.csv, aiwq.csv, stages.csv and
  /// checkpoints. Nothing is written when unset.
  std::optional<std::filesystem::path> dir;
  /// Progress lines; silent when null.
  std::ostream* log = nullptr;
};

/// Root for run directories: $PQ_RUN_ROOT, or "runs".
std::filesystem::path run_root();

/// Trains the FP teacher described by `kd` for `run`.
Network train_teacher(const RunConfig& run, const Splits& data, std::ostream* log = nullptr);

RunResult run_training(const RunConfig& run, const Splits& data, const RunOutput& out = {});

/// Loads the configured data and runs.
RunResult run_training(const RunConfig& run, const RunOutput& out = {});

}  // namespace pq
