// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Progressive freezing: sample per-layer AIWQ, sort layers by it, then train
// and freeze the most sensitive group in turn. A closing stage trains only the
// normalization layers. Also hosts the progressive bit-width schedule.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pq/aiwq.hpp"
#include "pq/trainer.hpp"

namespace pq {

struct FreezeSchedule {
  std::vector<std::vector<std::size_t>> stages;
  std::size_t epochs_per_stage = 0;
  std::size_t bn_epochs = 0;

  /// Stage contents concatenated in freezing order.
  std::vector<std::size_t> order() const;
  std::size_t total_epochs() const { return stages.size() * epochs_per_stage + bn_epochs; }
};

/// Splits the layers of `report` into `n_profit` groups of
/// floor(N / n_profit), largest metric first; leftovers join the last group.
FreezeSchedule build_schedule(const AiwqReport& report, std::size_t n_profit,
                              std::size_t epochs_per_stage, std::size_t bn_epochs);

/// Zeroes learning rate and momentum for the layers' weights and quantizers.
void apply_freeze(Trainer& trainer, std::span<const std::size_t> layer_ids);

struct StageLogRow {
  std::string stage;
  std::vector<std::size_t> frozen_layers;
  double train_acc = 0.0;
  std::optional<double> test_acc;
  std::optional<double> mean_aiwq;
};

struct ProfitOptions {
  std::size_t n_profit = 3;
  std::size_t epochs_per_stage = 2;
  std::size_t bn_epochs = 1;
  /// Training steps used for the sensitivity ranking.
  std::size_t aiwq_iterations = 20;
  /// Learning rate during sampling; the stage base rate when unset.
  std::optional<double> aiwq_lr;
  /// Steps used for the per-stage mean_AIWQ log column (0 disables it).
  std::size_t log_aiwq_iterations = 4;
  StageOptions lr;
  /// When false, runs the identical stage structure without freezing.
  bool freeze = true;
  /// Called after each stage (and its freeze) completes.
  std::function<void(const StageLogRow&, const Trainer&)> on_stage;
};


struct ProfitResult {
  AiwqReport ranking;
  FreezeSchedule schedule;
  std::vector<StageLogRow> stages;
  std::vector<EpochRecord> epochs;
};

/// Sensitivity sampling runs on a copy of `trainer`, so the only weight
/// updates applied to it are the schedule's own epochs.
ProfitResult run_profit(Trainer& trainer, const Dataset& train, const Dataset* test,
                        const ProfitOptions& opts, const EpochCallback& on_epoch = {});

/// Trains the stages of a prepared schedule (no sampling).
ProfitResult run_schedule(Trainer& trainer, const FreezeSchedule& schedule,
                          const Dataset& train, const Dataset* test,
                          const ProfitOptions& opts, const EpochCallback& on_epoch = {});

void write_stage_log(const std::vector<StageLogRow>& rows, std::ostream& out);

struct BitPhase {
  int weight_bits = 8;  // 0 = full precision
  int act_bits = 8;
  std::size_t epochs = 1;
};

struct BitSchedule {
  std::vector<BitPhase> phases;

  /// Throws unless both widths are non-increasing (0 counts as unbounded).
  void validate() const;
  std::size_t total_epochs() const;
};

/// Moves through the phases, changing level counts before each one.
/// Quantizers switched on for the first time calibrate on their next batch.
std::vector<EpochRecord> run_progressive(Trainer& trainer, const Dataset& train,
                                         const Dataset* test, const BitSchedule& bits,
                                         const StageOptions& lr,
                                         const EpochCallback& on_epoch = {});

}  // namespace pq
