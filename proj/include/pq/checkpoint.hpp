// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Container layout (all integers little-endian):
//   "PQCKPT\0\0"  u32 version  u64 meta_len  meta (JSON, UTF-8)
//   u64 count, then per tensor:
//     u32 name_len  name  u32 rank  u64 dims[rank]  f64 data[prod(dims)]

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "pq/config.hpp"
#include "pq/trainer.hpp"

namespace pq {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  using Error::Error;
};

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Network state, optimizer velocities ("sgd/"), EMA shadows ("ema/"), RNG
/// state, counters, frozen layers and the run config.
Checkpoint make_checkpoint(const Trainer& trainer, const RunConfig& run);

/// Rebuilds the trainer saved by make_checkpoint. The teacher is not stored.
Trainer restore_trainer(const Checkpoint& ckpt, RunConfig* run = nullptr);

/// Just the network (EMA shadows substituted when `use_ema`).
Network restore_network(const Checkpoint& ckpt, bool use_ema = false);

}  // namespace pq
