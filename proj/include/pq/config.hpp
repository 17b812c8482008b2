// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Versioned run configuration. Parsing is strict: unknown keys, wrong types
// and out-of-range values are errors naming the offending key path.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pq/data.hpp"
#include "pq/model.hpp"
#include "pq/profit.hpp"
#include "pq/trainer.hpp"

namespace pq {

inline constexpr int kConfigVersion = 1;

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DataConfig {
  std::string source = "synth";  // "synth" or "idx"
  std::uint64_t seed = 7;
  std::size_t train_size = 2000;
  std::size_t test_size = 1000;
  std::size_t num_classes = 10;
  SynthOptions synth;
  std::string train_images, train_labels, test_images, test_labels;
};

struct Splits {
  Dataset train;
  Dataset test;
};

Splits load_data(const DataConfig& cfg);

/// "synth:SEED:N[:NOISE]" or an IDX image path (labels given separately).
Dataset load_data_spec(const std::string& spec, const std::string& labels_path,
                       std::size_t num_classes, const SynthOptions& synth = {});

struct TrainConfig {
  TrainOptions options;
  StageOptions lr;
  std::size_t fp_epochs = 4;
};

struct ProfitConfig {
  bool enabled = true;
  ProfitOptions options;
};

struct KdConfig {
  std::optional<std::string> teacher_checkpoint;
  double temperature = 2.0;
  double weight = 0.5;
  std::size_t teacher_epochs = 6;
  std::size_t teacher_width_mult = 2;
};

struct RunConfig {
  int version = kConfigVersion;
  std::string name = "run";
  std::uint64_t seed = 1;
  NetConfig net;
  /// Set when the network was given as a micro_mobilenet block.
  std::optional<MicroMobileNetOptions> micro;
  DataConfig data;
  TrainConfig train;
  QuantConfig quant;
  BitSchedule bits;
  ProfitConfig profit;
  std::optional<KdConfig> kd;

  void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved form; parse_run_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& c);

NetConfig parse_net_config(const nlohmann::json& j);
nlohmann::json to_json(const NetConfig& n);

/// Same topology with every conv and hidden dense width multiplied.
NetConfig widen(const NetConfig& net, std::size_t mult);

}  // namespace pq
