// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// pqtool: train, evaluate and inspect quantized toy networks.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pq/aiwq.hpp"
#include "pq/checkpoint.hpp"
#include "pq/config.hpp"
#include "pq/cost.hpp"
#include "pq/negpad.hpp"
#include "pq/pipeline.hpp"

namespace {

using namespace pq;

// Data given on the command line, or the training split of the checkpoint's
// own data config.
Dataset data_for(const RunConfig& run, const std::string& spec, const std::string& labels) {
  if (spec.empty()) return load_data(run.data).train;
  return load_data_spec(spec, labels, run.net.num_classes, run.data.synth);
}

int cmd_train(const std::string& config_path, const std::string& name_override) {
  RunConfig run = load_run_config(config_path);
  if (!name_override.empty()) run.name = name_override;
  const auto dir = run_root() / run.name;
  std::cerr << "run directory: " << dir.string() << '\n';
  const RunResult r = run_training(run, RunOutput{dir, &std::cerr});
  std::cout << std::setprecision(6) << "top1 " << r.final_test.top1 << " top5 "
            << r.final_test.top5 << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& labels,
             bool ema) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  RunConfig run;
  const Trainer t = restore_trainer(ck, &run);
  if (ema && t.ema_states().empty()) throw CheckpointError("checkpoint has no EMA shadows");
  Dataset d = data.empty() ? load_data(run.data).test
                           : load_data_spec(data, labels, run.net.num_classes, run.data.synth);
  const Accuracy a = t.evaluate(d, ema);
  std::cout << std::setprecision(6) << "top1 " << a.top1 << " top5 " << a.top5 << " n "
            << d.size() << '\n';
  return 0;
}

int cmd_aiwq(const std::string& ckpt_path, std::size_t iters, std::optional<double> lr,
             const std::string& data, const std::string& labels) {
  RunConfig run;
  Trainer t = restore_trainer(load_checkpoint(ckpt_path), &run);
  const Dataset d = data_for(run, data, labels);
  write_aiwq_csv(sample_aiwq(t, d, iters, lr.value_or(run.train.lr.base_lr)), std::cout);
  return 0;
}

int cmd_negpad(const std::string& ckpt_path, std::size_t trials, const std::string& data,
               const std::string& labels) {
  RunConfig run;
  const Trainer t = restore_trainer(load_checkpoint(ckpt_path), &run);
  Dataset d = data_for(run, data, labels);
  d = d.slice(0, 256);
  const auto rows = verify_network(t.network(), d, trials, run.seed);
  write_negpad_csv(rows, std::cout);
  if (rows.empty()) std::cerr << "no negatively padded conv layers\n";
  return 0;
}

// `--bits a,w`: activation width first.
std::pair<int, int> parse_bits(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("--bits expects A,W, got '" + s + "'");
  try {
    std::size_t used = 0;
    const int a = std::stoi(s.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument(s);
    const std::string ws = s.substr(comma + 1);
    const int w = std::stoi(ws, &used);
    if (used != ws.size()) throw std::invalid_argument(s);
    if (a < 1 || a > 32 || w < 1 || w > 32) {
      throw ConfigError("--bits: each bit-width must be in [1,32], got '" + s + "'");
    }
    return {a, w};
  } catch (const ConfigError&) {
    throw;
  } catch (const std::logic_error&) {
    throw ConfigError("--bits expects two integers A,W, got '" + s + "'");
  }
}

int cmd_cost(const std::string& config_path, const std::string& bits,
             std::optional<int> first_act_bits) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open " + config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(config_path + ": " + e.what());
  }
  // Either a bare network description or a full run config.
  const NetConfig net = j.contains("version") ? parse_run_config(j).net : parse_net_config(j);
  const auto [a, w] = parse_bits(bits);
  CostOptions opts;
  opts.first_layer_act_bits = first_act_bits;
  write_bops_csv(bops_report(net, w, a, opts), std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantization-aware training toolkit"};
  app.require_subcommand(1);

  std::string config, name;
  auto* train = app.add_subcommand("train", "Run the configured training pipeline");
  train->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--name", name, "Run directory name under $PQ_RUN_ROOT");

  std::string ckpt, data, labels;
  bool ema = false;
  auto* eval = app.add_subcommand("eval", "Top-1/top-5 accuracy of a checkpoint");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "IDX image file or synth:SEED:N[:NOISE]");
  eval->add_option("--labels", labels, "IDX label file (with an IDX --data)");
  eval->add_flag("--ema", ema, "Evaluate the EMA shadow weights");

  std::size_t iters = 20;
  std::optional<double> lr;
  auto* aiwq = app.add_subcommand("aiwq-profile", "Per-layer AIWQ as CSV");
  aiwq->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  aiwq->add_option("--iters", iters, "Sampling iterations")->check(CLI::PositiveNumber);
  aiwq->add_option("--lr", lr, "Learning rate while sampling (default: base_lr)");
  aiwq->add_option("--data", data, "IDX image file or synth:SEED:N[:NOISE]");
  aiwq->add_option("--labels", labels, "IDX label file");

  std::size_t trials = 8;
  auto* negpad = app.add_subcommand("negpad-verify", "Check the negative-padding rewrite");
  negpad->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  negpad->add_option("--trials", trials, "Random inputs per layer")->check(CLI::PositiveNumber);
  negpad->add_option("--data", data, "IDX image file or synth:SEED:N[:NOISE]");
  negpad->add_option("--labels", labels, "IDX label file");

  std::string bits;
  std::optional<int> first_act;
  auto* cost = app.add_subcommand("cost-report", "Per-layer MACs, BOPS and model size");
  cost->add_option("--config", config, "Network or run config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cost->add_option("--bits", bits, "Activation and weight bit-widths, A,W")->required();
  cost->add_option("--first-layer-act-bits", first_act, "Input width of the first layer");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, name);
    if (*eval) return cmd_eval(ckpt, data, labels, ema);
    if (*aiwq) return cmd_aiwq(ckpt, iters, lr, data, labels);
    if (*negpad) return cmd_negpad(ckpt, trials, data, labels);
    if (*cost) return cmd_cost(config, bits, first_act);
  } catch (const std::exception& e) {
    std::cerr << "pqtool: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
