// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/profit.hpp"

#include <iomanip>
#include <limits>

namespace pq {

std::vector<std::size_t> FreezeSchedule::order() const {
  std::vector<std::size_t> out;
  for (const auto& s : stages) out.insert(out.end(), s.begin(), s.end());
  return out;
}

FreezeSchedule build_schedule(const AiwqReport& report, std::size_t n_profit,
                              std::size_t epochs_per_stage, std::size_t bn_epochs) {
  const std::vector<std::size_t> order = report.descending();
  const std::size_t N = order.size();
  if (n_profit < 1 || n_profit > N) {
    throw Error("n_profit must be in [1, " + std::to_string(N) + "], got " +
                std::to_string(n_profit));
  }
  FreezeSchedule s;
  s.epochs_per_stage = epochs_per_stage;
  s.bn_epochs = bn_epochs;
  const std::size_t size = N / n_profit;
  for (std::size_t n = 0; n < n_profit; ++n) {
    const std::size_t begin = n * size;
    const std::size_t end = n + 1 == n_profit ? N : begin + size;
    s.stages.emplace_back(order.begin() + begin, order.begin() + end);
  }
  return s;
}

void apply_freeze(Trainer& trainer, std::span<const std::size_t> layer_ids) {
  for (std::size_t id : layer_ids) trainer.freeze_layer(id);
}

namespace {

std::optional<double> stage_aiwq(const Trainer& trainer, const Dataset& train,
                                 const ProfitOptions& opts) {
  if (opts.log_aiwq_iterations == 0) return std::nullopt;
  Trainer scratch = trainer.clone();
  const double lr = opts.aiwq_lr.value_or(opts.lr.base_lr);
  return sample_aiwq(scratch, train, opts.log_aiwq_iterations, lr).mean();
}

StageLogRow stage_row(const std::string& name, const Trainer& trainer,
                      const std::vector<EpochRecord>& recs, const Dataset& train,
                      const ProfitOptions& opts) {
  StageLogRow row;
  row.stage = name;
  row.frozen_layers.assign(trainer.frozen_layers().begin(), trainer.frozen_layers().end());
  if (!recs.empty()) {
    row.train_acc = recs.back().train_acc;
    row.test_acc = recs.back().test_acc;
  }
  row.mean_aiwq = stage_aiwq(trainer, train, opts);
  return row;
}

}  // namespace

ProfitResult run_schedule(Trainer& trainer, const FreezeSchedule& schedule,
                          const Dataset& train, const Dataset* test,
                          const ProfitOptions& opts, const EpochCallback& on_epoch) {
  ProfitResult result;
  result.schedule = schedule;
  for (std::size_t n = 0; n < schedule.stages.size(); ++n) {
    const std::string name = "profit" + std::to_string(n);
    auto recs = trainer.run_stage(name, train, schedule.epochs_per_stage, opts.lr, test,
                                  on_epoch);
    if (opts.freeze) apply_freeze(trainer, schedule.stages[n]);
    result.stages.push_back(stage_row(name, trainer, recs, train, opts));
    result.epochs.insert(result.epochs.end(), recs.begin(), recs.end());
    if (opts.on_stage) opts.on_stage(result.stages.back(), trainer);
  }
  if (opts.freeze) trainer.freeze_all_but_normalization();
  auto recs = trainer.run_stage("bn", train, schedule.bn_epochs, opts.lr, test, on_epoch);
  result.stages.push_back(stage_row("bn", trainer, recs, train, opts));
  result.epochs.insert(result.epochs.end(), recs.begin(), recs.end());
  if (opts.on_stage) opts.on_stage(result.stages.back(), trainer);
  return result;
}

ProfitResult run_profit(Trainer& trainer, const Dataset& train, const Dataset* test,
                        const ProfitOptions& opts, const EpochCallback& on_epoch) {
  Trainer scratch = trainer.clone();
  const double lr = opts.aiwq_lr.value_or(opts.lr.base_lr);
  AiwqReport ranking = sample_aiwq(scratch, train, opts.aiwq_iterations, lr);
  const FreezeSchedule schedule =
      build_schedule(ranking, opts.n_profit, opts.epochs_per_stage, opts.bn_epochs);
  ProfitResult result = run_schedule(trainer, schedule, train, test, opts, on_epoch);
  result.ranking = std::move(ranking);
  return result;
}

void write_stage_log(const std::vector<StageLogRow>& rows, std::ostream& out) {
  out << "stage,frozen_layers,train_acc,test_acc,mean_AIWQ\n";
  const auto old = out.precision(10);
  for (const StageLogRow& r : rows) {
    out << r.stage << ',';
    for (std::size_t i = 0; i < r.frozen_layers.size(); ++i) {
      out << (i ? ";" : "") << r.frozen_layers[i];
    }
    out << ',' << r.train_acc << ',';
    if (r.test_acc) out << *r.test_acc;
    out << ',';
    if (r.mean_aiwq) out << *r.mean_aiwq;
    out << '\n';
  }
  out.precision(old);
}

namespace {

int effective_bits(int bits) {
  return bits == 0 ? std::numeric_limits<int>::max() : bits;
}

}  // namespace

void BitSchedule::validate() const {
  if (phases.empty()) throw Error("bit schedule has no phases");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const BitPhase& p = phases[i];
    if (p.weight_bits != 0) checked_bit_width(p.weight_bits);
    if (p.act_bits != 0) checked_bit_width(p.act_bits);
    if (i == 0) continue;
    const BitPhase& q = phases[i - 1];
    if (effective_bits(p.weight_bits) > effective_bits(q.weight_bits) ||
        effective_bits(p.act_bits) > effective_bits(q.act_bits)) {
      throw Error("bit schedule phase " + std::to_string(i) + " increases bit-width (" +
                  std::to_string(q.weight_bits) + "," + std::to_string(q.act_bits) +
                  ") -> (" + std::to_string(p.weight_bits) + "," +
                  std::to_string(p.act_bits) + ")");
    }
  }
}

std::size_t BitSchedule::total_epochs() const {
  std::size_t n = 0;
  for (const BitPhase& p : phases) n += p.epochs;
  return n;
}

std::vector<EpochRecord> run_progressive(Trainer& trainer, const Dataset& train,
                                         const Dataset* test, const BitSchedule& bits,
                                         const StageOptions& lr,
                                         const EpochCallback& on_epoch) {
  bits.validate();
  std::vector<EpochRecord> out;
  for (const BitPhase& p : bits.phases) {
    trainer.network().set_bits(p.weight_bits, p.act_bits);
    const std::string name = "q" + std::to_string(p.weight_bits) + "w" +
                             std::to_string(p.act_bits) + "a";
    auto recs = trainer.run_stage(name, train, p.epochs, lr, test, on_epoch);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

}  // namespace pq
