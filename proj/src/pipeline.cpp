// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>

#include "pq/checkpoint.hpp"

namespace pq {

namespace {

// Independent random streams derived from the run seed.
enum Stream : std::uint64_t { kInit = 10, kTrain = 11, kTeacherInit = 20, kTeacherTrain = 21 };

class MetricsLog {
 public:
  explicit MetricsLog(const std::optional<std::filesystem::path>& dir) {
    if (!dir) return;
    file_.open(*dir / "metrics.csv", std::ios::app);
    if (!file_) throw Error("cannot open metrics log in " + dir->string());
    if (file_.tellp() == 0) file_ << "stage,epoch,lr,loss,train_acc,test_acc\n";
    file_ << std::setprecision(10);
  }

  void write(const EpochRecord& r) {
    if (!file_.is_open()) return;
    file_ << r.stage << ',' << r.epoch << ',' << r.lr << ',' << r.loss << ',' << r.train_acc
          << ',';
    if (r.test_acc) file_ << *r.test_acc;
    file_ << '\n' << std::flush;
  }

 private:
  std::ofstream file_;
};

void say(std::ostream* log, const EpochRecord& r) {
  if (!log) return;
  *log << std::fixed << std::setprecision(4) << "[" << r.stage << "] epoch " << r.epoch
       << " lr " << r.lr << " loss " << r.loss << " train " << r.train_acc;
  if (r.test_acc) *log << " test " << *r.test_acc;
  *log << std::defaultfloat << '\n';
}

}  // namespace

std::filesystem::path run_root() {
  const char* env = std::getenv("PQ_RUN_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

Network train_teacher(const RunConfig& run, const Splits& data, std::ostream* log) {
  if (!run.kd) throw Error("run has no distillation settings");
  NetConfig cfg = run.net;
  if (run.micro) {
    MicroMobileNetOptions o = *run.micro;
    o.width_mult *= run.kd->teacher_width_mult;
    cfg = micro_mobilenet(o);
  } else {
    cfg = widen(run.net, run.kd->teacher_width_mult);
  }
  Trainer t(Network(cfg, derive_seed(run.seed, kTeacherInit)), run.train.options,
            derive_seed(run.seed, kTeacherTrain));
  t.run_stage("teacher", data.train, run.kd->teacher_epochs, run.train.lr, &data.test,
              [&](const EpochRecord& r) { say(log, r); });
  return t.network();
}

RunResult run_training(const RunConfig& run, const Splits& data, const RunOutput& out) {
  run.validate();
  if (out.dir) {
    std::filesystem::create_directories(*out.dir);
    std::ofstream(*out.dir / "config.json") << to_json(run).dump(2) << '\n';
  }
  MetricsLog metrics(out.dir);
  RunResult result;
  auto on_epoch = [&](const EpochRecord& r) {
    metrics.write(r);
    say(out.log, r);
    result.epochs.push_back(r);
  };

  Network net(run.net, derive_seed(run.seed, kInit));
  QuantConfig q = run.quant;
  q.weight_bits = q.act_bits = 0;
  net.configure_quantization(q);
  result.trainer = Trainer(std::move(net), run.train.options, derive_seed(run.seed, kTrain));
  Trainer& trainer = result.trainer;

  if (run.kd) {
    Network teacher = run.kd->teacher_checkpoint
                          ? restore_network(load_checkpoint(*run.kd->teacher_checkpoint))
                          : train_teacher(run, data, out.log);
    trainer.set_teacher(std::move(teacher), run.kd->temperature, run.kd->weight);
  }

  trainer.run_stage("fp", data.train, run.train.fp_epochs, run.train.lr, &data.test, on_epoch);
  if (!run.bits.phases.empty()) {
    run_progressive(trainer, data.train, &data.test, run.bits, run.train.lr, on_epoch);
  }
  if (run.profit.enabled) {
    ProfitOptions po = run.profit.options;
    po.lr = run.train.lr;
    if (out.dir) {
      po.on_stage = [&](const StageLogRow& row, const Trainer& t) {
        save_checkpoint(*out.dir / ("stage_" + row.stage + ".ckpt"), make_checkpoint(t, run));
      };
    }
    result.profit = run_profit(trainer, data.train, &data.test, po, on_epoch);
    if (out.dir) {
      std::ofstream a(*out.dir / "aiwq.csv");
      write_aiwq_csv(result.profit->ranking, a);
      std::ofstream s(*out.dir / "stages.csv");
      write_stage_log(result.profit->stages, s);
    }
  }
  result.final_test = trainer.evaluate(data.test, run.train.options.ema_decay.has_value());
  if (out.dir) save_checkpoint(*out.dir / "final.ckpt", make_checkpoint(trainer, run));
  return result;
}

RunResult run_training(const RunConfig& run, const RunOutput& out) {
  return run_training(run, load_data(run.data), out);
}

}  // namespace pq
