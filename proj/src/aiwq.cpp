// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/aiwq.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

namespace pq {

ChannelStats channel_stats(const Tensor& x) {
  if (x.rank() != 4 && x.rank() != 2) {
    throw ShapeError("channel_stats expects [N,C,H,W] or [N,C], got " + shape_str(x.shape()));
  }
  const std::size_t N = x.dim(0), C = x.dim(1);
  const std::size_t HW = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  const std::size_t count = N * HW;
  if (count < 2) throw ShapeError("channel_stats needs at least 2 values per channel");
  ChannelStats s;
  s.mean.assign(C, 0.0);
  s.var.assign(C, 0.0);
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double* p = x.data().data() + (n * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) sum += p[i];
    }
    const double m = sum * inv;
    double sq = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double* p = x.data().data() + (n * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) sq += (p[i] - m) * (p[i] - m);
    }
    s.mean[c] = m;
    s.var[c] = sq * inv;
  }
  return s;
}

void ChannelStatsPair::validate() const {
  const std::size_t C = mean_before.size();
  if (var_before.size() != C || mean_after.size() != C || var_after.size() != C) {
    throw ShapeError("channel stats pair has inconsistent channel counts");
  }
  for (std::size_t c = 0; c < C; ++c) {
    const double v[4] = {mean_before[c], var_before[c], mean_after[c], var_after[c]};
    for (double x : v) {
      if (!std::isfinite(x)) throw NumericError("channel stats are not finite");
    }
    if (var_before[c] < 0.0 || var_after[c] < 0.0) {
      throw NumericError("channel variance is negative");
    }
  }
}

ChannelStatsPair stats_pair(const Tensor& before, const Tensor& after) {
  if (!before.same_shape(after)) {
    throw ShapeError("stats_pair: " + shape_str(before.shape()) + " vs " +
                     shape_str(after.shape()));
  }
  ChannelStats b = channel_stats(before), a = channel_stats(after);
  ChannelStatsPair p{std::move(b.mean), std::move(b.var), std::move(a.mean), std::move(a.var)};
  p.validate();
  return p;
}

double gaussian_kl(double m1, double v1, double m2, double v2, double eps) {
  if (!(eps > 0.0)) throw Error("gaussian_kl: eps must be > 0");
  if (v1 < 0.0 || v2 < 0.0) throw NumericError("gaussian_kl: negative variance");
  v1 += eps;
  v2 += eps;
  const double d = m1 - m2;
  return 0.5 * std::log(v2 / v1) + (v1 + d * d) / (2.0 * v2) - 0.5;
}

double layer_aiwq(const ChannelStatsPair& s, double eps) {
  s.validate();
  if (s.channels() == 0) throw ShapeError("layer_aiwq: no channels");
  double sum = 0.0;
  for (std::size_t c = 0; c < s.channels(); ++c) {
    sum += gaussian_kl(s.mean_before[c], s.var_before[c], s.mean_after[c], s.var_after[c], eps);
  }
  return sum / static_cast<double>(s.channels());
}

double AiwqReport::mean() const {
  if (per_layer.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, v] : per_layer) sum += v;
  return sum / static_cast<double>(per_layer.size());
}

std::vector<std::size_t> AiwqReport::descending() const {
  std::vector<std::size_t> ids;
  for (const auto& [id, v] : per_layer) ids.push_back(id);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return per_layer.at(a) > per_layer.at(b);
  });
  return ids;
}

AiwqReport sample_aiwq(Trainer& trainer, const Dataset& data, std::size_t iterations,
                       double lr) {
  if (iterations == 0) throw Error("sample_aiwq needs at least one iteration");
  if (data.size() == 0) throw Error("sample_aiwq: empty data source");
  Network& net = trainer.network();
  const std::vector<std::size_t> ids = net.quantized_layer_ids();
  if (ids.empty()) throw Error("sample_aiwq: network has no quantized layers");

  AiwqReport report;
  for (std::size_t id : ids) {
    report.per_layer[id] = 0.0;
    report.layer_names[id] = net.layers()[id].name;
  }
  std::vector<std::vector<std::size_t>> batches;
  std::size_t next = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    if (next == batches.size()) {
      batches = trainer.epoch_batches(data.size());
      next = 0;
    }
    ForwardTrace trace;
    trainer.step(data.subset(batches[next++]), lr, &trace);
    for (std::size_t id : ids) {
      const Tensor& input = trace.inputs[id];
      const Tensor before = net.linear(id, input, trace.weights[id]);
      const Tensor after = net.linear(id, input, net.quantized_weight(id));
      report.per_layer[id] += layer_aiwq(stats_pair(before, after));
    }
  }
  for (auto& [id, v] : report.per_layer) v /= static_cast<double>(iterations);
  report.iterations_sampled = iterations;
  return report;
}

void write_aiwq_csv(const AiwqReport& report, std::ostream& out) {
  out << "layer_id,layer_name,metric\n";
  const auto old = out.precision(17);
  for (std::size_t id : report.descending()) {
    auto name = report.layer_names.find(id);
    out << id << ',' << (name == report.layer_names.end() ? "" : name->second) << ','
        << report.per_layer.at(id) << '\n';
  }
  out.precision(old);
}

}  // namespace pq
