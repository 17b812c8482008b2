// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace pq {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  expect_object(j, where);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, const std::string& where, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->get<long long>() < 0) throw ConfigError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("");
    }
    out = it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
void read_opt(const json& j, const char* key, const std::string& where,
              std::optional<T>& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, where, v);
  out = v;
}

LayerSpec parse_layer(const json& j, const std::string& where) {
  check_keys(j, where, {"type", "out_channels", "kernel", "stride", "activation", "quantized"});
  LayerSpec s;
  std::string type = "conv", act = "h_swish";
  read(j, "type", where, type);
  if (type == "dense") act = "none";
  read(j, "activation", where, act);
  try {
    s.kind = parse_layer_kind(type);
    s.activation = parse_activation(act);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  read(j, "out_channels", where, s.out_channels);
  read(j, "kernel", where, s.kernel);
  read(j, "stride", where, s.stride);
  read(j, "quantized", where, s.quantized);
  return s;
}

MicroMobileNetOptions parse_micro(const json& j, const std::string& where) {
  check_keys(j, where, {"in_channels", "in_size", "num_classes", "stem_width", "block_widths",
                        "block_strides", "activation", "width_mult"});
  MicroMobileNetOptions o;
  read(j, "in_channels", where, o.in_channels);
  read(j, "in_size", where, o.in_size);
  read(j, "num_classes", where, o.num_classes);
  read(j, "stem_width", where, o.stem_width);
  read(j, "block_widths", where, o.block_widths);
  read(j, "block_strides", where, o.block_strides);
  read(j, "width_mult", where, o.width_mult);
  std::string act = to_string(o.activation);
  read(j, "activation", where, act);
  try {
    o.activation = parse_activation(act);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return o;
}

json micro_to_json(const MicroMobileNetOptions& o) {
  return {{"in_channels", o.in_channels},   {"in_size", o.in_size},
          {"num_classes", o.num_classes},   {"stem_width", o.stem_width},
          {"block_widths", o.block_widths}, {"block_strides", o.block_strides},
          {"activation", to_string(o.activation)}, {"width_mult", o.width_mult}};
}

NetConfig parse_net_block(const json& j, std::optional<MicroMobileNetOptions>* micro) {
  const std::string where = "net";
  expect_object(j, where);
  NetConfig n;
  try {
    if (j.contains("micro_mobilenet")) {
      check_keys(j, where, {"micro_mobilenet"});
      const auto o = parse_micro(j["micro_mobilenet"], "net.micro_mobilenet");
      if (micro) *micro = o;
      return micro_mobilenet(o);
    }
    check_keys(j, where, {"in_channels", "in_height", "in_width", "num_classes", "layers"});
    read(j, "in_channels", where, n.in_channels);
    read(j, "in_height", where, n.in_height);
    read(j, "in_width", where, n.in_width);
    read(j, "num_classes", where, n.num_classes);
    auto it = j.find("layers");
    if (it == j.end() || !it->is_array()) throw ConfigError("net.layers: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      n.layers.push_back(parse_layer((*it)[i], "net.layers[" + std::to_string(i) + "]"));
    }
    n.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return n;
}

DataConfig parse_data(const json& j) {
  const std::string w = "data";
  check_keys(j, w, {"source", "seed", "train_size", "test_size", "num_classes", "image_size",
                    "noise", "train_images", "train_labels", "test_images", "test_labels"});
  DataConfig d;
  read(j, "source", w, d.source);
  read(j, "seed", w, d.seed);
  read(j, "train_size", w, d.train_size);
  read(j, "test_size", w, d.test_size);
  read(j, "num_classes", w, d.num_classes);
  read(j, "image_size", w, d.synth.size);
  read(j, "noise", w, d.synth.noise);
  read(j, "train_images", w, d.train_images);
  read(j, "train_labels", w, d.train_labels);
  read(j, "test_images", w, d.test_images);
  read(j, "test_labels", w, d.test_labels);
  return d;
}

TrainConfig parse_train(const json& j) {
  const std::string w = "train";
  check_keys(j, w, {"batch_size", "momentum", "weight_decay", "ema_decay", "quant_lr_mult",
                    "base_lr", "warmup_fraction", "fp_epochs"});
  TrainConfig t;
  read(j, "batch_size", w, t.options.batch_size);
  read(j, "momentum", w, t.options.momentum);
  read(j, "weight_decay", w, t.options.weight_decay);
  read_opt(j, "ema_decay", w, t.options.ema_decay);
  read(j, "quant_lr_mult", w, t.options.quant_lr_mult);
  read(j, "base_lr", w, t.lr.base_lr);
  read(j, "warmup_fraction", w, t.lr.warmup_fraction);
  read(j, "fp_epochs", w, t.fp_epochs);
  return t;
}

QuantConfig parse_quant(const json& j) {
  const std::string w = "quant";
  check_keys(j, w, {"act_kind", "act_mode", "weight_learned", "first_layer_input_quantized",
                    "negative_padding"});
  QuantConfig q;
  std::string kind = to_string(q.act_kind), mode = to_string(q.act_mode);
  read(j, "act_kind", w, kind);
  read(j, "act_mode", w, mode);
  try {
    q.act_kind = parse_quant_kind(kind);
    q.act_mode = parse_quant_mode(mode);
  } catch (const Error& e) {
    throw ConfigError(w + ": " + e.what());
  }
  read(j, "weight_learned", w, q.weight_learned);
  read(j, "first_layer_input_quantized", w, q.first_layer_input_quantized);
  read(j, "negative_padding", w, q.negative_padding);
  return q;
}

BitSchedule parse_bits(const json& j) {
  if (!j.is_array()) throw ConfigError("bit_schedule: expected an array");
  BitSchedule b;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = "bit_schedule[" + std::to_string(i) + "]";
    check_keys(j[i], w, {"weight_bits", "act_bits", "epochs"});
    BitPhase p;
    read(j[i], "weight_bits", w, p.weight_bits);
    read(j[i], "act_bits", w, p.act_bits);
    read(j[i], "epochs", w, p.epochs);
    b.phases.push_back(p);
  }
  return b;
}

ProfitConfig parse_profit(const json& j) {
  const std::string w = "profit";
  check_keys(j, w, {"enabled", "n_profit", "epochs_per_stage", "bn_epochs", "aiwq_iterations",
                    "aiwq_lr", "log_aiwq_iterations", "freeze"});
  ProfitConfig p;
  read(j, "enabled", w, p.enabled);
  read(j, "n_profit", w, p.options.n_profit);
  read(j, "epochs_per_stage", w, p.options.epochs_per_stage);
  read(j, "bn_epochs", w, p.options.bn_epochs);
  read(j, "aiwq_iterations", w, p.options.aiwq_iterations);
  read_opt(j, "aiwq_lr", w, p.options.aiwq_lr);
  read(j, "log_aiwq_iterations", w, p.options.log_aiwq_iterations);
  read(j, "freeze", w, p.options.freeze);
  return p;
}

KdConfig parse_kd(const json& j) {
  const std::string w = "kd";
  check_keys(j, w, {"teacher_checkpoint", "temperature", "weight", "teacher_epochs",
                    "teacher_width_mult"});
  KdConfig k;
  read_opt(j, "teacher_checkpoint", w, k.teacher_checkpoint);
  read(j, "temperature", w, k.temperature);
  read(j, "weight", w, k.weight);
  read(j, "teacher_epochs", w, k.teacher_epochs);
  read(j, "teacher_width_mult", w, k.teacher_width_mult);
  return k;
}

}  // namespace

NetConfig parse_net_config(const json& j) { return parse_net_block(j, nullptr); }

json to_json(const NetConfig& n) {
  json layers = json::array();
  for (const LayerSpec& s : n.layers) {
    layers.push_back({{"type", to_string(s.kind)},
                      {"out_channels", s.out_channels},
                      {"kernel", s.kernel},
                      {"stride", s.stride},
                      {"activation", to_string(s.activation)},
                      {"quantized", s.quantized}});
  }
  return {{"in_channels", n.in_channels},
          {"in_height", n.in_height},
          {"in_width", n.in_width},
          {"num_classes", n.num_classes},
          {"layers", layers}};
}

void RunConfig::validate() const {
  if (version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version) +
                      " (expected " + std::to_string(kConfigVersion) + ")");
  }
  try {
    net.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("net: ") + e.what());
  }
  if (data.source != "synth" && data.source != "idx") {
    throw ConfigError("data.source must be 'synth' or 'idx'");
  }
  if (data.source == "synth") {
    if (data.num_classes != net.num_classes) {
      throw ConfigError("data.num_classes does not match net.num_classes");
    }
    if (net.in_channels != 1 || net.in_height != data.synth.size ||
        net.in_width != data.synth.size) {
      throw ConfigError("net input shape does not match synthetic image size");
    }
  }
  if (train.options.batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  if (train.options.momentum < 0.0 || train.options.momentum >= 1.0) {
    throw ConfigError("train.momentum must be in [0,1)");
  }
  if (train.options.ema_decay &&
      (*train.options.ema_decay <= 0.0 || *train.options.ema_decay >= 1.0)) {
    throw ConfigError("train.ema_decay must be in (0,1)");
  }
  if (train.lr.base_lr < 0.0) throw ConfigError("train.base_lr must be >= 0");
  if (train.lr.warmup_fraction < 0.0 || train.lr.warmup_fraction >= 1.0) {
    throw ConfigError("train.warmup_fraction must be in [0,1)");
  }
  if (!bits.phases.empty()) {
    try {
      bits.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("bit_schedule: ") + e.what());
    }
  }
  if (profit.enabled) {
    if (bits.phases.empty()) throw ConfigError("profit requires a non-empty bit_schedule");
    std::size_t n = 0;
    for (const LayerSpec& s : net.layers) n += s.quantized ? 1 : 0;
    if (profit.options.n_profit < 1 || profit.options.n_profit > n) {
      throw ConfigError("profit.n_profit must be in [1, " + std::to_string(n) + "]");
    }
    if (profit.options.aiwq_iterations < 1) {
      throw ConfigError("profit.aiwq_iterations must be >= 1");
    }
  }
  if (kd) {
    if (kd->weight < 0.0 || kd->weight > 1.0) throw ConfigError("kd.weight must be in [0,1]");
    if (!(kd->temperature > 0.0)) throw ConfigError("kd.temperature must be > 0");
    if (kd->teacher_width_mult < 1) throw ConfigError("kd.teacher_width_mult must be >= 1");
  }
}

RunConfig parse_run_config(const json& j) {
  check_keys(j, "config", {"version", "name", "seed", "net", "data", "train", "quant",
                           "bit_schedule", "profit", "kd"});
  RunConfig c;
  if (!j.contains("version")) throw ConfigError("config: missing 'version'");
  read(j, "version", "config", c.version);
  if (c.version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  }
  read(j, "name", "config", c.name);
  read(j, "seed", "config", c.seed);
  if (!j.contains("net")) throw ConfigError("config: missing 'net'");
  c.net = parse_net_block(j["net"], &c.micro);
  if (j.contains("data")) c.data = parse_data(j["data"]);
  if (j.contains("train")) c.train = parse_train(j["train"]);
  if (j.contains("quant")) c.quant = parse_quant(j["quant"]);
  if (j.contains("bit_schedule")) c.bits = parse_bits(j["bit_schedule"]);
  if (j.contains("profit")) {
    c.profit = parse_profit(j["profit"]);
  } else if (c.bits.phases.empty()) {
    c.profit.enabled = false;
  }
  if (j.contains("kd") && !j["kd"].is_null()) c.kd = parse_kd(j["kd"]);
  c.profit.options.lr = c.train.lr;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json bits = json::array();
  for (const BitPhase& p : c.bits.phases) {
    bits.push_back({{"weight_bits", p.weight_bits}, {"act_bits", p.act_bits},
                    {"epochs", p.epochs}});
  }
  const auto& t = c.train;
  const auto& po = c.profit.options;
  json j = {
      {"version", c.version},
      {"name", c.name},
      {"seed", c.seed},
      {"net", c.micro ? json{{"micro_mobilenet", micro_to_json(*c.micro)}} : to_json(c.net)},
      {"data",
       {{"source", c.data.source},
        {"seed", c.data.seed},
        {"train_size", c.data.train_size},
        {"test_size", c.data.test_size},
        {"num_classes", c.data.num_classes},
        {"image_size", c.data.synth.size},
        {"noise", c.data.synth.noise},
        {"train_images", c.data.train_images},
        {"train_labels", c.data.train_labels},
        {"test_images", c.data.test_images},
        {"test_labels", c.data.test_labels}}},
      {"train",
       {{"batch_size", t.options.batch_size},
        {"momentum", t.options.momentum},
        {"weight_decay", t.options.weight_decay},
        {"ema_decay", t.options.ema_decay ? json(*t.options.ema_decay) : json(nullptr)},
        {"quant_lr_mult", t.options.quant_lr_mult},
        {"base_lr", t.lr.base_lr},
        {"warmup_fraction", t.lr.warmup_fraction},
        {"fp_epochs", t.fp_epochs}}},
      {"quant",
       {{"act_kind", to_string(c.quant.act_kind)},
        {"act_mode", to_string(c.quant.act_mode)},
        {"weight_learned", c.quant.weight_learned},
        {"first_layer_input_quantized", c.quant.first_layer_input_quantized},
        {"negative_padding", c.quant.negative_padding}}},
      {"bit_schedule", bits},
      {"profit",
       {{"enabled", c.profit.enabled},
        {"n_profit", po.n_profit},
        {"epochs_per_stage", po.epochs_per_stage},
        {"bn_epochs", po.bn_epochs},
        {"aiwq_iterations", po.aiwq_iterations},
        {"aiwq_lr", po.aiwq_lr ? json(*po.aiwq_lr) : json(nullptr)},
        {"log_aiwq_iterations", po.log_aiwq_iterations},
        {"freeze", po.freeze}}},
      {"kd", nullptr}};
  if (c.kd) {
    j["kd"] = {{"teacher_checkpoint",
                c.kd->teacher_checkpoint ? json(*c.kd->teacher_checkpoint) : json(nullptr)},
               {"temperature", c.kd->temperature},
               {"weight", c.kd->weight},
               {"teacher_epochs", c.kd->teacher_epochs},
               {"teacher_width_mult", c.kd->teacher_width_mult}};
  }
  return j;
}

NetConfig widen(const NetConfig& net, std::size_t mult) {
  NetConfig w = net;
  for (std::size_t i = 0; i + 1 < w.layers.size(); ++i) {
    if (w.layers[i].kind != LayerKind::depthwise) w.layers[i].out_channels *= mult;
  }
  w.validate();
  return w;
}

Splits load_data(const DataConfig& cfg) {
  Splits s;
  if (cfg.source == "synth") {
    s.train = synth_dataset(derive_seed(cfg.seed, 1), cfg.num_classes, cfg.train_size, cfg.synth);
    s.test = synth_dataset(derive_seed(cfg.seed, 2), cfg.num_classes, cfg.test_size, cfg.synth);
    return s;
  }
  if (cfg.source != "idx") throw ConfigError("unknown data source '" + cfg.source + "'");
  s.train = load_idx(cfg.train_images, cfg.train_labels);
  s.test = load_idx(cfg.test_images, cfg.test_labels);
  s.train.num_classes = s.test.num_classes =
      std::max({s.train.num_classes, s.test.num_classes, cfg.num_classes});
  return s;
}

Dataset load_data_spec(const std::string& spec, const std::string& labels_path,
                       std::size_t num_classes, const SynthOptions& synth) {
  if (spec.rfind("synth:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3 && parts.size() != 4) {
      throw ConfigError("synthetic data spec must be synth:SEED:N[:NOISE], got '" + spec + "'");
    }
    SynthOptions o = synth;
    try {
      const std::uint64_t seed = std::stoull(parts[1]);
      const std::size_t n = std::stoull(parts[2]);
      if (parts.size() == 4) o.noise = std::stod(parts[3]);
      return synth_dataset(seed, num_classes, n, o);
    } catch (const std::logic_error&) {
      throw ConfigError("bad number in data spec '" + spec + "'");
    }
  }
  if (labels_path.empty()) throw ConfigError("IDX data needs a labels file");
  Dataset d = load_idx(spec, labels_path);
  d.num_classes = std::max(d.num_classes, num_classes);
  return d;
}

}  // namespace pq
