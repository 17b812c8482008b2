// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pq {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'Q', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 40;

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), {});
  }

  void read(void* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(path_.string() + ": truncated checkpoint");
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  template <class T>
  T get() {
    T v;
    read(&v, sizeof(T));
    return v;
  }

  std::string str(std::uint64_t n) {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(path_.string() + ": truncated checkpoint");
    }
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::filesystem::path path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string meta = ckpt.meta.dump();
    put<std::uint64_t>(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put<std::uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
      out.write(reinterpret_cast<const char*>(t.data().data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) throw CheckpointError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  Checkpoint c;
  try {
    c.meta = json::parse(r.str(r.get<std::uint64_t>()));
  } catch (const json::parse_error& e) {
    throw CheckpointError(path.string() + ": bad metadata: " + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  if (count > kMaxCount) throw CheckpointError(path.string() + ": implausible tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(r.get<std::uint64_t>());
      numel *= shape.back();
      if (numel > kMaxCount) throw CheckpointError(path.string() + ": implausible tensor size");
    }
    Tensor t(shape);
    r.read(t.data().data(), t.numel() * sizeof(double));
    if (!c.tensors.emplace(std::move(name), std::move(t)).second) {
      throw CheckpointError(path.string() + ": duplicate tensor name");
    }
  }
  if (!r.done()) throw CheckpointError(path.string() + ": trailing bytes after last tensor");
  return c;
}

Checkpoint make_checkpoint(const Trainer& trainer, const RunConfig& run) {
  Checkpoint c;
  const Network& net = trainer.network();
  c.tensors = net.state_dict();
  for (const auto& [name, s] : trainer.sgd_states()) {
    if (!s.velocity.empty()) c.tensors["sgd/" + name] = s.velocity;
  }
  for (const auto& [name, e] : trainer.ema_states()) c.tensors["ema/" + name] = e.shadow;
  std::vector<std::size_t> frozen(trainer.frozen_layers().begin(),
                                  trainer.frozen_layers().end());
  // The trainer's own options and quantizer policy win over the run config.
  RunConfig saved = run;
  saved.train.options = trainer.options();
  saved.quant = net.quant_config();
  c.meta = {{"format", "pq-checkpoint"},
            {"config", to_json(saved)},
            {"net", to_json(net.config())},
            {"weight_bits", net.quant_config().weight_bits},
            {"act_bits", net.quant_config().act_bits},
            {"frozen_layers", frozen},
            {"rng", trainer.rng().serialize()},
            {"step", trainer.steps_taken()},
            {"epoch", trainer.epochs_trained()}};
  return c;
}

namespace {

Network network_from(const Checkpoint& ckpt, const RunConfig& run) {
  Network net(parse_net_config(ckpt.meta.at("net")), 0);
  net.configure_quantization(run.quant);
  net.set_bits(ckpt.meta.at("weight_bits").get<int>(), ckpt.meta.at("act_bits").get<int>());
  std::map<std::string, Tensor> state;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.find('/') == std::string::npos) state.emplace(name, t);
  }
  net.load_state_dict(state);
  return net;
}

RunConfig run_from(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("config")) throw CheckpointError("checkpoint has no run config");
  return parse_run_config(ckpt.meta.at("config"));
}

}  // namespace

Trainer restore_trainer(const Checkpoint& ckpt, RunConfig* out) {
  try {
    const RunConfig run = run_from(ckpt);
    Trainer t(network_from(ckpt, run), run.train.options, 0);
    t.rng().deserialize(ckpt.meta.at("rng").get<std::string>());
    t.set_counters(ckpt.meta.at("epoch").get<std::size_t>(),
                   ckpt.meta.at("step").get<std::size_t>());
    for (std::size_t id : ckpt.meta.at("frozen_layers").get<std::vector<std::size_t>>()) {
      t.freeze_layer(id);
    }
    for (const auto& [name, tensor] : ckpt.tensors) {
      if (name.rfind("sgd/", 0) == 0) {
        SgdState& s = t.sgd_states()[name.substr(4)];
        s.momentum = run.train.options.momentum;
        s.velocity = tensor;
      } else if (name.rfind("ema/", 0) == 0) {
        t.ema_states()[name.substr(4)] =
            EmaState{run.train.options.ema_decay.value_or(0.5), tensor};
      }
    }
    if (out) *out = run;
    return t;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint metadata: ") + e.what());
  }
}

Network restore_network(const Checkpoint& ckpt, bool use_ema) {
  Trainer t = restore_trainer(ckpt);
  if (!use_ema) return t.network();
  if (t.ema_states().empty()) throw CheckpointError("checkpoint has no EMA shadows");
  return t.ema_network();
}

}  // namespace pq
