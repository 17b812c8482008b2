// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "pq/random.hpp"

namespace pq {

namespace {

constexpr std::uint8_t kUbyte = 0x08;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open IDX file " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

struct IdxHeader {
  std::vector<std::size_t> dims;
  std::size_t offset = 0;
};

IdxHeader parse_header(const std::vector<std::uint8_t>& bytes,
                       const std::filesystem::path& path) {
  if (bytes.size() < 4) throw IdxError(path.string() + ": truncated IDX header");
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw IdxError(path.string() + ": bad IDX magic");
  }
  if (bytes[2] != kUbyte) {
    throw IdxError(path.string() + ": unsupported IDX element type " +
                   std::to_string(bytes[2]));
  }
  IdxHeader h;
  const std::size_t ndim = bytes[3];
  if (ndim == 0) throw IdxError(path.string() + ": IDX with zero dimensions");
  h.offset = 4 + 4 * ndim;
  if (bytes.size() < h.offset) throw IdxError(path.string() + ": truncated IDX header");
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::uint8_t* p = bytes.data() + 4 + 4 * i;
    h.dims.push_back((std::size_t{p[0]} << 24) | (std::size_t{p[1]} << 16) |
                     (std::size_t{p[2]} << 8) | std::size_t{p[3]});
  }
  const std::size_t count = shape_numel(h.dims);
  if (bytes.size() - h.offset < count) {
    throw IdxError(path.string() + ": truncated IDX payload (expected " +
                   std::to_string(count) + " bytes, found " +
                   std::to_string(bytes.size() - h.offset) + ")");
  }
  return h;
}

void write_header(std::ofstream& out, const std::vector<std::size_t>& dims) {
  const char magic[4] = {0, 0, static_cast<char>(kUbyte), static_cast<char>(dims.size())};
  out.write(magic, 4);
  for (std::size_t d : dims) {
    const char be[4] = {static_cast<char>((d >> 24) & 0xff), static_cast<char>((d >> 16) & 0xff),
                        static_cast<char>((d >> 8) & 0xff), static_cast<char>(d & 0xff)};
    out.write(be, 4);
  }
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  const Shape item = item_shape();
  const std::size_t stride = shape_numel(item);
  Shape shape{indices.size()};
  shape.insert(shape.end(), item.begin(), item.end());
  Dataset out;
  out.images = Tensor(shape);
  out.labels.reserve(indices.size());
  out.num_classes = num_classes;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= size()) throw Error("dataset index out of range");
    std::copy_n(images.data().begin() + src * stride, stride,
                out.images.data().begin() + i * stride);
    out.labels.push_back(labels[src]);
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = begin; i < std::min(end, size()); ++i) idx.push_back(i);
  return subset(idx);
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  const IdxHeader ih = parse_header(ib, images);
  const IdxHeader lh = parse_header(lb, labels);
  if (ih.dims.size() != 3 && ih.dims.size() != 4) {
    throw IdxError(images.string() + ": image file must have 3 or 4 dimensions");
  }
  if (lh.dims.size() != 1) throw IdxError(labels.string() + ": label file must have 1 dimension");
  if (ih.dims[0] != lh.dims[0]) {
    throw IdxError("image count " + std::to_string(ih.dims[0]) +
                   " does not match label count " + std::to_string(lh.dims[0]));
  }
  Shape shape = ih.dims.size() == 3 ? Shape{ih.dims[0], 1, ih.dims[1], ih.dims[2]}
                                    : Shape{ih.dims[0], ih.dims[1], ih.dims[2], ih.dims[3]};
  Dataset d;
  d.images = Tensor(shape);
  for (std::size_t i = 0; i < d.images.numel(); ++i) {
    d.images[i] = static_cast<double>(ib[ih.offset + i]) / 255.0;
  }
  int max_label = -1;
  for (std::size_t i = 0; i < lh.dims[0]; ++i) {
    d.labels.push_back(lb[lh.offset + i]);
    max_label = std::max(max_label, d.labels.back());
  }
  d.num_classes = static_cast<std::size_t>(max_label + 1);
  return d;
}

void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  const Shape& s = data.images.shape();
  if (s.size() != 4) throw ShapeError("write_idx expects [N,C,H,W] images");
  std::ofstream io(images, std::ios::binary);
  std::ofstream lo(labels, std::ios::binary);
  if (!io || !lo) throw IdxError("cannot open IDX output files");
  write_header(io, s[1] == 1 ? std::vector<std::size_t>{s[0], s[2], s[3]} : s);
  for (double v : data.images.data()) {
    io.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  write_header(lo, {data.size()});
  for (int y : data.labels) {
    if (y < 0 || y > 255) throw IdxError("label does not fit in a ubyte");
    lo.put(static_cast<char>(y));
  }
}

Dataset synth_dataset(std::uint64_t seed, std::size_t num_classes, std::size_t n,
                      const SynthOptions& opts) {
  if (num_classes < 2) throw Error("synth_dataset needs at least 2 classes");
  if (n < num_classes) throw Error("synth_dataset needs n >= num_classes");
  const std::size_t S = opts.size;
  const std::size_t orientations = (num_classes + 1) / 2;
  Rng rng(seed);
  Dataset d;
  d.num_classes = num_classes;
  d.images = Tensor({n, 1, S, S});
  d.labels.resize(n);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % num_classes;
    d.labels[i] = static_cast<int>(k);
    const double theta = pi * static_cast<double>(k % orientations) /
                         static_cast<double>(orientations);
    const double freq = k < orientations ? 1.0 / 8.0 : 1.0 / 4.0;
    const double phase = rng.uniform(0.0, 2.0 * pi);
    const double contrast = rng.uniform(0.5, 1.0);
    const double c = std::cos(theta), s = std::sin(theta);
    double* img = d.images.data().data() + i * S * S;
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const double u = static_cast<double>(x) * c + static_cast<double>(y) * s;
        const double v = 0.5 + 0.25 * contrast * std::cos(2.0 * pi * freq * u + phase) +
                         opts.noise * rng.normal();
        img[y * S + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return d;
}

}  // namespace pq
