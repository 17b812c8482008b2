// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "pq/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pq {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

struct Dims4 {
  std::size_t n, c, h, w;
};

Dims4 dims4(const Tensor& t) {
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1), 1, 1};
  throw ShapeError("expected rank-2 or rank-4 tensor, got " +
                   shape_str(t.shape()));
}

void check_labels(std::span<const int> labels, std::size_t n, std::size_t k) {
  if (labels.size() != n) {
    throw ShapeError("label count " + std::to_string(labels.size()) +
                     " does not match batch " + std::to_string(n));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw Error("label " + std::to_string(y) + " out of range [0," +
                  std::to_string(k) + ")");
    }
  }
}

// Row-wise log-softmax of logits/temperature.
Tensor log_softmax_rows(const Tensor& logits, double temperature) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * k;
    double mx = row[0] / temperature;
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j] / temperature);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] / temperature - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = row[j] / temperature - lse;
  }
  return out;
}

template <class Fn, class DFn>
Var elementwise(const Var& x, Fn f, DFn df, const char* name) {
  Tensor out(x.shape());
  const auto in = x.value().data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  check_finite(out, name);
  return Var::make(std::move(out), {x}, [df](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    Tensor& g = px.grad_buffer();
    const auto xv = px.value.data();
    for (std::size_t i = 0; i < xv.size(); ++i) g[i] += self.grad[i] * df(xv[i]);
  });
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel,
                            std::size_t stride, std::size_t pad) {
  require(stride >= 1, "conv stride must be >= 1");
  require(in + 2 * pad >= kernel, "conv kernel larger than padded input");
  return (in + 2 * pad - kernel) / stride + 1;
}

Var conv2d(const Var& input, const Var& weight, const std::optional<Var>& bias,
           const Conv2dOptions& opts) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  require(x.rank() == 4, "conv2d input must be [N,C,H,W], got " + shape_str(x.shape()));
  require(w.rank() == 4, "conv2d weight must be [Cout,Cin/g,kh,kw], got " +
                             shape_str(w.shape()));
  const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Cout = w.dim(0), Cg = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  const std::size_t G = opts.groups;
  require(G >= 1 && Cin % G == 0 && Cout % G == 0,
          "conv2d groups must divide Cin and Cout");
  require(Cg == Cin / G, "conv2d weight has " + std::to_string(Cg) +
                             " input channels per group, expected " +
                             std::to_string(Cin / G));
  if (bias) {
    require(bias->value().numel() == Cout, "conv2d bias length must equal Cout");
  }
  const std::size_t OH = conv_out_extent(H, KH, opts.stride, opts.pad);
  const std::size_t OW = conv_out_extent(W, KW, opts.stride, opts.pad);
  const std::size_t S = opts.stride;
  const long P = static_cast<long>(opts.pad);
  const double pv = opts.pad_value;
  const std::size_t Og = Cout / G;

  Tensor out({N, Cout, OH, OW}, 0.0);
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* od = out.data().data();

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t oc = 0; oc < Cout; ++oc) {
      const std::size_t g = oc / Og;
      double* orow0 = od + (n * Cout + oc) * OH * OW;
      if (bias) {
        const double b = bias->value()[oc];
        for (std::size_t i = 0; i < OH * OW; ++i) orow0[i] = b;
      }
      for (std::size_t icg = 0; icg < Cg; ++icg) {
        const std::size_t ic = g * Cg + icg;
        const double* xc = xd + (n * Cin + ic) * H * W;
        for (std::size_t ky = 0; ky < KH; ++ky) {
          for (std::size_t kx = 0; kx < KW; ++kx) {
            const double wv = wd[((oc * Cg + icg) * KH + ky) * KW + kx];
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const long iy = static_cast<long>(oy * S + ky) - P;
              double* orow = orow0 + oy * OW;
              if (iy < 0 || iy >= static_cast<long>(H)) {
                if (pv != 0.0) {
                  for (std::size_t ox = 0; ox < OW; ++ox) orow[ox] += wv * pv;
                }
                continue;
              }
              const double* xrow = xc + iy * W;
              for (std::size_t ox = 0; ox < OW; ++ox) {
                const long ix = static_cast<long>(ox * S + kx) - P;
                if (ix < 0 || ix >= static_cast<long>(W)) {
                  orow[ox] += wv * pv;
                } else {
                  orow[ox] += wv * xrow[ix];
                }
              }
            }
          }
        }
      }
    }
  }
  check_finite(out, "conv2d");

  std::vector<Var> parents{input, weight};
  if (bias) parents.push_back(*bias);
  const bool has_bias = bias.has_value();
  return Var::make(std::move(out), std::move(parents), [=](Node& self) {
    Node& pin = *self.parents[0];
    Node& pw = *self.parents[1];
    const double* gd = self.grad.data().data();
    const double* xdv = pin.value.data().data();
    const double* wdv = pw.value.data().data();
    double* gx = pin.requires_grad ? pin.grad_buffer().data().data() : nullptr;
    double* gw = pw.requires_grad ? pw.grad_buffer().data().data() : nullptr;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t oc = 0; oc < Cout; ++oc) {
        const std::size_t g = oc / Og;
        const double* grow0 = gd + (n * Cout + oc) * OH * OW;
        for (std::size_t icg = 0; icg < Cg; ++icg) {
          const std::size_t ic = g * Cg + icg;
          const double* xc = xdv + (n * Cin + ic) * H * W;
          double* gxc = gx ? gx + (n * Cin + ic) * H * W : nullptr;
          for (std::size_t ky = 0; ky < KH; ++ky) {
            for (std::size_t kx = 0; kx < KW; ++kx) {
              const std::size_t widx = ((oc * Cg + icg) * KH + ky) * KW + kx;
              const double wv = wdv[widx];
              double acc = 0.0;
              for (std::size_t oy = 0; oy < OH; ++oy) {
                const long iy = static_cast<long>(oy * S + ky) - P;
                const double* grow = grow0 + oy * OW;
                if (iy < 0 || iy >= static_cast<long>(H)) {
                  if (pv != 0.0) {
                    for (std::size_t ox = 0; ox < OW; ++ox) acc += grow[ox] * pv;
                  }
                  continue;
                }
                for (std::size_t ox = 0; ox < OW; ++ox) {
                  const long ix = static_cast<long>(ox * S + kx) - P;
                  if (ix < 0 || ix >= static_cast<long>(W)) {
                    acc += grow[ox] * pv;
                  } else {
                    acc += grow[ox] * xc[iy * W + ix];
                    if (gxc) gxc[iy * W + ix] += wv * grow[ox];
                  }
                }
              }
              if (gw) gw[widx] += acc;
            }
          }
        }
      }
    }
    if (has_bias) {
      Node& pb = *self.parents[2];
      if (pb.requires_grad) {
        Tensor& gb = pb.grad_buffer();
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t oc = 0; oc < Cout; ++oc) {
            const double* grow = gd + (n * Cout + oc) * OH * OW;
            double s = 0.0;
            for (std::size_t i = 0; i < OH * OW; ++i) s += grow[i];
            gb[oc] += s;
          }
        }
      }
    }
  });
}

Var batch_norm(const Var& input, const Var& gamma, const Var& beta,
               Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& opts) {
  if (!(opts.eps > 0.0)) throw Error("batch_norm eps must be > 0");
  const Tensor& x = input.value();
  const Dims4 d = dims4(x);
  const std::size_t C = d.c, HW = d.h * d.w, M = d.n * HW;
  require(gamma.value().numel() == C && beta.value().numel() == C &&
              running_mean.numel() == C && running_var.numel() == C,
          "batch_norm parameter length must equal channel count");
  require(M >= 1, "batch_norm on empty input");

  Tensor mean(Shape{C}), inv_std(Shape{C});
  if (opts.training) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = x.data().data() + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(M);
      double v = 0.0;
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = x.data().data() + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) v += (p[i] - mu) * (p[i] - mu);
      }
      v /= static_cast<double>(M);
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(v + opts.eps);
      if (opts.update_running) {
        running_mean[c] = (1.0 - opts.momentum) * running_mean[c] + opts.momentum * mu;
        running_var[c] = (1.0 - opts.momentum) * running_var[c] + opts.momentum * v;
      }
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(running_var[c] + opts.eps);
    }
  }

  Tensor xhat(x.shape()), out(x.shape());
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * HW;
      const double g = gamma.value()[c], b = beta.value()[c];
      for (std::size_t i = 0; i < HW; ++i) {
        const double xh = (x[off + i] - mean[c]) * inv_std[c];
        xhat[off + i] = xh;
        out[off + i] = g * xh + b;
      }
    }
  }
  check_finite(out, "batch_norm");

  const bool training = opts.training;
  return Var::make(
      std::move(out), {input, gamma, beta},
      [d, C, HW, M, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const Tensor& gy = self.grad;
        std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
        for (std::size_t n = 0; n < d.n; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (n * C + c) * HW;
            for (std::size_t i = 0; i < HW; ++i) {
              sum_dy[c] += gy[off + i];
              sum_dy_xhat[c] += gy[off + i] * xhat[off + i];
            }
          }
        }
        if (pg.requires_grad) {
          Tensor& g = pg.grad_buffer();
          for (std::size_t c = 0; c < C; ++c) g[c] += sum_dy_xhat[c];
        }
        if (pb.requires_grad) {
          Tensor& g = pb.grad_buffer();
          for (std::size_t c = 0; c < C; ++c) g[c] += sum_dy[c];
        }
        if (!px.requires_grad) return;
        Tensor& gx = px.grad_buffer();
        const double m = static_cast<double>(M);
        for (std::size_t n = 0; n < d.n; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (n * C + c) * HW;
            const double k = pg.value[c] * inv_std[c];
            for (std::size_t i = 0; i < HW; ++i) {
              if (training) {
                gx[off + i] += k / m *
                               (m * gy[off + i] - sum_dy[c] -
                                xhat[off + i] * sum_dy_xhat[c]);
              } else {
                gx[off + i] += k * gy[off + i];
              }
            }
          }
        }
      });
}

Var relu(const Var& x) {
  return elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; }, "relu");
}

Var relu6(const Var& x) {
  return elementwise(
      x, [](double v) { return std::clamp(v, 0.0, 6.0); },
      [](double v) { return (v > 0.0 && v < 6.0) ? 1.0 : 0.0; }, "relu6");
}

double h_swish_value(double x) { return x * std::clamp(x + 3.0, 0.0, 6.0) / 6.0; }

Var h_swish(const Var& x) {
  return elementwise(
      x, h_swish_value,
      [](double v) {
        if (v <= -3.0) return 0.0;
        if (v >= 3.0) return 1.0;
        return (2.0 * v + 3.0) / 6.0;
      },
      "h_swish");
}

Var dense(const Var& x, const Var& weight, const std::optional<Var>& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require(xv.rank() == 2 && wv.rank() == 2, "dense expects [N,in] x [out,in]");
  const std::size_t N = xv.dim(0), In = xv.dim(1), Out = wv.dim(0);
  require(wv.dim(1) == In, "dense weight has " + std::to_string(wv.dim(1)) +
                               " inputs, expected " + std::to_string(In));
  if (bias) require(bias->value().numel() == Out, "dense bias length must equal out");
  Tensor out({N, Out});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < Out; ++o) {
      double s = bias ? bias->value()[o] : 0.0;
      for (std::size_t i = 0; i < In; ++i) s += wv[o * In + i] * xv[n * In + i];
      out[n * Out + o] = s;
    }
  }
  check_finite(out, "dense");
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(*bias);
  const bool has_bias = bias.has_value();
  return Var::make(std::move(out), std::move(parents), [=](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    const Tensor& g = self.grad;
    if (px.requires_grad) {
      Tensor& gx = px.grad_buffer();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Out; ++o)
          for (std::size_t i = 0; i < In; ++i)
            gx[n * In + i] += g[n * Out + o] * pw.value[o * In + i];
    }
    if (pw.requires_grad) {
      Tensor& gw = pw.grad_buffer();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Out; ++o)
          for (std::size_t i = 0; i < In; ++i)
            gw[o * In + i] += g[n * Out + o] * px.value[n * In + i];
    }
    if (has_bias && self.parents[2]->requires_grad) {
      Tensor& gb = self.parents[2]->grad_buffer();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Out; ++o) gb[o] += g[n * Out + o];
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& xv = x.value();
  require(xv.rank() == 4, "global_avg_pool expects [N,C,H,W]");
  const std::size_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  Tensor out({N, C});
  for (std::size_t i = 0; i < N * C; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < HW; ++j) s += xv[i * HW + j];
    out[i] = s / static_cast<double>(HW);
  }
  return Var::make(std::move(out), {x}, [N, C, HW](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    Tensor& gx = px.grad_buffer();
    for (std::size_t i = 0; i < N * C; ++i) {
      const double g = self.grad[i] / static_cast<double>(HW);
      for (std::size_t j = 0; j < HW; ++j) gx[i * HW + j] += g;
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return Var::make(std::move(out), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    Tensor& gx = px.grad_buffer();
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i];
  });
}

Var add(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "add shape mismatch");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var::make(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

Var scale(const Var& x, double s) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] * s;
  return Var::make(std::move(out), {x}, [s](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    Tensor& g = px.grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * s;
  });
}

Var weighted_sum(const Var& x, const Tensor& w) {
  require(x.value().same_shape(w), "weighted_sum shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < w.numel(); ++i) s += x.value()[i] * w[i];
  return Var::make(Tensor::scalar(s), {x}, [w](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    Tensor& g = px.grad_buffer();
    const double up = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up * w[i];
  });
}

Tensor softmax_rows(const Tensor& logits, double temperature) {
  Tensor out = log_softmax_rows(logits, temperature);
  for (auto& v : out.vec()) v = std::exp(v);
  return out;
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  require(z.rank() == 2, "softmax_cross_entropy expects [N,K] logits");
  const std::size_t N = z.dim(0), K = z.dim(1);
  check_labels(labels, N, K);
  const Tensor logp = log_softmax_rows(z, 1.0);
  double loss = 0.0;
  for (std::size_t n = 0; n < N; ++n) loss -= logp[n * K + labels[n]];
  loss /= static_cast<double>(N);
  std::vector<int> ys(labels.begin(), labels.end());
  return Var::make(Tensor::scalar(loss), {logits},
                   [N, K, ys = std::move(ys), logp](Node& self) {
                     Node& pz = *self.parents[0];
                     if (!pz.requires_grad) return;
                     Tensor& g = pz.grad_buffer();
                     const double up = self.grad[0] / static_cast<double>(N);
                     for (std::size_t n = 0; n < N; ++n) {
                       for (std::size_t k = 0; k < K; ++k) {
                         const double p = std::exp(logp[n * K + k]);
                         const double t = static_cast<int>(k) == ys[n] ? 1.0 : 0.0;
                         g[n * K + k] += up * (p - t);
                       }
                     }
                   });
}

Var kd_loss(const Var& student_logits, const Tensor& teacher_logits,
            std::span<const int> labels, double temperature, double weight) {
  const Tensor& s = student_logits.value();
  require(s.rank() == 2, "kd_loss expects [N,K] logits");
  require(s.same_shape(teacher_logits), "kd_loss student/teacher shape mismatch " +
                                            shape_str(s.shape()) + " vs " +
                                            shape_str(teacher_logits.shape()));
  if (!(temperature > 0.0)) throw Error("kd_loss temperature must be > 0");
  if (weight < 0.0 || weight > 1.0) throw Error("kd_loss weight must be in [0,1]");
  const std::size_t N = s.dim(0), K = s.dim(1);
  check_labels(labels, N, K);
  const double T = temperature;
  const Tensor pt = softmax_rows(teacher_logits, T);
  const Tensor log_qs = log_softmax_rows(s, T);
  const Tensor log_p = log_softmax_rows(s, 1.0);
  double soft = 0.0, hard = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) soft -= pt[n * K + k] * log_qs[n * K + k];
    hard -= log_p[n * K + labels[n]];
  }
  const double loss =
      (weight * T * T * soft + (1.0 - weight) * hard) / static_cast<double>(N);
  std::vector<int> ys(labels.begin(), labels.end());
  return Var::make(
      Tensor::scalar(loss), {student_logits},
      [=, ys = std::move(ys)](Node& self) {
        Node& pz = *self.parents[0];
        if (!pz.requires_grad) return;
        Tensor& g = pz.grad_buffer();
        const double up = self.grad[0] / static_cast<double>(N);
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t k = 0; k < K; ++k) {
            const std::size_t i = n * K + k;
            const double soft_g = weight * T * (std::exp(log_qs[i]) - pt[i]);
            const double t = static_cast<int>(k) == ys[n] ? 1.0 : 0.0;
            const double hard_g = (1.0 - weight) * (std::exp(log_p[i]) - t);
            g[i] += up * (soft_g + hard_g);
          }
        }
      });
}

}  // namespace pq
