// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference checks of the autograd ops. Each builder draws a
// random problem: a scalar loss over some inputs, an optional replacement
// function for the numeric side (straight-through surrogates) and an
// admissibility test that keeps points away from kinks.

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pq/autograd.hpp"
#include "pq/random.hpp"

namespace pq::gradcheck {

inline constexpr double kStep = 1e-5;
inline constexpr double kKinkMargin = 1e-3;

/// |a - n| / max(|a|, |n|, 1e-6)
double rel_error(double analytic, double numeric);

struct Problem {
  std::vector<Tensor> inputs;
  std::vector<bool> check;  // which inputs receive gradient checks
  std::function<Var(const std::vector<Var>&)> loss;
  /// Value differentiated numerically when perturbing input k. Defaults to
  /// the loss itself.
  std::function<double(const std::vector<Tensor>&, std::size_t k)> numeric;
  /// False when the inputs sit within the kink margin of a non-smooth point.
  std::function<bool(const std::vector<Tensor>&)> admissible;
};

using Builder = std::function<Problem(Rng&)>;

struct Result {
  std::string op;
  std::size_t points = 0;
  double max_rel = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Checks at least `points` admissible coordinates drawn from fresh problems.
Result run(const std::string& op, const Builder& build, std::size_t points, Rng& rng,
           std::size_t coords_per_problem = 10);

/// Every differentiable op with its builder.
std::vector<std::pair<std::string, Builder>> all_ops();

}  // namespace pq::gradcheck
