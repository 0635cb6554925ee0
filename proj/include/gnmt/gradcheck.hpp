// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gnmt/model.hpp"

namespace gnmt {

struct GradCheckConfig {
  int trials = 6;
  std::uint64_t seed = 7;
  double step = 1e-3;        // stencil spacing
  double tolerance = 1e-4;   // max relative error
  double abs_floor = 1e-6;   // denominators never drop below this
  double init_scale = 0.5;   // weights drawn from U[-s, s] so nonlinearities are exercised
  bool corrupt = false;      // negative control: perturbs one analytic gradient
};

struct GradCheckTensor {
  std::string name;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
};

struct GradCheckTrial {
  ModelConfig config;
  TokenSeq source, target;
  bool clipped = false;
  std::vector<GradCheckTensor> tensors;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckTrial> trials;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
  void print(std::ostream& out) const;
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Fourth-order central difference of f at the current value of *x.
double central_difference(const std::function<double()>& f, double& x, double h);

/// Randomized full-model check: 2-4 layers, hidden <= 8, vocab <= 12.
GradCheckReport run_gradcheck(const GradCheckConfig& config);

}  // namespace gnmt
