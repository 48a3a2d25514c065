// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "perbranch/common.hpp"

namespace perbranch {

struct NelderMeadOptions {
  double initial_step = 0.1;
  double x_tol = 1e-9;
  double f_tol = 1e-12;
  int max_evaluations = 2000;
};

struct NelderMeadResult {
  Vec x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f from `start` with the standard reflection/expansion/contraction/shrink moves.
NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& start,
                             const NelderMeadOptions& options = {});

/// Golden-section minimization of a unimodal function on [lo, hi].
double golden_section_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12);

}  // namespace perbranch
