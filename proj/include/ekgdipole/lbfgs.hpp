#pragma once

#include "ekgdipole/types.hpp"

#include <functional>

namespace ekgdipole::opt {

// Objective callback: returns f(x) and fills grad (same size as x).
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsParams {
  int memory = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // on the gradient infinity norm
  int max_line_search = 40;
  double armijo_c1 = 1e-4;
  double wolfe_c2 = 0.9;
};

struct LbfgsReport {
  bool converged = false;     // gradient tolerance reached
  int iterations = 0;         // accepted steps
  double objective = 0.0;     // final f
  double grad_inf_norm = 0.0;
};

// Minimizes f starting from x (updated in place). Every accepted step
// satisfies the Armijo condition, so f is non-increasing along the iterate
// sequence. Optional per-iteration callback receives (iteration, f, x).
LbfgsReport minimize(
    const Objective& objective, Vector& x, const LbfgsParams& params = {},
    const std::function<void(int, double, const Vector&)>& on_iteration = {});

}  // namespace ekgdipole::opt
