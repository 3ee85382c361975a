#pragma once

#include <functional>
#include <span>
#include <vector>

namespace nlnet {

/// Returns f(x) and writes grad f(x) into `grad` (same length as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  int max_iters = 100;
  int history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  double grad_tol = 1e-9;
  int max_line_evals = 30;
};

struct LbfgsIteration {
  int iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct LbfgsResult {
  std::vector<double> x;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;  ///< gradient tolerance reached
};

/// Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search.
/// Returns the best iterate seen. Throws NumericError naming the iteration and
/// step when the objective or gradient is not finite.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0, const LbfgsOptions& options = {},
                           const std::function<void(const LbfgsIteration&)>& on_iteration = {});

}  // namespace nlnet
