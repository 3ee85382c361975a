#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlnet/autodiff.hpp"

namespace nlnet {

struct GradcheckClass {
  std::string name;  ///< gamma, pi, w, F or input
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradcheckReport {
  double tolerance = 1e-5;
  std::vector<GradcheckClass> classes;

  bool passed() const;
  /// One line per class: "name max_rel_error checked pass|FAIL".
  std::string text() const;
};

struct GradcheckOptions {
  std::uint64_t seed = 1;
  double tolerance = 1e-5;
  /// Applied to every analytic StageGrads before comparison (test fixture hook).
  std::function<void(StageGrads&)> tamper;
};

/// Central finite differences (base step 1e-4 max(1, |theta|), combined with
/// the half step by Richardson extrapolation) against stage_backward (one
/// stage, including the input gradient) and network_backward (two stages),
/// for grayscale and color, on seeded random 24x24 instances with 5x5
/// patches and K = 4. All gamma and w entries are checked; F, pi and input
/// entries are a seeded sample plus the largest-magnitude entries.
///
/// Relative error is |a - n| / max(|a|, |n|, 1e-4), so entries that vanish up
/// to rounding are held to an absolute error of 1e-9.
GradcheckReport gradcheck(const GradcheckOptions& options = {});

}  // namespace nlnet
