#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nlnet/matrix.hpp"

namespace nlnet {

/// M Gaussian kernels with equispaced centers spanning [-delta, delta] and a
/// shared precision.
struct RBFGrid {
  int kernels = 63;
  double delta = 100.0;
  double precision = 0.0;

  double spacing() const noexcept { return 2.0 * delta / (kernels - 1); }
  double center(int j) const noexcept { return -delta + j * spacing(); }
  void validate() const;

  /// Default precision ln 2 / spacing^2: neighbouring kernels cross at half height.
  static RBFGrid make(int kernels, double delta, std::optional<double> precision = std::nullopt);

  bool operator==(const RBFGrid&) const = default;
};

/// Expansion coefficients pi[channel][coeff][kernel] of the shrinkage
/// functions psi_{channel,coeff}(x) = sum_j pi_j exp(-precision (x - mu_j)^2).
class RBFMixture {
 public:
  RBFMixture() = default;
  RBFMixture(const RBFGrid& grid, int channels, int coeffs);

  const RBFGrid& grid() const noexcept { return grid_; }
  int channels() const noexcept { return channels_; }
  int coeffs() const noexcept { return coeffs_; }

  std::span<double> weights(int channel, int coeff);
  std::span<const double> weights(int channel, int coeff) const;
  std::vector<double>& values() noexcept { return pi_; }
  const std::vector<double>& values() const noexcept { return pi_; }

  double eval(int channel, int coeff, double x) const;
  double deriv(int channel, int coeff, double x) const;
  /// psi and psi' at x in one pass over the kernels.
  void eval_with_deriv(int channel, int coeff, double x, double& value, double& slope) const;
  /// Kernel responses rho_j(x) = exp(-precision (x - mu_j)^2), j = 0..M-1.
  void kernel_responses(double x, std::span<double> rho) const;

  void validate() const;
  bool operator==(const RBFMixture&) const = default;

 private:
  void check(int channel, int coeff) const;

  RBFGrid grid_;
  int channels_ = 0;
  int coeffs_ = 0;
  std::vector<double> pi_;
  std::vector<double> centers_;
};

double rbf_eval(const RBFMixture& mix, int channel, int coeff, double x);
double rbf_deriv(const RBFMixture& mix, int channel, int coeff, double x);

/// Elementwise psi on a coefficient field; column i uses mixture (channel, i).
Matrix apply_psi(const RBFMixture& mix, int channel, const Matrix& z);
Matrix apply_psi_deriv(const RBFMixture& mix, int channel, const Matrix& z);

/// Least-squares fit of slope * x over 512 equispaced samples of [-delta, delta].
/// Throws NumericError if the normal equations are not positive definite.
std::vector<double> fit_linear_init(const RBFGrid& grid, double slope);

}  // namespace nlnet
