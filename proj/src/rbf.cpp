#include "nlnet/rbf.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nlnet/errors.hpp"

namespace nlnet {

void RBFGrid::validate() const {
  if (kernels < 2) throw std::invalid_argument("RBFGrid: at least two kernels are required");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("RBFGrid: delta must be positive");
  if (!(precision > 0.0) || !std::isfinite(precision))
    throw std::invalid_argument("RBFGrid: precision must be positive");
}

RBFGrid RBFGrid::make(int kernels, double delta, std::optional<double> precision) {
  RBFGrid g;
  g.kernels = kernels;
  g.delta = delta;
  g.precision = 1.0;
  if (kernels >= 2 && delta > 0.0) {
    const double h = g.spacing();
    g.precision = precision.value_or(std::numbers::ln2 / (h * h));
  }
  g.validate();
  return g;
}

RBFMixture::RBFMixture(const RBFGrid& grid, int channels, int coeffs)
    : grid_(grid), channels_(channels), coeffs_(coeffs) {
  grid_.validate();
  if (channels < 1 || coeffs < 1) throw std::invalid_argument("RBFMixture: channel and coefficient counts must be >= 1");
  pi_.assign(static_cast<std::size_t>(channels) * coeffs * grid.kernels, 0.0);
  centers_.resize(static_cast<std::size_t>(grid.kernels));
  for (int j = 0; j < grid.kernels; ++j) centers_[j] = grid.center(j);
}

void RBFMixture::check(int channel, int coeff) const {
  if (channel < 0 || channel >= channels_ || coeff < 0 || coeff >= coeffs_)
    throw std::invalid_argument("RBFMixture: channel or coefficient index out of range");
}

std::span<double> RBFMixture::weights(int channel, int coeff) {
  check(channel, coeff);
  return {pi_.data() + (static_cast<std::size_t>(channel) * coeffs_ + coeff) * grid_.kernels,
          static_cast<std::size_t>(grid_.kernels)};
}

std::span<const double> RBFMixture::weights(int channel, int coeff) const {
  check(channel, coeff);
  return {pi_.data() + (static_cast<std::size_t>(channel) * coeffs_ + coeff) * grid_.kernels,
          static_cast<std::size_t>(grid_.kernels)};
}

double RBFMixture::eval(int channel, int coeff, double x) const {
  const auto pi = weights(channel, coeff);
  double s = 0.0;
  for (int j = 0; j < grid_.kernels; ++j) {
    const double d = x - centers_[j];
    s += pi[j] * std::exp(-grid_.precision * d * d);
  }
  return s;
}

double RBFMixture::deriv(int channel, int coeff, double x) const {
  const auto pi = weights(channel, coeff);
  double s = 0.0;
  for (int j = 0; j < grid_.kernels; ++j) {
    const double d = x - centers_[j];
    s += pi[j] * d * std::exp(-grid_.precision * d * d);
  }
  return -2.0 * grid_.precision * s;
}

void RBFMixture::eval_with_deriv(int channel, int coeff, double x, double& value, double& slope) const {
  const auto pi = weights(channel, coeff);
  double v = 0.0;
  double s = 0.0;
  for (int j = 0; j < grid_.kernels; ++j) {
    const double d = x - centers_[j];
    const double term = pi[j] * std::exp(-grid_.precision * d * d);
    v += term;
    s += term * d;
  }
  value = v;
  slope = -2.0 * grid_.precision * s;
}

void RBFMixture::kernel_responses(double x, std::span<double> rho) const {
  if (rho.size() != centers_.size()) throw std::invalid_argument("kernel_responses: output length must equal M");
  for (std::size_t j = 0; j < rho.size(); ++j) {
    const double d = x - centers_[j];
    rho[j] = std::exp(-grid_.precision * d * d);
  }
}

void RBFMixture::validate() const {
  grid_.validate();
  if (pi_.size() != static_cast<std::size_t>(channels_) * coeffs_ * grid_.kernels)
    throw std::invalid_argument("RBFMixture: coefficient array has the wrong length");
  for (const double v : pi_)
    if (!std::isfinite(v)) throw std::invalid_argument("RBFMixture: non-finite coefficient");
}

double rbf_eval(const RBFMixture& mix, int channel, int coeff, double x) { return mix.eval(channel, coeff, x); }

double rbf_deriv(const RBFMixture& mix, int channel, int coeff, double x) { return mix.deriv(channel, coeff, x); }

namespace {

template <class Fn>
Matrix map_columns(const RBFMixture& mix, int channel, const Matrix& z, Fn fn) {
  if (z.cols() != static_cast<std::size_t>(mix.coeffs()))
    throw std::invalid_argument("apply_psi: field column count must equal the mixture coefficient count");
  if (channel < 0 || channel >= mix.channels()) throw std::invalid_argument("apply_psi: channel out of range");
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t i = 0; i < z.cols(); ++i) out(r, i) = fn(static_cast<int>(i), z(r, i));
  return out;
}

}  // namespace

Matrix apply_psi(const RBFMixture& mix, int channel, const Matrix& z) {
  return map_columns(mix, channel, z, [&](int i, double x) { return mix.eval(channel, i, x); });
}

Matrix apply_psi_deriv(const RBFMixture& mix, int channel, const Matrix& z) {
  return map_columns(mix, channel, z, [&](int i, double x) { return mix.deriv(channel, i, x); });
}

std::vector<double> fit_linear_init(const RBFGrid& grid, double slope) {
  grid.validate();
  constexpr int kSamples = 512;
  const int m = grid.kernels;
  Eigen::MatrixXd basis(kSamples, m);
  Eigen::VectorXd target(kSamples);
  for (int s = 0; s < kSamples; ++s) {
    const double x = -grid.delta + 2.0 * grid.delta * s / (kSamples - 1);
    target(s) = slope * x;
    for (int j = 0; j < m; ++j) {
      const double d = x - grid.center(j);
      basis(s, j) = std::exp(-grid.precision * d * d);
    }
  }
  const Eigen::MatrixXd normal = basis.transpose() * basis;
  const Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) throw NumericError("fit_linear_init: normal equations are not positive definite");
  const Eigen::VectorXd pi = llt.solve(basis.transpose() * target);
  if (!pi.allFinite()) throw NumericError("fit_linear_init: non-finite solution");
  return {pi.data(), pi.data() + pi.size()};
}

}  // namespace nlnet
