#pragma once

#include <span>
#include <vector>

#include "nlnet/image.hpp"
#include "nlnet/matrix.hpp"
#include "nlnet/network.hpp"

namespace nlnet {

/// Negative PSNR, in dB.
double loss(const ImageTensor& yhat, const ImageTensor& x);

/// d loss / d yhat = (20 / ln 10) (yhat - x) / ||yhat - x||^2.
ImageTensor loss_grad(const ImageTensor& yhat, const ImageTensor& x);

/// Gradient of a scalar loss with respect to one stage's parameters and its input.
struct StageGrads {
  double d_gamma = 0.0;
  Matrix d_transform;               ///< same shape as F
  std::vector<double> d_weights;    ///< K entries
  std::vector<double> d_mixture;    ///< same layout as RBFMixture::values()
  ImageTensor d_input;              ///< d loss / d z, for chaining stages
};

/// Reverse pass of stage_forward given d loss / d output.
///
/// With e = mask * upstream, E = L e, Z = L z and Psi = psi(Z):
///   d gamma = (y - z)^T e
///   d pi_ij = -sum_r rho_j(Z_ri) E_ri
///   d w_k   = -sum_r ( <F e_{i_rk}, Psi_r> + <psi'(Z_r) E_r, F z_{i_rk}> )
///   d F     = -sum_r ( Psi_r e~_r^T + (psi'(Z_r) E_r) z~_r^T ),
///             e~_r = sum_k w_k e_{i_rk},  z~_r = sum_k w_k z_{i_rk}
///   d z     = (1 - gamma) e - L^T( psi'(Z) E )
/// Color stages sum gamma, F and w contributions over the three channels.
StageGrads stage_backward(const StageTape& tape, const ImageTensor& upstream, const StageParams& params,
                          const GroupIndexSet& groups, const PatchGeometry& geom);

/// Loss of the network output against the clean image (RGB for color models).
double network_loss(const Model& model, const ImageTensor& network_output, const ImageTensor& clean);

/// Reverse sweep through all stages, seeded with loss_grad at the final output.
std::vector<StageGrads> network_backward(const std::vector<StageTape>& tapes, const ImageTensor& clean,
                                         const Model& model);

/// Parameter vector layout used by the optimizer and the model file, per stage:
/// gamma, F row-major, w, pi (channel, then coefficient, then kernel).
std::size_t parameter_count(const StageParams& params);
void append_parameters(const StageParams& params, std::vector<double>& out);
/// Reads parameter_count(params) values from `in` into `params`; returns the count consumed.
std::size_t assign_parameters(std::span<const double> in, StageParams& params);
void append_gradient(const StageGrads& grads, std::vector<double>& out);

}  // namespace nlnet
