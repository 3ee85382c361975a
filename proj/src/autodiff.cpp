#include "nlnet/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nlnet/errors.hpp"
#include "nlnet/nonlocal.hpp"
#include "nlnet/parallel.hpp"
#include "nlnet/patches.hpp"

namespace nlnet {

double loss(const ImageTensor& yhat, const ImageTensor& x) { return -psnr(yhat, x); }

ImageTensor loss_grad(const ImageTensor& yhat, const ImageTensor& x) {
  if (!yhat.same_shape(x) || yhat.size() != x.size()) throw std::invalid_argument("loss_grad: dimension mismatch");
  if (yhat.peak != x.peak) throw std::invalid_argument("loss_grad: peak mismatch");
  ImageTensor g(yhat.height, yhat.width, yhat.channels, yhat.peak);
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    g.data[i] = yhat.data[i] - x.data[i];
    sq += g.data[i] * g.data[i];
  }
  if (sq == 0.0) throw InfinitePsnrError("loss_grad: prediction equals the target");
  const double scale = 20.0 / std::numbers::ln10 / sq;
  for (double& v : g.data) v *= scale;
  return g;
}

namespace {

struct PlaneGrads {
  double d_gamma = 0.0;
  Matrix d_transform;
  std::vector<double> d_weights;
  std::vector<double> d_mixture;  // this channel's block only
  ImageTensor d_input;
};

PlaneGrads plane_backward(const ImageTensor& e, const ImageTensor& z, const ImageTensor& y, const ChannelTape& tape,
                          const StageParams& params, int channel, const GroupIndexSet& groups,
                          const PatchGeometry& geom) {
  const RBFMixture& mix = params.mixture;
  const std::size_t rows = groups.count();
  const std::size_t fc = static_cast<std::size_t>(params.transform.coeff_count());
  const int m = mix.grid().kernels;

  PlaneGrads out;
  for (std::size_t p = 0; p < e.size(); ++p) out.d_gamma += (y.data[p] - z.data[p]) * e.data[p];

  const Matrix e_patches = extract_patches(e, geom);
  const CoeffField e_coeffs = multiply_transposed(e_patches, params.transform.matrix);
  const CoeffField e_group = group_combine(e_coeffs, params.weights, groups);

  CoeffField shrunk(rows, fc);
  CoeffField back(rows, fc);  // psi'(Z) * E
  out.d_mixture.assign(fc * static_cast<std::size_t>(m), 0.0);
  std::vector<double> rho(static_cast<std::size_t>(m));
  const double precision = mix.grid().precision;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < fc; ++i) {
      const double zr = tape.group_coeffs(r, i);
      const double er = e_group(r, i);
      const auto pi = mix.weights(channel, static_cast<int>(i));
      mix.kernel_responses(zr, rho);
      double value = 0.0;
      double slope = 0.0;
      double* dpi = out.d_mixture.data() + i * m;
      for (int j = 0; j < m; ++j) {
        const double term = pi[j] * rho[j];
        value += term;
        slope += term * (zr - mix.grid().center(j));
        dpi[j] -= rho[j] * er;
      }
      shrunk(r, i) = value;
      back(r, i) = -2.0 * precision * slope * er;
    }
  }

  // Weighted-sum coefficients.
  const int k_count = groups.group_size;
  out.d_weights.assign(static_cast<std::size_t>(k_count), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto g = groups.group(r);
    const auto psi_r = shrunk.row(r);
    const auto back_r = back.row(r);
    for (int k = 0; k < k_count; ++k) {
      const auto idx = static_cast<std::size_t>(g[k]);
      const auto fe = e_coeffs.row(idx);
      const auto fz = tape.patch_coeffs.row(idx);
      double s = 0.0;
      for (std::size_t i = 0; i < fc; ++i) s += fe[i] * psi_r[i] + back_r[i] * fz[i];
      out.d_weights[k] -= s;
    }
  }

  // Patch transform and input, through the scattered (adjoint-side) fields.
  const CoeffField shrunk_scatter = group_combine_adjoint(shrunk, params.weights, groups);
  const CoeffField back_scatter = group_combine_adjoint(back, params.weights, groups);
  const Matrix z_patches = extract_patches(z, geom);
  out.d_transform = transposed_multiply(shrunk_scatter, e_patches);
  const Matrix forward_part = transposed_multiply(back_scatter, z_patches);
  for (std::size_t t = 0; t < out.d_transform.size(); ++t)
    out.d_transform.values()[t] = -(out.d_transform.values()[t] + forward_part.values()[t]);

  const ImageTensor reg = transform_patches_adjoint(back_scatter, params.transform, geom, e.height, e.width, e.peak);
  out.d_input = ImageTensor(e.height, e.width, 1, e.peak);
  const double keep = 1.0 - params.gamma;
  for (std::size_t p = 0; p < e.size(); ++p) out.d_input.data[p] = keep * e.data[p] - reg.data[p];
  return out;
}

}  // namespace

StageGrads stage_backward(const StageTape& tape, const ImageTensor& upstream, const StageParams& params,
                          const GroupIndexSet& groups, const PatchGeometry& geom) {
  const int channels = tape.input.channels;
  if (!upstream.same_shape(tape.output) || upstream.size() != tape.output.size())
    throw std::invalid_argument("stage_backward: upstream gradient shape does not match the stage output");
  if (static_cast<int>(tape.channels.size()) != channels || params.mixture.channels() != channels)
    throw std::invalid_argument("stage_backward: tape and parameters disagree on the channel count");
  if (tape.mask.size() != tape.input.size())
    throw std::invalid_argument("stage_backward: projection mask has the wrong length");
  if (groups.height != tape.input.height || groups.width != tape.input.width)
    throw std::invalid_argument("stage_backward: group index set does not match the tape");
  if (tape.groups != nullptr && tape.groups != &groups && !(*tape.groups == groups))
    throw std::invalid_argument("stage_backward: tape was recorded with a different group index set");
  params.transform.validate(geom);
  for (const auto& ch : tape.channels) {
    if (ch.group_coeffs.rows() != groups.count() ||
        ch.group_coeffs.cols() != static_cast<std::size_t>(params.transform.coeff_count()) ||
        ch.patch_coeffs.rows() != groups.count() || ch.patch_coeffs.cols() != ch.group_coeffs.cols())
      throw std::invalid_argument("stage_backward: tape coefficient fields do not match the parameters");
  }

  std::vector<PlaneGrads> planes(static_cast<std::size_t>(channels));
  parallel_for(planes.size(), [&](std::size_t c) {
    const int ch = static_cast<int>(c);
    ImageTensor e = extract_plane(upstream, ch);
    const std::size_t n = e.size();
    for (std::size_t p = 0; p < n; ++p) e.data[p] *= tape.mask[c * n + p];
    planes[c] = plane_backward(e, extract_plane(tape.input, ch), extract_plane(tape.noisy, ch), tape.channels[c],
                               params, ch, groups, geom);
  });

  StageGrads grads;
  grads.d_transform = Matrix(params.transform.matrix.rows(), params.transform.matrix.cols());
  grads.d_weights.assign(static_cast<std::size_t>(params.weights.size()), 0.0);
  grads.d_mixture.reserve(params.mixture.values().size());
  grads.d_input = ImageTensor(tape.input.height, tape.input.width, channels, tape.input.peak);
  for (int c = 0; c < channels; ++c) {
    const PlaneGrads& pg = planes[c];
    grads.d_gamma += pg.d_gamma;
    for (std::size_t t = 0; t < grads.d_transform.size(); ++t) grads.d_transform.values()[t] += pg.d_transform.values()[t];
    for (std::size_t k = 0; k < grads.d_weights.size(); ++k) grads.d_weights[k] += pg.d_weights[k];
    grads.d_mixture.insert(grads.d_mixture.end(), pg.d_mixture.begin(), pg.d_mixture.end());
    insert_plane(grads.d_input, c, pg.d_input);
  }
  return grads;
}

double network_loss(const Model& model, const ImageTensor& network_output, const ImageTensor& clean) {
  return loss(from_network_space(model.mode, network_output), clean);
}

std::vector<StageGrads> network_backward(const std::vector<StageTape>& tapes, const ImageTensor& clean,
                                         const Model& model) {
  if (tapes.size() != model.stages.size())
    throw std::invalid_argument("network_backward: expected one tape per stage");
  ImageTensor upstream = loss_grad(from_network_space(model.mode, tapes.back().output), clean);
  if (model.mode == ColorMode::color) upstream = opponent_to_rgb_adjoint(upstream);

  std::vector<StageGrads> grads(tapes.size());
  for (std::size_t t = tapes.size(); t-- > 0;) {
    if (tapes[t].groups == nullptr) throw std::invalid_argument("network_backward: tape without a group index set");
    grads[t] = stage_backward(tapes[t], upstream, model.stages[t], *tapes[t].groups, model.geom);
    upstream = grads[t].d_input;
  }
  return grads;
}

std::size_t parameter_count(const StageParams& params) {
  return 1 + params.transform.matrix.size() + params.weights.values.size() + params.mixture.values().size();
}

void append_parameters(const StageParams& params, std::vector<double>& out) {
  out.push_back(params.gamma);
  out.insert(out.end(), params.transform.matrix.values().begin(), params.transform.matrix.values().end());
  out.insert(out.end(), params.weights.values.begin(), params.weights.values.end());
  out.insert(out.end(), params.mixture.values().begin(), params.mixture.values().end());
}

std::size_t assign_parameters(std::span<const double> in, StageParams& params) {
  const std::size_t n = parameter_count(params);
  if (in.size() < n) throw std::invalid_argument("assign_parameters: parameter vector too short");
  std::size_t pos = 0;
  params.gamma = in[pos++];
  for (double& v : params.transform.matrix.values()) v = in[pos++];
  for (double& v : params.weights.values) v = in[pos++];
  for (double& v : params.mixture.values()) v = in[pos++];
  return pos;
}

void append_gradient(const StageGrads& grads, std::vector<double>& out) {
  out.push_back(grads.d_gamma);
  out.insert(out.end(), grads.d_transform.values().begin(), grads.d_transform.values().end());
  out.insert(out.end(), grads.d_weights.begin(), grads.d_weights.end());
  out.insert(out.end(), grads.d_mixture.begin(), grads.d_mixture.end());
}

}  // namespace nlnet
