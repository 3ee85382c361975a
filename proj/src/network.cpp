#include "nlnet/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "nlnet/parallel.hpp"

namespace nlnet {

void StageParams::validate(const PatchGeometry& geom, int channels) const {
  if (!std::isfinite(gamma)) throw std::invalid_argument("StageParams: gamma must be finite");
  transform.validate(geom);
  weights.validate(geom);
  mixture.validate();
  if (mixture.channels() != channels || mixture.coeffs() != transform.coeff_count())
    throw std::invalid_argument("StageParams: mixture dimensions do not match the transform and channel mode");
}

void BoxConstraint::validate() const {
  if (lower.size() != upper.size() || lower.empty()) throw std::invalid_argument("BoxConstraint: bad channel count");
  for (std::size_t c = 0; c < lower.size(); ++c)
    if (!(lower[c] < upper[c])) throw std::invalid_argument("BoxConstraint: lower bound must be below upper bound");
}

BoxConstraint BoxConstraint::for_mode(ColorMode mode) {
  BoxConstraint box;
  if (mode == ColorMode::grayscale) {
    box.lower = {0.0};
    box.upper = {255.0};
  } else {
    std::array<double, 3> lo{};
    std::array<double, 3> hi{};
    opponent_range(lo, hi);
    box.lower.assign(lo.begin(), lo.end());
    box.upper.assign(hi.begin(), hi.end());
  }
  return box;
}

void Model::validate() const {
  if (stages.empty()) throw std::invalid_argument("Model: at least one stage is required");
  geom.validate();
  box.validate();
  if (box.channels() != channels()) throw std::invalid_argument("Model: box channel count does not match the mode");
  for (const auto& s : stages) s.validate(geom, channels());
}

ImageTensor project_box(const ImageTensor& u, const BoxConstraint& box) {
  if (u.channels != box.channels()) throw std::invalid_argument("project_box: channel count mismatch");
  ImageTensor out = u;
  for (int c = 0; c < u.channels; ++c)
    for (double& v : out.plane(c)) v = std::clamp(v, box.lower[c], box.upper[c]);
  return out;
}

namespace {

struct PlaneResult {
  ImageTensor pre_projection;
  ChannelTape tape;
};

PlaneResult stage_plane(const ImageTensor& z, const ImageTensor& y, const StageParams& params, int channel,
                        const GroupIndexSet& groups, const PatchGeometry& geom) {
  PlaneResult res;
  res.tape.patch_coeffs = transform_patches(z, params.transform, geom);
  res.tape.group_coeffs = group_combine(res.tape.patch_coeffs, params.weights, groups);
  const CoeffField shrunk = apply_psi(params.mixture, channel, res.tape.group_coeffs);
  const ImageTensor reg = transform_patches_adjoint(group_combine_adjoint(shrunk, params.weights, groups),
                                                    params.transform, geom, z.height, z.width, z.peak);
  res.pre_projection = ImageTensor(z.height, z.width, 1, z.peak);
  const double g = params.gamma;
  for (std::size_t p = 0; p < z.size(); ++p)
    res.pre_projection.data[p] = z.data[p] * (1.0 - g) + g * y.data[p] - reg.data[p];
  return res;
}

void check_stage_inputs(const ImageTensor& z, const ImageTensor& y, const GroupIndexSet& groups,
                        const BoxConstraint& box, const StageParams& params) {
  z.validate();
  if (!z.same_shape(y)) throw std::invalid_argument("stage_forward: input and noisy image shapes differ");
  if (z.height != groups.height || z.width != groups.width)
    throw std::invalid_argument("stage_forward: group index set does not match the image");
  if (z.channels != box.channels() || z.channels != params.mixture.channels())
    throw std::invalid_argument("stage_forward: channel count does not match the box or the mixture");
}

}  // namespace

StageResult stage_forward(const ImageTensor& z, const ImageTensor& y, const StageParams& params,
                          const GroupIndexSet& groups, const PatchGeometry& geom, const BoxConstraint& box) {
  check_stage_inputs(z, y, groups, box, params);
  const int channels = z.channels;
  std::vector<PlaneResult> planes(static_cast<std::size_t>(channels));
  parallel_for(planes.size(), [&](std::size_t c) {
    const int ch = static_cast<int>(c);
    planes[c] = stage_plane(extract_plane(z, ch), extract_plane(y, ch), params, ch, groups, geom);
  });

  StageResult res;
  StageTape& tape = res.tape;
  tape.input = z;
  tape.noisy = y;
  tape.pre_projection = ImageTensor(z.height, z.width, channels, z.peak);
  tape.groups = &groups;
  for (int c = 0; c < channels; ++c) {
    insert_plane(tape.pre_projection, c, planes[c].pre_projection);
    tape.channels.push_back(std::move(planes[c].tape));
  }
  tape.output = project_box(tape.pre_projection, box);
  tape.mask.resize(z.size());
  for (int c = 0; c < channels; ++c) {
    const auto u = tape.pre_projection.plane(c);
    for (std::size_t p = 0; p < u.size(); ++p)
      tape.mask[c * z.pixels() + p] = (u[p] >= box.lower[c] && u[p] <= box.upper[c]) ? 1 : 0;
  }
  res.output = tape.output;
  return res;
}

NetworkPass run_network(const Model& model, const ImageTensor& input, const GroupIndexSet& groups) {
  NetworkPass pass;
  pass.output = input;
  for (const auto& stage : model.stages) {
    StageResult res = stage_forward(pass.output, input, stage, groups, model.geom, model.box);
    pass.output = std::move(res.output);
    pass.tapes.push_back(std::move(res.tape));
  }
  return pass;
}

GroupIndexSet network_groups(const Model& model, const ImageTensor& input) {
  model.geom.validate_for(input.height, input.width);
  if (model.mode == ColorMode::color) return block_match(extract_plane(input, 0), model.geom);
  return block_match(input, model.geom);
}

ImageTensor to_network_space(ColorMode mode, const ImageTensor& img) {
  return mode == ColorMode::color ? rgb_to_opponent(img) : img;
}

ImageTensor from_network_space(ColorMode mode, const ImageTensor& img) {
  return mode == ColorMode::color ? opponent_to_rgb(img) : img;
}

ImageTensor denoise_channel(const Model& model, const ImageTensor& plane, int channel, const GroupIndexSet& groups) {
  if (plane.channels != 1) throw std::invalid_argument("denoise_channel: expected a single plane");
  if (channel < 0 || channel >= model.channels()) throw std::invalid_argument("denoise_channel: channel out of range");
  ImageTensor x = plane;
  for (const auto& stage : model.stages) {
    PlaneResult res = stage_plane(x, plane, stage, channel, groups, model.geom);
    x = std::move(res.pre_projection);
    for (double& v : x.data) v = std::clamp(v, model.box.lower[channel], model.box.upper[channel]);
  }
  return x;
}

ImageTensor denoise(const Model& model, const ImageTensor& noisy) {
  model.validate();
  noisy.validate();
  if (noisy.channels != model.channels())
    throw std::invalid_argument(std::string("denoise: ") + (model.mode == ColorMode::color ? "color" : "grayscale") +
                                " model cannot process a " + std::to_string(noisy.channels) + "-channel image");
  const ImageTensor input = to_network_space(model.mode, noisy);
  const GroupIndexSet groups = network_groups(model, input);
  ImageTensor out(input.height, input.width, input.channels, input.peak);
  std::vector<ImageTensor> planes(static_cast<std::size_t>(input.channels));
  parallel_for(planes.size(), [&](std::size_t c) {
    planes[c] = denoise_channel(model, extract_plane(input, static_cast<int>(c)), static_cast<int>(c), groups);
  });
  for (int c = 0; c < input.channels; ++c) insert_plane(out, c, planes[c]);
  return from_network_space(model.mode, out);
}

}  // namespace nlnet
