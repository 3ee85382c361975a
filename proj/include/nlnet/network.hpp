#pragma once

#include <cstdint>
#include <vector>

#include "nlnet/image.hpp"
#include "nlnet/nonlocal.hpp"
#include "nlnet/patches.hpp"
#include "nlnet/rbf.hpp"

namespace nlnet {

enum class ColorMode : std::uint32_t { grayscale = 0, color = 1 };

inline int channel_count(ColorMode mode) noexcept { return mode == ColorMode::color ? 3 : 1; }

/// Learnable parameters of one stage. The three opponent channels of a
/// color model share gamma, the transform and the weights; each has its own
/// row of RBF mixtures.
struct StageParams {
  double gamma = 1.0;
  PatchTransform transform;
  GroupWeights weights;
  RBFMixture mixture;

  void validate(const PatchGeometry& geom, int channels) const;
  bool operator==(const StageParams&) const = default;
};

/// Per-channel box [lower_c, upper_c].
struct BoxConstraint {
  std::vector<double> lower;
  std::vector<double> upper;

  int channels() const noexcept { return static_cast<int>(lower.size()); }
  void validate() const;

  /// [0, 255] for grayscale; for color the opponent-space image of the RGB unit cube.
  static BoxConstraint for_mode(ColorMode mode);

  bool operator==(const BoxConstraint&) const = default;
};

struct Model {
  std::vector<StageParams> stages;
  PatchGeometry geom;
  ColorMode mode = ColorMode::grayscale;
  BoxConstraint box;
  double sigma_trained = 0.0;

  int channels() const noexcept { return channel_count(mode); }
  void validate() const;
  bool operator==(const Model&) const = default;
};

/// Intermediate values of one channel of a stage, kept for backpropagation.
struct ChannelTape {
  CoeffField patch_coeffs;  ///< f_p = F z_p for every patch p
  CoeffField group_coeffs;  ///< z_r = sum_k w_k f_{i_{r,k}}
};

/// Everything stage_backward needs from the matching stage_forward call.
struct StageTape {
  ImageTensor input;           ///< z
  ImageTensor noisy;           ///< y
  ImageTensor pre_projection;  ///< u
  ImageTensor output;          ///< P_C(u)
  std::vector<std::uint8_t> mask;  ///< 1 where lower <= u <= upper
  std::vector<ChannelTape> channels;
  const GroupIndexSet* groups = nullptr;
};

struct StageResult {
  ImageTensor output;
  StageTape tape;
};

ImageTensor project_box(const ImageTensor& u, const BoxConstraint& box);

/// One proximal-gradient stage:
///   P_C( z (1 - gamma) + gamma y - L^T psi(L z) ),
/// applied to every channel with the channel's own mixture and box.
StageResult stage_forward(const ImageTensor& z, const ImageTensor& y, const StageParams& params,
                          const GroupIndexSet& groups, const PatchGeometry& geom, const BoxConstraint& box);

/// Runs every stage of `model` starting from x^0 = y. `input` must already be
/// in network space (opponent channels for color). The tapes all reference `groups`.
struct NetworkPass {
  ImageTensor output;
  std::vector<StageTape> tapes;
};
NetworkPass run_network(const Model& model, const ImageTensor& input, const GroupIndexSet& groups);

/// Groups used by the network: block matching on the input, or on its
/// luminance plane for color models. `input` is in network space.
GroupIndexSet network_groups(const Model& model, const ImageTensor& input);

/// Maps an RGB/gray image into the space the network operates in, and back.
ImageTensor to_network_space(ColorMode mode, const ImageTensor& img);
ImageTensor from_network_space(ColorMode mode, const ImageTensor& img);

/// Full inference on a noisy grayscale or RGB image.
ImageTensor denoise(const Model& model, const ImageTensor& noisy);

/// Runs all stages on a single network-space channel with a precomputed
/// group set; denoise() is this function applied to each channel.
ImageTensor denoise_channel(const Model& model, const ImageTensor& plane, int channel, const GroupIndexSet& groups);

}  // namespace nlnet
