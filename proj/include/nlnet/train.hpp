#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nlnet/image.hpp"
#include "nlnet/lbfgs.hpp"
#include "nlnet/network.hpp"
#include "nlnet/patches.hpp"

namespace nlnet {

struct TrainConfig {
  std::filesystem::path clean_dir;
  ColorMode mode = ColorMode::grayscale;
  int crop = 64;
  int pairs = 8;
  double sigma = 25.0;  ///< on the 0..255 scale for both modes
  std::uint64_t seed = 1;
  int stages = 1;
  PatchGeometry geom;
  int greedy_iters = 100;
  int joint_iters = 400;
  int rbf_kernels = 63;
  double rbf_delta = 0.0;  ///< 0 selects the mode default (100 gray, 0.4 color)
  double rbf_precision = 0.0;  ///< 0 selects ln 2 / h^2
  int history = 10;

  void validate() const;
};

/// Parses the key=value config text. Blank lines and lines starting with '#'
/// are ignored. `sigma` and `clean_dir` are required; relative clean_dir
/// paths are resolved against `base_dir`.
TrainConfig parse_train_config(std::istream& in, const std::filesystem::path& base_dir = {});
TrainConfig load_train_config(const std::filesystem::path& path);

/// One training pair with its fixed group index set.
struct TrainingSample {
  ImageTensor clean;  ///< gray or RGB
  ImageTensor input;  ///< noisy image in network space
  GroupIndexSet groups;
};

/// Loads every .pgm/.ppm under clean_dir in filename order.
std::vector<ImageTensor> load_corpus(const std::filesystem::path& dir, ColorMode mode);

/// Draws cfg.pairs crops (image, row, col chosen from cfg.seed) and adds
/// seeded noise to each. Pairs whose noisy crop equals the clean crop are
/// rejected with ConfigError.
std::vector<TrainingSample> build_training_set(const TrainConfig& cfg, const std::vector<ImageTensor>& corpus);

/// Stage initialization: gamma 1, DCT transform, w = (1, 0, ...), each
/// mixture fitted to the line psi(x) = 0.1 x.
StageParams initial_stage(const PatchGeometry& geom, const RBFGrid& grid, ColorMode mode);
Model initial_model(const TrainConfig& cfg);
RBFGrid training_grid(const TrainConfig& cfg);

using ProgressFn = std::function<void(const std::string& phase, const LbfgsIteration&)>;

/// Sum of per-sample losses and its gradient for one stage with fixed inputs.
double stage_objective(const Model& model, const StageParams& params, const std::vector<TrainingSample>& samples,
                       const std::vector<ImageTensor>& inputs, std::vector<double>* gradient);

/// Sum of per-sample losses of the whole network and its gradient.
double network_objective(const Model& model, const std::vector<TrainingSample>& samples,
                         std::vector<double>* gradient);

/// Mean PSNR of the network output (after `stages` stages, default all) over the samples.
double mean_psnr(const Model& model, const std::vector<TrainingSample>& samples, int stages = -1);
/// Mean PSNR of the noisy inputs against the clean images.
double noisy_mean_psnr(const Model& model, const std::vector<TrainingSample>& samples);

Model greedy_train(const TrainConfig& cfg, const std::vector<TrainingSample>& samples, const ProgressFn& progress = {});
Model joint_train(const Model& model, const TrainConfig& cfg, const std::vector<TrainingSample>& samples,
                  const ProgressFn& progress = {});

/// Flattens / restores all stage parameters in order.
std::vector<double> flatten_model(const Model& model);
void unflatten_model(std::span<const double> values, Model& model);

}  // namespace nlnet
