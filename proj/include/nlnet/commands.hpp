#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlnet/autodiff.hpp"
#include "nlnet/network.hpp"

namespace nlnet {

/// Exit statuses shared by every command.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitInputError = 2, kExitNumericError = 3 };

struct EvalRow {
  std::string image;
  double noisy_psnr = 0.0;
  double denoised_psnr = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  ///< sorted by file name
  double noisy_average = 0.0;
  double denoised_average = 0.0;

  /// "image,noisy_psnr,denoised_psnr" header, one row per image, then an "average" row.
  std::string csv() const;
};

/// Adds seeded noise (sigma on the 0..255 scale) to every image in clean_dir and denoises it.
EvalReport evaluate_model(const Model& model, const std::filesystem::path& clean_dir, double sigma, std::uint64_t seed);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

struct AddNoiseArgs {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path input;
  std::filesystem::path output;
};

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path output;
  std::optional<std::filesystem::path> log;  ///< per-iteration CSV; stdout when absent
};

struct DenoiseArgs {
  std::filesystem::path model;
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> clean;
};

struct EvalArgs {
  std::filesystem::path model;
  std::filesystem::path clean_dir;
  double sigma = 25.0;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> csv;  ///< stdout when absent
};

struct GradcheckArgs {
  std::uint64_t seed = 1;
  std::function<void(StageGrads&)> tamper;
};

/// Each command writes results to `out`, diagnostics and timing to `err`,
/// and returns an ExitCode instead of throwing.
int cmd_add_noise(const AddNoiseArgs& args, std::ostream& out, std::ostream& err);
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_denoise(const DenoiseArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err);

}  // namespace nlnet
