#include <CLI11.hpp>
#include <iostream>

#include "nlnet/commands.hpp"
#include "nlnet/parallel.hpp"

int main(int argc, char** argv) {
  using namespace nlnet;
  CLI::App app{"Non-local proximal denoising network"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  AddNoiseArgs noise;
  auto* add_noise = app.add_subcommand("add-noise", "add seeded Gaussian noise to an image");
  add_noise->add_option("--sigma", noise.sigma, "noise standard deviation on the 0..255 scale")->required();
  add_noise->add_option("--seed", noise.seed, "noise seed")->required();
  add_noise->add_option("input", noise.input)->required();
  add_noise->add_option("output", noise.output)->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model from a key=value config file");
  train_cmd->add_option("--config", train.config)->required();
  train_cmd->add_option("--out", train.output)->required();
  train_cmd->add_option("--log", train.log, "write the per-iteration CSV here instead of stdout");

  DenoiseArgs den;
  auto* denoise_cmd = app.add_subcommand("denoise", "denoise one image");
  denoise_cmd->add_option("--model", den.model)->required();
  denoise_cmd->add_option("--clean", den.clean, "clean reference; prints PSNR");
  denoise_cmd->add_option("input", den.input)->required();
  denoise_cmd->add_option("output", den.output)->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "noise, denoise and score every image in a directory");
  eval_cmd->add_option("--model", eval.model)->required();
  eval_cmd->add_option("--clean-dir", eval.clean_dir)->required();
  eval_cmd->add_option("--sigma", eval.sigma)->required();
  eval_cmd->add_option("--seed", eval.seed)->required();
  eval_cmd->add_option("--csv", eval.csv, "write the report here instead of stdout");

  GradcheckArgs check;
  auto* check_cmd = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  check_cmd->add_option("--seed", check.seed);
#ifdef NLNET_CORRUPT_GRADIENT_FIXTURE
  check.tamper = [](StageGrads& g) { g.d_gamma *= 1.1; };
#endif

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }
  set_default_threads(threads);

  if (*add_noise) return cmd_add_noise(noise, std::cout, std::cerr);
  if (*train_cmd) return cmd_train(train, std::cout, std::cerr);
  if (*denoise_cmd) return cmd_denoise(den, std::cout, std::cerr);
  if (*eval_cmd) return cmd_eval(eval, std::cout, std::cerr);
  return cmd_gradcheck(check, std::cout, std::cerr);
}
