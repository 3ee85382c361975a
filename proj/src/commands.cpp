#include "nlnet/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <limits>

#include "nlnet/errors.hpp"
#include "nlnet/gradcheck.hpp"
#include "nlnet/model_io.hpp"
#include "nlnet/parallel.hpp"
#include "nlnet/train.hpp"

namespace nlnet {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string EvalReport::csv() const {
  std::string out = "image,noisy_psnr,denoised_psnr\n";
  for (const auto& r : rows) out += r.image + "," + format_number(r.noisy_psnr) + "," + format_number(r.denoised_psnr) + "\n";
  out += "average," + format_number(noisy_average) + "," + format_number(denoised_average) + "\n";
  return out;
}

namespace {

std::vector<std::filesystem::path> image_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

double psnr_or_inf(const ImageTensor& y, const ImageTensor& x) {
  try {
    return psnr(y, x);
  } catch (const InfinitePsnrError&) {
    return std::numeric_limits<double>::infinity();
  }
}

ImageTensor quantized(const ImageTensor& img) { return decode_pnm(encode_pnm(img)); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const CorruptModelError& e) {
    err << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace

EvalReport evaluate_model(const Model& model, const std::filesystem::path& clean_dir, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  const auto files = image_files(clean_dir);
  if (files.empty()) throw IoError("no .pgm/.ppm images in " + clean_dir.string());
  EvalReport report;
  report.rows.resize(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const ImageTensor clean = load_image(files[i]);
    const ImageTensor noisy = add_gaussian_noise(clean, {sigma * clean.peak / 255.0, derive_seed(seed, i)});
    const ImageTensor restored = denoise(model, noisy);
    report.rows[i] = {files[i].filename().string(), psnr_or_inf(noisy, clean), psnr_or_inf(restored, clean)};
  });
  for (const auto& r : report.rows) {
    report.noisy_average += r.noisy_psnr;
    report.denoised_average += r.denoised_psnr;
  }
  report.noisy_average /= static_cast<double>(report.rows.size());
  report.denoised_average /= static_cast<double>(report.rows.size());
  return report;
}

int cmd_add_noise(const AddNoiseArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(args.sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
    const ImageTensor clean = load_image(args.input);
    const ImageTensor noisy = add_gaussian_noise(clean, {args.sigma * clean.peak / 255.0, args.seed});
    save_image(noisy, args.output);
    out << "psnr " << format_number(psnr_or_inf(quantized(noisy), clean)) << "\n";
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto start = std::chrono::steady_clock::now();
    const TrainConfig cfg = load_train_config(args.config);
    const auto corpus = load_corpus(cfg.clean_dir, cfg.mode);
    const auto samples = build_training_set(cfg, corpus);

    std::ofstream log_file;
    if (args.log) {
      log_file.open(*args.log, std::ios::binary);
      if (!log_file) throw IoError("cannot open log file " + args.log->string());
    }
    std::ostream& log = args.log ? static_cast<std::ostream&>(log_file) : out;
    log << "phase,iter,objective,grad_norm,step\n";
    const ProgressFn progress = [&](const std::string& phase, const LbfgsIteration& it) {
      log << phase << "," << it.iter << "," << format_number(it.objective) << "," << format_number(it.grad_norm) << ","
          << format_number(it.step) << "\n";
      log.flush();
    };

    Model model = greedy_train(cfg, samples, progress);
    model = joint_train(model, cfg, samples, progress);
    save_model(model, args.output);

    out << "noisy_psnr " << format_number(noisy_mean_psnr(model, samples)) << "\n";
    out << "trained_psnr " << format_number(mean_psnr(model, samples)) << "\n";
    err << "train time " << seconds_since(start) << " s\n";
    return kExitOk;
  });
}

int cmd_denoise(const DenoiseArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Model model = load_model(args.model);
    const ImageTensor noisy = load_image(args.input);
    const auto start = std::chrono::steady_clock::now();
    const ImageTensor restored = denoise(model, noisy);
    err << "denoise time " << seconds_since(start) << " s\n";
    save_image(restored, args.output);
    if (args.clean) {
      const ImageTensor clean = load_image(*args.clean);
      out << "noisy_psnr " << format_number(psnr_or_inf(noisy, clean)) << "\n";
      out << "denoised_psnr " << format_number(psnr_or_inf(quantized(restored), clean)) << "\n";
    }
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Model model = load_model(args.model);
    const auto start = std::chrono::steady_clock::now();
    const EvalReport report = evaluate_model(model, args.clean_dir, args.sigma, args.seed);
    err << "eval time " << seconds_since(start) << " s\n";
    if (args.csv) write_text(*args.csv, report.csv());
    else out << report.csv();
    return kExitOk;
  });
}

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    GradcheckOptions opt;
    opt.seed = args.seed;
    opt.tamper = args.tamper;
    const auto start = std::chrono::steady_clock::now();
    const GradcheckReport report = gradcheck(opt);
    err << "gradcheck time " << seconds_since(start) << " s\n";
    out << report.text();
    return report.passed() ? kExitOk : kExitCheckFailed;
  });
}

}  // namespace nlnet
