#include "nlnet/train.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nlnet/autodiff.hpp"
#include "nlnet/errors.hpp"
#include "nlnet/parallel.hpp"

namespace nlnet {

void TrainConfig::validate() const {
  if (crop < 1 || pairs < 1 || stages < 1 || history < 1 || rbf_kernels < 2)
    throw ConfigError("crop, pairs, stages, history and rbf_kernels must be positive");
  if (greedy_iters < 0 || joint_iters < 0) throw ConfigError("iteration counts must be non-negative");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  if (rbf_delta < 0.0 || rbf_precision < 0.0) throw ConfigError("rbf_delta and rbf_precision must be non-negative");
  try {
    geom.validate();
    if (geom.patch_size() < 2) throw std::invalid_argument("patches need at least 2 samples");
    geom.validate_for(crop, crop);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("crop too small for the patch geometry: ") + e.what());
  }
  if (crop < geom.patch_h || crop < geom.patch_w) throw ConfigError("crop must be at least the patch size");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for key '" + key + "': " + text);
  return value;
}

}  // namespace

TrainConfig parse_train_config(std::istream& in, const std::filesystem::path& base_dir) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
    kv[key] = trim(t.substr(eq + 1));
  }

  TrainConfig cfg;
  for (const char* required : {"sigma", "clean_dir"})
    if (!kv.count(required)) throw ConfigError(std::string("missing required key '") + required + "'");

  for (const auto& [key, value] : kv) {
    if (key == "clean_dir") {
      cfg.clean_dir = value;
      if (cfg.clean_dir.is_relative() && !base_dir.empty()) cfg.clean_dir = base_dir / cfg.clean_dir;
    } else if (key == "mode") {
      if (value == "gray" || value == "grayscale") cfg.mode = ColorMode::grayscale;
      else if (value == "color") cfg.mode = ColorMode::color;
      else throw ConfigError("invalid value for key 'mode': " + value);
    } else if (key == "crop") cfg.crop = parse_number<int>(key, value);
    else if (key == "pairs") cfg.pairs = parse_number<int>(key, value);
    else if (key == "sigma") cfg.sigma = parse_number<double>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "stages") cfg.stages = parse_number<int>(key, value);
    else if (key == "patch") cfg.geom.patch_h = cfg.geom.patch_w = parse_number<int>(key, value);
    else if (key == "patch_h") cfg.geom.patch_h = parse_number<int>(key, value);
    else if (key == "patch_w") cfg.geom.patch_w = parse_number<int>(key, value);
    else if (key == "group_size") cfg.geom.group_size = parse_number<int>(key, value);
    else if (key == "window") cfg.geom.window = parse_number<int>(key, value);
    else if (key == "greedy_iters") cfg.greedy_iters = parse_number<int>(key, value);
    else if (key == "joint_iters") cfg.joint_iters = parse_number<int>(key, value);
    else if (key == "rbf_kernels") cfg.rbf_kernels = parse_number<int>(key, value);
    else if (key == "rbf_delta") cfg.rbf_delta = parse_number<double>(key, value);
    else if (key == "rbf_precision") cfg.rbf_precision = parse_number<double>(key, value);
    else if (key == "history") cfg.history = parse_number<int>(key, value);
    else throw ConfigError("unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  return parse_train_config(in, path.parent_path());
}

std::vector<ImageTensor> load_corpus(const std::filesystem::path& dir, ColorMode mode) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("clean image directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageTensor> corpus;
  for (const auto& f : files) {
    ImageTensor img = load_image(f);
    if (img.channels != channel_count(mode))
      throw ConfigError(f.filename().string() + " does not match the configured color mode");
    corpus.push_back(std::move(img));
  }
  if (corpus.empty()) throw ConfigError("no training images in " + dir.string());
  return corpus;
}

namespace {

Model geometry_model(const TrainConfig& cfg) {
  Model m;
  m.geom = cfg.geom;
  m.mode = cfg.mode;
  m.box = BoxConstraint::for_mode(cfg.mode);
  return m;
}

}  // namespace

std::vector<TrainingSample> build_training_set(const TrainConfig& cfg, const std::vector<ImageTensor>& corpus) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("empty training corpus");
  for (const auto& img : corpus)
    if (img.height < cfg.crop || img.width < cfg.crop)
      throw ConfigError("training image smaller than the crop size " + std::to_string(cfg.crop));

  GaussianSource picker(cfg.seed);
  const Model geo = geometry_model(cfg);
  std::vector<TrainingSample> samples(static_cast<std::size_t>(cfg.pairs));
  std::vector<std::array<std::uint64_t, 3>> picks(samples.size());
  for (auto& p : picks) {
    p[0] = picker.below(corpus.size());
    const ImageTensor& img = corpus[p[0]];
    p[1] = picker.below(static_cast<std::uint64_t>(img.height - cfg.crop + 1));
    p[2] = picker.below(static_cast<std::uint64_t>(img.width - cfg.crop + 1));
  }
  std::vector<char> degenerate(samples.size(), 0);
  parallel_for(samples.size(), [&](std::size_t q) {
    const auto& p = picks[q];
    TrainingSample& s = samples[q];
    s.clean = crop(corpus[p[0]], static_cast<int>(p[1]), static_cast<int>(p[2]), cfg.crop, cfg.crop);
    const ImageTensor noisy = add_gaussian_noise(s.clean, {cfg.sigma * s.clean.peak / 255.0, derive_seed(cfg.seed, q)});
    degenerate[q] = noisy == s.clean;
    s.input = to_network_space(cfg.mode, noisy);
    s.groups = network_groups(geo, s.input);
  });
  for (std::size_t q = 0; q < samples.size(); ++q)
    if (degenerate[q])
      throw ConfigError("training pair " + std::to_string(q) +
                        " has a noisy image identical to its clean image; the loss is undefined (sigma 0?)");
  return samples;
}

RBFGrid training_grid(const TrainConfig& cfg) {
  const double delta = cfg.rbf_delta > 0.0 ? cfg.rbf_delta : (cfg.mode == ColorMode::color ? 0.4 : 100.0);
  if (cfg.rbf_precision > 0.0) return RBFGrid::make(cfg.rbf_kernels, delta, cfg.rbf_precision);
  return RBFGrid::make(cfg.rbf_kernels, delta);
}

StageParams initial_stage(const PatchGeometry& geom, const RBFGrid& grid, ColorMode mode) {
  StageParams p;
  p.gamma = 1.0;
  p.transform = PatchTransform::dct(geom);
  p.weights = GroupWeights::reference_only(geom.group_size);
  p.mixture = RBFMixture(grid, channel_count(mode), geom.coeff_count());
  const std::vector<double> line = fit_linear_init(grid, 0.1);
  for (int c = 0; c < channel_count(mode); ++c)
    for (int i = 0; i < geom.coeff_count(); ++i) std::copy(line.begin(), line.end(), p.mixture.weights(c, i).begin());
  return p;
}

Model initial_model(const TrainConfig& cfg) {
  cfg.validate();
  Model m = geometry_model(cfg);
  m.sigma_trained = cfg.sigma;
  const StageParams stage = initial_stage(cfg.geom, training_grid(cfg), cfg.mode);
  m.stages.assign(static_cast<std::size_t>(cfg.stages), stage);
  return m;
}

namespace {

struct SampleSlot {
  double loss = 0.0;
  std::vector<double> grad;
};

double reduce(std::vector<SampleSlot>& slots, std::vector<double>* gradient) {
  double total = 0.0;
  for (const auto& s : slots) total += s.loss;
  if (gradient) {
    gradient->assign(slots.front().grad.size(), 0.0);
    for (const auto& s : slots)
      for (std::size_t i = 0; i < s.grad.size(); ++i) (*gradient)[i] += s.grad[i];
  }
  return total;
}

ImageTensor upstream_gradient(const Model& model, const ImageTensor& yhat_rgb, const ImageTensor& clean) {
  ImageTensor g = loss_grad(yhat_rgb, clean);
  return model.mode == ColorMode::color ? opponent_to_rgb_adjoint(g) : g;
}

}  // namespace

double stage_objective(const Model& model, const StageParams& params, const std::vector<TrainingSample>& samples,
                       const std::vector<ImageTensor>& inputs, std::vector<double>* gradient) {
  if (samples.empty() || inputs.size() != samples.size())
    throw std::invalid_argument("stage_objective: one input per sample is required");
  std::vector<SampleSlot> slots(samples.size());
  parallel_for(samples.size(), [&](std::size_t q) {
    const TrainingSample& s = samples[q];
    StageResult res = stage_forward(inputs[q], s.input, params, s.groups, model.geom, model.box);
    const ImageTensor yhat = from_network_space(model.mode, res.output);
    slots[q].loss = loss(yhat, s.clean);
    if (gradient) {
      const StageGrads g = stage_backward(res.tape, upstream_gradient(model, yhat, s.clean), params, s.groups, model.geom);
      append_gradient(g, slots[q].grad);
    }
  });
  return reduce(slots, gradient);
}

double network_objective(const Model& model, const std::vector<TrainingSample>& samples,
                         std::vector<double>* gradient) {
  if (samples.empty()) throw std::invalid_argument("network_objective: no samples");
  std::vector<SampleSlot> slots(samples.size());
  parallel_for(samples.size(), [&](std::size_t q) {
    const TrainingSample& s = samples[q];
    NetworkPass pass = run_network(model, s.input, s.groups);
    slots[q].loss = network_loss(model, pass.output, s.clean);
    if (gradient)
      for (const StageGrads& g : network_backward(pass.tapes, s.clean, model)) append_gradient(g, slots[q].grad);
  });
  return reduce(slots, gradient);
}

double mean_psnr(const Model& model, const std::vector<TrainingSample>& samples, int stages) {
  Model m = model;
  if (stages >= 0) m.stages.resize(static_cast<std::size_t>(std::min<int>(stages, static_cast<int>(model.stages.size()))));
  std::vector<double> values(samples.size());
  parallel_for(samples.size(), [&](std::size_t q) {
    const TrainingSample& s = samples[q];
    const ImageTensor out = m.stages.empty() ? s.input : run_network(m, s.input, s.groups).output;
    values[q] = psnr(from_network_space(m.mode, out), s.clean);
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double noisy_mean_psnr(const Model& model, const std::vector<TrainingSample>& samples) {
  return mean_psnr(model, samples, 0);
}

std::vector<double> flatten_model(const Model& model) {
  std::vector<double> out;
  for (const auto& s : model.stages) append_parameters(s, out);
  return out;
}

void unflatten_model(std::span<const double> values, Model& model) {
  std::size_t pos = 0;
  for (auto& s : model.stages) pos += assign_parameters(values.subspan(pos), s);
  if (pos != values.size()) throw std::invalid_argument("unflatten_model: parameter vector has the wrong length");
}

namespace {

LbfgsOptions optimizer_options(const TrainConfig& cfg, int iters) {
  LbfgsOptions opt;
  opt.max_iters = iters;
  opt.history = cfg.history;
  return opt;
}

std::function<void(const LbfgsIteration&)> tagged(const ProgressFn& progress, const std::string& phase) {
  if (!progress) return {};
  return [progress, phase](const LbfgsIteration& it) { progress(phase, it); };
}

}  // namespace

Model greedy_train(const TrainConfig& cfg, const std::vector<TrainingSample>& samples, const ProgressFn& progress) {
  if (samples.empty()) throw ConfigError("greedy_train: empty training set");
  Model model = initial_model(cfg);
  std::vector<ImageTensor> inputs;
  for (const auto& s : samples) inputs.push_back(s.input);

  for (std::size_t t = 0; t < model.stages.size(); ++t) {
    const StageParams start = model.stages[t];
    std::vector<double> x0;
    append_parameters(start, x0);
    const Objective fn = [&](std::span<const double> x, std::span<double> g) {
      StageParams p = start;
      assign_parameters(x, p);
      std::vector<double> grad;
      const double f = stage_objective(model, p, samples, inputs, &grad);
      std::copy(grad.begin(), grad.end(), g.begin());
      return f;
    };
    const LbfgsResult res =
        lbfgs_minimize(fn, x0, optimizer_options(cfg, cfg.greedy_iters), tagged(progress, "greedy" + std::to_string(t + 1)));
    assign_parameters(res.x, model.stages[t]);

    if (t + 1 < model.stages.size()) {
      parallel_for(samples.size(), [&](std::size_t q) {
        inputs[q] = stage_forward(inputs[q], samples[q].input, model.stages[t], samples[q].groups, model.geom, model.box)
                        .output;
      });
    }
  }
  return model;
}

Model joint_train(const Model& model, const TrainConfig& cfg, const std::vector<TrainingSample>& samples,
                  const ProgressFn& progress) {
  if (samples.empty()) throw ConfigError("joint_train: empty training set");
  model.validate();
  if (cfg.joint_iters == 0) return model;
  Model work = model;
  const Objective fn = [&](std::span<const double> x, std::span<double> g) {
    unflatten_model(x, work);
    std::vector<double> grad;
    const double f = network_objective(work, samples, &grad);
    std::copy(grad.begin(), grad.end(), g.begin());
    return f;
  };
  const LbfgsResult res = lbfgs_minimize(fn, flatten_model(model), optimizer_options(cfg, cfg.joint_iters),
                                         tagged(progress, "joint"));
  Model out = model;
  unflatten_model(res.x, out);
  return out;
}

}  // namespace nlnet
