#include "nlnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "nlnet/train.hpp"

namespace nlnet {

bool GradcheckReport::passed() const {
  return std::all_of(classes.begin(), classes.end(),
                     [&](const GradcheckClass& c) { return c.checked > 0 && c.max_rel_error <= tolerance; });
}

std::string GradcheckReport::text() const {
  std::string out;
  char line[128];
  for (const auto& c : classes) {
    const bool ok = c.checked > 0 && c.max_rel_error <= tolerance;
    std::snprintf(line, sizeof line, "%-6s %.3e %5zu %s\n", c.name.c_str(), c.max_rel_error, c.checked,
                  ok ? "pass" : "FAIL");
    out += line;
  }
  return out;
}

namespace {

constexpr int kSize = 24;
constexpr int kRandomEntries = 16;
constexpr int kLargestEntries = 8;
constexpr double kErrorFloor = 1e-4;

PatchGeometry suite_geometry() {
  PatchGeometry g;
  g.patch_h = g.patch_w = 5;
  g.group_size = 4;
  g.window = 7;
  return g;
}

/// Smooth periodic pattern in [0.2, 0.8] of the peak plus mild noise.
ImageTensor synthetic_clean(ColorMode mode, GaussianSource& rng) {
  const int channels = channel_count(mode);
  const double peak = mode == ColorMode::color ? 1.0 : 255.0;
  ImageTensor img(kSize, kSize, channels, peak);
  for (int c = 0; c < channels; ++c) {
    const double p1 = 2.0 * std::numbers::pi * rng.uniform();
    const double p2 = 2.0 * std::numbers::pi * rng.uniform();
    for (int r = 0; r < kSize; ++r)
      for (int q = 0; q < kSize; ++q) {
        const double v = 0.5 + 0.15 * std::sin(0.55 * r + p1) * std::cos(0.4 * q + p2) + 0.1 * std::sin(0.23 * (r + q) + p2);
        img.at(c, r, q) = peak * v;
      }
  }
  return img;
}

StageParams random_stage(const PatchGeometry& geom, ColorMode mode, GaussianSource& rng) {
  const double delta = mode == ColorMode::color ? 0.4 : 100.0;
  StageParams p;
  p.gamma = 0.6 + 0.4 * rng.uniform();
  p.transform = PatchTransform::dct(geom);
  for (double& v : p.transform.matrix.values()) v += 0.05 * rng.next();
  p.weights = GroupWeights::reference_only(geom.group_size);
  for (std::size_t k = 1; k < p.weights.values.size(); ++k) p.weights.values[k] = 0.4 * rng.uniform() - 0.1;
  const RBFGrid grid = RBFGrid::make(63, delta);
  p.mixture = RBFMixture(grid, channel_count(mode), geom.coeff_count());
  const std::vector<double> line = fit_linear_init(grid, 0.02);
  for (int c = 0; c < channel_count(mode); ++c)
    for (int i = 0; i < geom.coeff_count(); ++i) {
      auto w = p.mixture.weights(c, i);
      const double scale = 1.0 + 0.3 * rng.next();
      for (int j = 0; j < grid.kernels; ++j) w[j] = scale * line[j] + 0.002 * delta * rng.next();
    }
  return p;
}

struct Accumulator {
  std::vector<GradcheckClass> classes;

  GradcheckClass& get(const std::string& name) {
    for (auto& c : classes)
      if (c.name == name) return c;
    classes.push_back({name, 0.0, 0});
    return classes.back();
  }
};

/// Compares the analytic gradient of selected entries of `values` against
/// central differences of `eval`, Richardson-extrapolated from steps h and h/2.
void compare(Accumulator& acc, const std::string& name, std::span<double> values, std::span<const double> analytic,
             const std::vector<std::size_t>& entries, const std::function<double()>& eval) {
  GradcheckClass& cls = acc.get(name);
  for (std::size_t idx : entries) {
    const double saved = values[idx];
    const double h = 1e-4 * std::max(1.0, std::abs(saved));
    const auto central = [&](double step) {
      values[idx] = saved + step;
      const double up = eval();
      values[idx] = saved - step;
      const double down = eval();
      values[idx] = saved;
      return (up - down) / (2.0 * step);
    };
    const double coarse = central(h);
    const double fine = central(0.5 * h);
    const double numeric = (4.0 * fine - coarse) / 3.0;
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), kErrorFloor});
    const double err = std::abs(a - numeric) / denom;
    cls.max_rel_error = std::max(cls.max_rel_error, err);
    ++cls.checked;
  }
}

std::vector<std::size_t> all_entries(std::size_t n) {
  std::vector<std::size_t> e(n);
  std::iota(e.begin(), e.end(), std::size_t{0});
  return e;
}

/// Seeded random entries plus the entries of largest analytic magnitude.
std::vector<std::size_t> pick_entries(std::span<const double> analytic, GaussianSource& rng) {
  const std::size_t n = analytic.size();
  if (n <= static_cast<std::size_t>(kRandomEntries + kLargestEntries)) return all_entries(n);
  std::vector<std::size_t> picked;
  for (int i = 0; i < kRandomEntries; ++i) picked.push_back(rng.below(n));
  std::vector<std::size_t> order = all_entries(n);
  std::partial_sort(order.begin(), order.begin() + kLargestEntries, order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(analytic[a]);
    const double mb = std::abs(analytic[b]);
    return ma != mb ? ma > mb : a < b;
  });
  picked.insert(picked.end(), order.begin(), order.begin() + kLargestEntries);
  std::sort(picked.begin(), picked.end());
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  return picked;
}

void compare_stage(Accumulator& acc, StageParams& params, const StageGrads& g, GaussianSource& rng,
                   const std::function<double()>& eval) {
  compare(acc, "gamma", {&params.gamma, 1}, {&g.d_gamma, 1}, {0}, eval);
  compare(acc, "pi", params.mixture.values(), g.d_mixture, pick_entries(g.d_mixture, rng), eval);
  compare(acc, "w", params.weights.values, g.d_weights, all_entries(g.d_weights.size()), eval);
  compare(acc, "F", params.transform.matrix.values(), g.d_transform.values(),
          pick_entries(g.d_transform.values(), rng), eval);
}

Model suite_model(ColorMode mode, int stages, GaussianSource& rng) {
  Model m;
  m.geom = suite_geometry();
  m.mode = mode;
  m.box = BoxConstraint::for_mode(mode);
  m.sigma_trained = 10.0;
  for (int t = 0; t < stages; ++t) m.stages.push_back(random_stage(m.geom, mode, rng));
  return m;
}

/// One stage with an input z distinct from y, so the input gradient is exercised.
void stage_suite(Accumulator& acc, ColorMode mode, GaussianSource& rng, const GradcheckOptions& opt) {
  Model model = suite_model(mode, 1, rng);
  const ImageTensor clean = synthetic_clean(mode, rng);
  const double peak = clean.peak;
  const ImageTensor y = to_network_space(mode, add_gaussian_noise(clean, {0.04 * peak, rng.below(1u << 30)}));
  ImageTensor z = y;
  const ImageTensor shift = to_network_space(mode, add_gaussian_noise(ImageTensor(kSize, kSize, clean.channels, peak),
                                                                      {0.01 * peak, rng.below(1u << 30)}));
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] += shift.data[i];
  const GroupIndexSet groups = network_groups(model, y);
  StageParams& params = model.stages[0];

  const auto eval = [&] {
    const StageResult res = stage_forward(z, y, params, groups, model.geom, model.box);
    return network_loss(model, res.output, clean);
  };
  StageResult res = stage_forward(z, y, params, groups, model.geom, model.box);
  ImageTensor up = loss_grad(from_network_space(mode, res.output), clean);
  if (mode == ColorMode::color) up = opponent_to_rgb_adjoint(up);
  StageGrads g = stage_backward(res.tape, up, params, groups, model.geom);
  if (opt.tamper) opt.tamper(g);

  compare_stage(acc, params, g, rng, eval);
  std::vector<std::size_t> pixels;
  for (int i = 0; i < kRandomEntries; ++i) pixels.push_back(rng.below(z.size()));
  compare(acc, "input", z.data, g.d_input.data, pixels, eval);
}

/// Two stages through network_backward.
void network_suite(Accumulator& acc, ColorMode mode, GaussianSource& rng, const GradcheckOptions& opt) {
  Model model = suite_model(mode, 2, rng);
  const ImageTensor clean = synthetic_clean(mode, rng);
  const ImageTensor y = to_network_space(mode, add_gaussian_noise(clean, {0.04 * clean.peak, rng.below(1u << 30)}));
  const GroupIndexSet groups = network_groups(model, y);
  const auto eval = [&] { return network_loss(model, run_network(model, y, groups).output, clean); };

  const NetworkPass pass = run_network(model, y, groups);
  std::vector<StageGrads> grads = network_backward(pass.tapes, clean, model);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    if (opt.tamper) opt.tamper(grads[t]);
    compare_stage(acc, model.stages[t], grads[t], rng, eval);
  }
}

}  // namespace

GradcheckReport gradcheck(const GradcheckOptions& options) {
  GaussianSource rng(options.seed);
  Accumulator acc;
  for (const char* name : {"gamma", "pi", "w", "F", "input"}) acc.get(name);
  for (ColorMode mode : {ColorMode::grayscale, ColorMode::color}) {
    stage_suite(acc, mode, rng, options);
    network_suite(acc, mode, rng, options);
  }
  GradcheckReport report;
  report.tolerance = options.tolerance;
  report.classes = std::move(acc.classes);
  return report;
}

}  // namespace nlnet
