#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "nlnet/autodiff.hpp"
#include "nlnet/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace nlnet;
using namespace fixture;

namespace {

constexpr double kDbScale = 20.0 / std::numbers::ln10;

// Central difference at h and h/2 combined by Richardson extrapolation.
double derivative(const std::function<double(double)>& f, double theta) {
  const double h = 1e-4 * std::max(1.0, std::abs(theta));
  const double d1 = (f(theta + h) - f(theta - h)) / (2.0 * h);
  const double d2 = (f(theta + h / 2) - f(theta - h / 2)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

double rel(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4}); }

std::vector<double> flatten(const Model& m) {
  std::vector<double> v;
  for (const auto& s : m.stages) append_parameters(s, v);
  return v;
}

Model unflatten(Model m, const std::vector<double>& v) {
  std::size_t pos = 0;
  for (auto& s : m.stages) pos += assign_parameters(std::span<const double>(v).subspan(pos), s);
  return m;
}

std::vector<double> flat_gradient(const std::vector<StageGrads>& grads) {
  std::vector<double> v;
  for (const auto& g : grads) append_gradient(g, v);
  return v;
}

// Clean image, noisy input kept well inside [0, 255] so no pixel sits on a projection kink.
struct Pair {
  ImageTensor clean;
  ImageTensor noisy;
};

Pair gray_pair(int n, std::mt19937_64& rng) {
  Pair p{oracle::random_image(n, n, 1, 255.0, rng, 70.0, 185.0), {}};
  p.noisy = add_gaussian_noise(p.clean, {12.0, rng()});
  return p;
}

Pair color_pair(int n, std::mt19937_64& rng) {
  Pair p{oracle::random_image(n, n, 3, 1.0, rng, 0.3, 0.7), {}};
  p.noisy = add_gaussian_noise(p.clean, {0.04, rng()});
  return p;
}

}  // namespace

TEST_CASE("loss examples") {
  ImageTensor x(4, 4, 1, 255.0, 100.0);
  ImageTensor y(4, 4, 1, 255.0, 125.0);
  CHECK(loss(y, x) == doctest::Approx(-20.0 * std::log10(255.0 / 25.0)).epsilon(1e-13));
  CHECK(loss(y, x) == doctest::Approx(-20.1720).epsilon(1e-5));
  ImageTensor y2(4, 4, 1, 255.0, 150.0);
  CHECK(loss(y2, x) - loss(y, x) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));

  std::mt19937_64 rng(51);
  const ImageTensor a = oracle::random_image(7, 9, 3, 1.0, rng);
  const ImageTensor b = oracle::random_image(7, 9, 3, 1.0, rng);
  CHECK(loss(a, b) == -psnr(a, b));
  CHECK_THROWS_AS(loss(a, a), InfinitePsnrError);
}

TEST_CASE("loss gradient closed form and identities") {
  const ImageTensor x(5, 4, 1, 255.0, 10.0);
  const ImageTensor y(5, 4, 1, 255.0, 13.0);
  const ImageTensor g = loss_grad(y, x);
  for (double v : g.data) CHECK(v == doctest::Approx(kDbScale / (3.0 * 20)).epsilon(1e-14));

  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageTensor a = oracle::random_image(8, 8, 1 + 2 * (trial % 2), 255.0, rng);
    const ImageTensor b = oracle::random_image(8, 8, a.channels, 255.0, rng);
    const ImageTensor gr = loss_grad(a, b);
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.data[i] - b.data[i];
    CHECK(std::abs(dot(gr.data, diff) - kDbScale) <= 1e-12 * kDbScale);
  }

  const ImageTensor a = oracle::random_image(8, 8, 1, 255.0, rng);
  const ImageTensor b = oracle::random_image(8, 8, 1, 255.0, rng);
  const ImageTensor gr = loss_grad(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double fd = derivative(
        [&](double v) {
          ImageTensor t = a;
          t.data[i] = v;
          return loss(t, b);
        },
        a.data[i]);
    CHECK(std::abs(gr.data[i] - fd) <= 1e-7 * std::abs(fd));
  }

  CHECK_THROWS_AS(loss_grad(a, a), InfinitePsnrError);
  CHECK_THROWS_AS(loss_grad(a, oracle::random_image(8, 7, 1, 255.0, rng)), std::invalid_argument);
}

TEST_CASE("zero mixture leaves only the gamma gradient") {
  std::mt19937_64 rng(53);
  const PatchGeometry g = geometry(5, 7, 4);
  const Pair p = gray_pair(16, rng);
  const ImageTensor z = oracle::random_image(16, 16, 1, 255.0, rng, 60.0, 190.0);
  const GroupIndexSet groups = block_match(p.noisy, g);
  StageParams sp = random_stage(g, 1, 100.0, rng);
  for (double& v : sp.mixture.values()) v = 0.0;
  const BoxConstraint box = BoxConstraint::for_mode(ColorMode::grayscale);
  const StageResult res = stage_forward(z, p.noisy, sp, groups, g, box);
  const ImageTensor up = loss_grad(res.output, p.clean);
  const StageGrads gr = stage_backward(res.tape, up, sp, groups, g);
  CHECK(oracle::max_abs(gr.d_transform.values()) == 0.0);
  CHECK(oracle::max_abs(gr.d_weights) == 0.0);
  double expected = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) expected += (p.noisy.data[i] - z.data[i]) * up.data[i] * res.tape.mask[i];
  CHECK(gr.d_gamma == doctest::Approx(expected).epsilon(1e-12));
  CHECK(oracle::max_abs(gr.d_mixture) > 0.0);
}

TEST_CASE("zero upstream gives zero gradients") {
  std::mt19937_64 rng(54);
  const PatchGeometry g = geometry(5, 7, 4);
  const Pair p = color_pair(14, rng);
  const ImageTensor y = rgb_to_opponent(p.noisy);
  const GroupIndexSet groups = block_match(extract_plane(y, 0), g);
  const StageParams sp = random_stage(g, 3, 0.4, rng);
  const StageResult res = stage_forward(y, y, sp, groups, g, BoxConstraint::for_mode(ColorMode::color));
  const StageGrads gr = stage_backward(res.tape, ImageTensor(14, 14, 3, 1.0), sp, groups, g);
  CHECK(gr.d_gamma == 0.0);
  CHECK(oracle::max_abs(gr.d_transform.values()) == 0.0);
  CHECK(oracle::max_abs(gr.d_weights) == 0.0);
  CHECK(oracle::max_abs(gr.d_mixture) == 0.0);
  CHECK(oracle::max_abs(gr.d_input.data) == 0.0);
  CHECK(gr.d_mixture.size() == sp.mixture.values().size());
  CHECK(gr.d_input.channels == 3);
}

TEST_CASE("stage gradients match finite differences on every parameter") {
  std::mt19937_64 rng(55);
  const PatchGeometry g = geometry(3, 5, 3);
  const Pair p = gray_pair(10, rng);
  const ImageTensor z = add_gaussian_noise(p.clean, {6.0, rng()});
  const GroupIndexSet groups = block_match(p.noisy, g);
  const BoxConstraint box = BoxConstraint::for_mode(ColorMode::grayscale);
  const StageParams sp = random_stage(g, 1, 100.0, rng);

  auto stage_loss = [&](const StageParams& s, const ImageTensor& in) {
    return loss(stage_forward(in, p.noisy, s, groups, g, box).output, p.clean);
  };
  const StageResult res = stage_forward(z, p.noisy, sp, groups, g, box);
  for (std::uint8_t m : res.tape.mask) REQUIRE(m == 1);
  const StageGrads gr = stage_backward(res.tape, loss_grad(res.output, p.clean), sp, groups, g);

  std::vector<double> theta;
  append_parameters(sp, theta);
  std::vector<double> analytic;
  append_gradient(gr, analytic);
  REQUIRE(analytic.size() == theta.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double fd = derivative(
        [&](double v) {
          std::vector<double> t = theta;
          t[k] = v;
          StageParams s = sp;
          assign_parameters(t, s);
          return stage_loss(s, z);
        },
        theta[k]);
    worst = std::max(worst, rel(analytic[k], fd));
  }
  CHECK(worst <= 1e-5);

  double worst_input = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double fd = derivative(
        [&](double v) {
          ImageTensor t = z;
          t.data[i] = v;
          return stage_loss(sp, t);
        },
        z.data[i]);
    worst_input = std::max(worst_input, rel(gr.d_input.data[i], fd));
  }
  CHECK(worst_input <= 1e-5);
}

TEST_CASE("two-stage color network gradients match finite differences") {
  std::mt19937_64 rng(56);
  const PatchGeometry g = geometry(3, 5, 3);
  const Pair p = color_pair(10, rng);
  const Model model = make_model(ColorMode::color, g, {random_stage(g, 3, 0.4, rng), random_stage(g, 3, 0.4, rng)});
  const ImageTensor input = to_network_space(ColorMode::color, p.noisy);
  const GroupIndexSet groups = network_groups(model, input);
  const NetworkPass pass = run_network(model, input, groups);
  for (const auto& t : pass.tapes)
    for (std::uint8_t m : t.mask) REQUIRE(m == 1);
  const std::vector<double> analytic = flat_gradient(network_backward(pass.tapes, p.clean, model));
  const std::vector<double> theta = flatten(model);
  REQUIRE(analytic.size() == theta.size());

  // Every gamma, F and w entry plus a strided subset of the mixture coefficients.
  std::vector<std::size_t> picks;
  std::size_t offset = 0;
  for (const auto& s : model.stages) {
    const std::size_t dense = 1 + s.transform.matrix.size() + s.weights.values.size();
    for (std::size_t k = 0; k < dense; ++k) picks.push_back(offset + k);
    for (std::size_t k = dense; k < parameter_count(s); k += 37) picks.push_back(offset + k);
    offset += parameter_count(s);
  }
  double worst = 0.0;
  for (std::size_t k : picks) {
    const double fd = derivative(
        [&](double v) {
          std::vector<double> t = theta;
          t[k] = v;
          const Model m = unflatten(model, t);
          return network_loss(m, run_network(m, input, groups).output, p.clean);
        },
        theta[k]);
    worst = std::max(worst, rel(analytic[k], fd));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("single-stage network_backward equals stage_backward") {
  std::mt19937_64 rng(57);
  const PatchGeometry g = geometry(5, 7, 4);
  {
    const Pair p = gray_pair(16, rng);
    const Model model = make_model(ColorMode::grayscale, g, {random_stage(g, 1, 100.0, rng)});
    const GroupIndexSet groups = network_groups(model, p.noisy);
    const NetworkPass pass = run_network(model, p.noisy, groups);
    const auto net = network_backward(pass.tapes, p.clean, model);
    const StageGrads direct =
        stage_backward(pass.tapes[0], loss_grad(pass.output, p.clean), model.stages[0], groups, g);
    std::vector<double> a;
    std::vector<double> b;
    append_gradient(net[0], a);
    append_gradient(direct, b);
    CHECK(a == b);
    CHECK(net[0].d_input == direct.d_input);
  }
  {
    const Pair p = color_pair(16, rng);
    const Model model = make_model(ColorMode::color, g, {random_stage(g, 3, 0.4, rng)});
    const ImageTensor input = to_network_space(ColorMode::color, p.noisy);
    const GroupIndexSet groups = network_groups(model, input);
    const NetworkPass pass = run_network(model, input, groups);
    const auto net = network_backward(pass.tapes, p.clean, model);
    const ImageTensor up = opponent_to_rgb_adjoint(loss_grad(opponent_to_rgb(pass.output), p.clean));
    const StageGrads direct = stage_backward(pass.tapes[0], up, model.stages[0], groups, g);
    std::vector<double> a;
    std::vector<double> b;
    append_gradient(net[0], a);
    append_gradient(direct, b);
    CHECK(a == b);
  }
}

TEST_CASE("a fully clamped projection blocks every gradient") {
  std::mt19937_64 rng(58);
  const PatchGeometry g = geometry(5, 7, 4);
  const ImageTensor clean = oracle::random_image(14, 14, 1, 255.0, rng, 100.0, 150.0);
  const ImageTensor noisy = oracle::random_image(14, 14, 1, 255.0, rng, 395.0, 405.0);
  const Model model = make_model(ColorMode::grayscale, g, {random_stage(g, 1, 100.0, rng), random_stage(g, 1, 100.0, rng)});
  const GroupIndexSet groups = network_groups(model, noisy);
  const NetworkPass pass = run_network(model, noisy, groups);
  for (std::uint8_t m : pass.tapes[0].mask) REQUIRE(m == 0);
  const auto grads = network_backward(pass.tapes, clean, model);
  // Stage 2 sees a constant 255 input; only the first stage's mask is fully closed.
  const StageGrads& first = grads[0];
  CHECK(first.d_gamma == 0.0);
  CHECK(oracle::max_abs(first.d_transform.values()) == 0.0);
  CHECK(oracle::max_abs(first.d_weights) == 0.0);
  CHECK(oracle::max_abs(first.d_mixture) == 0.0);
  CHECK(oracle::max_abs(first.d_input.data) == 0.0);
}

TEST_CASE("network_backward requires one tape per stage") {
  std::mt19937_64 rng(59);
  const PatchGeometry g = geometry(5, 7, 4);
  const Pair p = gray_pair(14, rng);
  const Model model = make_model(ColorMode::grayscale, g, {random_stage(g, 1, 100.0, rng), random_stage(g, 1, 100.0, rng)});
  const GroupIndexSet groups = network_groups(model, p.noisy);
  NetworkPass pass = run_network(model, p.noisy, groups);
  pass.tapes.pop_back();
  CHECK_THROWS_AS(network_backward(pass.tapes, p.clean, model), std::invalid_argument);

  const StageResult res = stage_forward(p.noisy, p.noisy, model.stages[0], groups, g, model.box);
  CHECK_THROWS_AS(stage_backward(res.tape, ImageTensor(14, 13, 1, 255.0), model.stages[0], groups, g),
                  std::invalid_argument);
  const GroupIndexSet other = block_match(p.clean, g);
  CHECK_THROWS_AS(stage_backward(res.tape, ImageTensor(14, 14, 1, 255.0), model.stages[0], other, g),
                  std::invalid_argument);
}

TEST_CASE("parameter flattening round trip and layout") {
  std::mt19937_64 rng(60);
  const PatchGeometry g = geometry(5, 7, 4);
  const StageParams sp = random_stage(g, 3, 0.4, rng);
  CHECK(parameter_count(sp) == 1u + 24u * 25u + 4u + 3u * 24u * 63u);
  std::vector<double> v;
  append_parameters(sp, v);
  REQUIRE(v.size() == parameter_count(sp));
  CHECK(v[0] == sp.gamma);
  CHECK(v[1] == sp.transform.matrix(0, 0));
  CHECK(v[2] == sp.transform.matrix(0, 1));
  CHECK(v[1 + 600] == sp.weights.values[0]);
  CHECK(v[1 + 600 + 4] == sp.mixture.values()[0]);
  CHECK(v.back() == sp.mixture.weights(2, 23)[62]);

  StageParams copy = zero_stage(g, 3, 0.0);
  CHECK(assign_parameters(v, copy) == v.size());
  CHECK(copy == sp);
  CHECK_THROWS_AS(assign_parameters(std::span<const double>(v).first(v.size() - 1), copy), std::invalid_argument);
}
