#pragma once

// Small parameter sets shared by the network, gradient and training tests.

#include <random>
#include <vector>

#include "nlnet/network.hpp"

namespace fixture {

using namespace nlnet;

inline PatchGeometry geometry(int p, int window, int k) {
  PatchGeometry g;
  g.patch_h = p;
  g.patch_w = p;
  g.window = window;
  g.group_size = k;
  return g;
}

inline StageParams random_stage(const PatchGeometry& g, int channels, double delta, std::mt19937_64& rng) {
  StageParams sp;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  sp.gamma = 0.5 + 0.5 * u(rng);
  sp.transform = PatchTransform::dct(g);
  for (double& v : sp.transform.matrix.values()) v += 0.05 * std::normal_distribution<double>()(rng);
  sp.weights.values.assign(static_cast<std::size_t>(g.group_size), 0.0);
  sp.weights.values[0] = 1.0;
  for (std::size_t k = 1; k < sp.weights.values.size(); ++k) sp.weights.values[k] = 0.3 * u(rng) - 0.05;
  sp.mixture = RBFMixture(RBFGrid::make(63, delta), channels, g.coeff_count());
  const std::vector<double> base = fit_linear_init(sp.mixture.grid(), 0.1);
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < g.coeff_count(); ++i) {
      auto pi = sp.mixture.weights(c, i);
      for (int j = 0; j < 63; ++j) pi[j] = base[j] * (1.0 + 0.3 * std::normal_distribution<double>()(rng));
    }
  return sp;
}

inline Model make_model(ColorMode mode, const PatchGeometry& g, std::vector<StageParams> stages) {
  Model m;
  m.mode = mode;
  m.geom = g;
  m.box = BoxConstraint::for_mode(mode);
  m.stages = std::move(stages);
  return m;
}

inline StageParams zero_stage(const PatchGeometry& g, int channels, double gamma) {
  StageParams sp;
  sp.gamma = gamma;
  sp.transform = PatchTransform::dct(g);
  sp.weights = GroupWeights::reference_only(g.group_size);
  sp.mixture = RBFMixture(RBFGrid::make(63, channels == 3 ? 0.4 : 100.0), channels, g.coeff_count());
  return sp;
}


}  // namespace fixture
