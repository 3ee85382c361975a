#include "nlnet/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace nlnet {

void PatchTransform::validate(const PatchGeometry& geom) const {
  if (geom.patch_size() < 2) throw std::invalid_argument("PatchTransform: patches need at least 2 samples");
  if (matrix.cols() != static_cast<std::size_t>(geom.patch_size()) ||
      matrix.rows() != static_cast<std::size_t>(geom.coeff_count()))
    throw std::invalid_argument("PatchTransform: matrix must be (P-1) x P for the patch geometry");
  for (const double v : matrix.values())
    if (!std::isfinite(v)) throw std::invalid_argument("PatchTransform: non-finite entry");
}

PatchTransform PatchTransform::dct(const PatchGeometry& geom) {
  geom.validate();
  if (geom.patch_size() < 2) throw std::invalid_argument("PatchTransform: patches need at least 2 samples");
  const int ph = geom.patch_h;
  const int pw = geom.patch_w;

  // Zig-zag over (vertical u, horizontal v) frequencies; odd diagonals run
  // with u increasing, even diagonals with u decreasing.
  std::vector<std::pair<int, int>> order;
  for (int s = 0; s <= ph + pw - 2; ++s) {
    std::vector<std::pair<int, int>> diag;
    for (int u = 0; u < ph; ++u) {
      const int v = s - u;
      if (v >= 0 && v < pw) diag.emplace_back(u, v);
    }
    if (s % 2 == 0) std::reverse(diag.begin(), diag.end());
    order.insert(order.end(), diag.begin(), diag.end());
  }

  auto basis = [](int freq, int pos, int n) {
    const double scale = freq == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    return scale * std::cos(std::numbers::pi * (2.0 * pos + 1.0) * freq / (2.0 * n));
  };

  PatchTransform t;
  t.matrix = Matrix(static_cast<std::size_t>(geom.coeff_count()), static_cast<std::size_t>(geom.patch_size()));
  std::size_t row = 0;
  for (const auto& [u, v] : order) {
    if (u == 0 && v == 0) continue;
    for (int col = 0; col < pw; ++col)
      for (int r = 0; r < ph; ++r) t.matrix(row, static_cast<std::size_t>(col * ph + r)) = basis(u, r, ph) * basis(v, col, pw);
    ++row;
  }
  return t;
}

void GroupWeights::validate(const PatchGeometry& geom) const {
  if (size() != geom.group_size) throw std::invalid_argument("GroupWeights: length must equal the group size");
  for (const double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("GroupWeights: non-finite weight");
}

GroupWeights GroupWeights::reference_only(int group_size) {
  if (group_size < 1) throw std::invalid_argument("GroupWeights: group size must be >= 1");
  GroupWeights w;
  w.values.assign(static_cast<std::size_t>(group_size), 0.0);
  w.values[0] = 1.0;
  return w;
}

CoeffField transform_patches(const ImageTensor& x, const PatchTransform& transform, const PatchGeometry& geom) {
  transform.validate(geom);
  return multiply_transposed(extract_patches(x, geom), transform.matrix);
}

ImageTensor transform_patches_adjoint(const CoeffField& t, const PatchTransform& transform, const PatchGeometry& geom,
                                      int height, int width, double peak) {
  transform.validate(geom);
  return accumulate_patches(multiply(t, transform.matrix), geom, height, width, peak);
}

namespace {

void check_groups(const CoeffField& f, const GroupWeights& weights, const GroupIndexSet& groups) {
  if (f.rows() != groups.count())
    throw std::invalid_argument("non-local operator: coefficient rows do not match the group index set");
  if (weights.size() != groups.group_size)
    throw std::invalid_argument("non-local operator: weight count does not match the group size");
}

}  // namespace

CoeffField group_combine(const CoeffField& f, const GroupWeights& weights, const GroupIndexSet& groups) {
  check_groups(f, weights, groups);
  CoeffField z(f.rows(), f.cols());
  for (std::size_t r = 0; r < groups.count(); ++r) {
    const auto g = groups.group(r);
    auto zr = z.row(r);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double wk = weights.values[k];
      const auto fk = f.row(static_cast<std::size_t>(g[k]));
      for (std::size_t i = 0; i < zr.size(); ++i) zr[i] += wk * fk[i];
    }
  }
  return z;
}

CoeffField group_combine_adjoint(const CoeffField& z, const GroupWeights& weights, const GroupIndexSet& groups) {
  check_groups(z, weights, groups);
  CoeffField t(z.rows(), z.cols());
  for (std::size_t r = 0; r < groups.count(); ++r) {
    const auto g = groups.group(r);
    const auto zr = z.row(r);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double wk = weights.values[k];
      auto tk = t.row(static_cast<std::size_t>(g[k]));
      for (std::size_t i = 0; i < zr.size(); ++i) tk[i] += wk * zr[i];
    }
  }
  return t;
}

CoeffField nl_forward(const ImageTensor& x, const PatchTransform& transform, const GroupWeights& weights,
                      const GroupIndexSet& groups, const PatchGeometry& geom) {
  if (x.height != groups.height || x.width != groups.width)
    throw std::invalid_argument("nl_forward: image and group index set dimensions differ");
  return group_combine(transform_patches(x, transform, geom), weights, groups);
}

ImageTensor nl_adjoint(const CoeffField& z, const PatchTransform& transform, const GroupWeights& weights,
                       const GroupIndexSet& groups, const PatchGeometry& geom, int height, int width, double peak) {
  if (height != groups.height || width != groups.width)
    throw std::invalid_argument("nl_adjoint: output and group index set dimensions differ");
  if (z.cols() != static_cast<std::size_t>(transform.coeff_count()))
    throw std::invalid_argument("nl_adjoint: coefficient count does not match the transform");
  return transform_patches_adjoint(group_combine_adjoint(z, weights, groups), transform, geom, height, width, peak);
}

}  // namespace nlnet
