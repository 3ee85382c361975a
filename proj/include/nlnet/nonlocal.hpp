#pragma once

#include <vector>

#include "nlnet/image.hpp"
#include "nlnet/matrix.hpp"
#include "nlnet/patches.hpp"

namespace nlnet {

/// Non-redundant patch transform without the DC direction: (P - 1) x P.
struct PatchTransform {
  Matrix matrix;

  int coeff_count() const noexcept { return static_cast<int>(matrix.rows()); }
  int patch_size() const noexcept { return static_cast<int>(matrix.cols()); }
  void validate(const PatchGeometry& geom) const;

  /// Orthonormal 2-D DCT-II basis of the patch with the constant vector
  /// dropped, rows in JPEG zig-zag order.
  static PatchTransform dct(const PatchGeometry& geom);

  bool operator==(const PatchTransform&) const = default;
};

/// One scalar per group member, shared by every transform coefficient.
struct GroupWeights {
  std::vector<double> values;

  int size() const noexcept { return static_cast<int>(values.size()); }
  void validate(const PatchGeometry& geom) const;

  /// w_1 = 1 and all other weights zero.
  static GroupWeights reference_only(int group_size);

  bool operator==(const GroupWeights&) const = default;
};

/// R x F_c matrix; row r holds the coefficients of patch (or group) r.
using CoeffField = Matrix;

/// f_p = F x_p for every patch p of a single-channel image.
CoeffField transform_patches(const ImageTensor& x, const PatchTransform& transform, const PatchGeometry& geom);

/// Adjoint of transform_patches: accumulate_patches(t F).
ImageTensor transform_patches_adjoint(const CoeffField& t, const PatchTransform& transform, const PatchGeometry& geom,
                                      int height, int width, double peak);

/// z_r = sum_k w_k f_{i_{r,k}}.
CoeffField group_combine(const CoeffField& f, const GroupWeights& weights, const GroupIndexSet& groups);

/// Adjoint of group_combine: t_p = sum over (r, k) with i_{r,k} = p of w_k z_r.
/// Accumulates serially in (r, k) order.
CoeffField group_combine_adjoint(const CoeffField& z, const GroupWeights& weights, const GroupIndexSet& groups);

/// L x: z_r = sum_k w_k F x_{i_{r,k}}.
CoeffField nl_forward(const ImageTensor& x, const PatchTransform& transform, const GroupWeights& weights,
                      const GroupIndexSet& groups, const PatchGeometry& geom);

/// L^T z = sum_r P_{i_r}^T F~^T W^T z_r.
ImageTensor nl_adjoint(const CoeffField& z, const PatchTransform& transform, const GroupWeights& weights,
                       const GroupIndexSet& groups, const PatchGeometry& geom, int height, int width,
                       double peak = 255.0);

}  // namespace nlnet
