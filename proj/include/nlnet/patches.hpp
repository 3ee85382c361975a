#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "nlnet/image.hpp"
#include "nlnet/matrix.hpp"

namespace nlnet {

/// Patch and block-matching configuration. Patch vectors list samples
/// column by column (column-major within the patch); stride is always 1 so
/// every pixel is the center of one patch.
struct PatchGeometry {
  int patch_h = 5;
  int patch_w = 5;
  int stride = 1;
  int window = 31;  ///< odd side length of the block-matching search window
  int group_size = 8;

  int patch_size() const noexcept { return patch_h * patch_w; }
  int coeff_count() const noexcept { return patch_size() - 1; }

  /// Symmetric padding that makes the number of patches equal the pixel count.
  Margins margins() const noexcept {
    return {patch_h / 2, patch_h - 1 - patch_h / 2, patch_w / 2, patch_w - 1 - patch_w / 2};
  }

  void validate() const;
  /// Also checks that the image is large enough for the padding and that a
  /// corner patch still has group_size - 1 candidates in its clipped window.
  void validate_for(int height, int width) const;

  bool operator==(const PatchGeometry&) const = default;
};

/// For each patch r (linear index row * width + col), an ordered tuple of
/// group_size patch indices whose first entry is r itself.
struct GroupIndexSet {
  int height = 0;
  int width = 0;
  int group_size = 0;
  std::vector<std::int32_t> indices;  // count() x group_size

  std::size_t count() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::span<const std::int32_t> group(std::size_t r) const {
    return {indices.data() + r * group_size, static_cast<std::size_t>(group_size)};
  }

  void validate() const;
  bool operator==(const GroupIndexSet&) const = default;
};

/// Source pixel of every patch entry after symmetric padding, i.e. the
/// nonzero column of each row of the binary patch-extraction matrices.
class PatchLayout {
 public:
  PatchLayout(int height, int width, const PatchGeometry& geom);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int patch_size() const noexcept { return patch_size_; }
  std::size_t count() const noexcept { return static_cast<std::size_t>(height_) * width_; }

  std::span<const std::int32_t> sources(std::size_t r) const {
    return {sources_.data() + r * patch_size_, static_cast<std::size_t>(patch_size_)};
  }

 private:
  int height_;
  int width_;
  int patch_size_;
  std::vector<std::int32_t> sources_;
};

/// Pads `img` symmetrically and gathers one patch per pixel: row r of the
/// result holds the column-major samples of the patch centered at pixel r.
Matrix extract_patches(const ImageTensor& img, const PatchGeometry& geom);

/// Exact adjoint of extract_patches: scatter-adds every patch entry back to
/// the pixel it was read from, folding padded samples onto their mirrors.
ImageTensor accumulate_patches(const Matrix& patches, const PatchGeometry& geom, int height, int width,
                               double peak = 255.0);

/// Block matching on a single-channel image. Candidates for patch r are the
/// patch centers inside the window x window square around r, clipped at the
/// image border. They are ranked by squared Euclidean patch distance, ties
/// broken by smaller linear index.
GroupIndexSet block_match(const ImageTensor& img, const PatchGeometry& geom);

/// Debug export, one line per patch: "r,i_1,...,i_K".
void write_groups_csv(const GroupIndexSet& groups, std::ostream& out);

}  // namespace nlnet
