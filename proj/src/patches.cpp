#include "nlnet/patches.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

#include "nlnet/parallel.hpp"

namespace nlnet {

void PatchGeometry::validate() const {
  if (patch_h < 1 || patch_w < 1) throw std::invalid_argument("PatchGeometry: patch dimensions must be >= 1");
  if (stride != 1) throw std::invalid_argument("PatchGeometry: only stride 1 is supported");
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("PatchGeometry: window must be odd and >= 1");
  if (group_size < 1 || group_size > window * window)
    throw std::invalid_argument("PatchGeometry: group size must lie in [1, window^2]");
}

void PatchGeometry::validate_for(int height, int width) const {
  validate();
  const Margins m = margins();
  if (std::max(m.top, m.bottom) >= height || std::max(m.left, m.right) >= width)
    throw std::invalid_argument("PatchGeometry: image " + std::to_string(height) + "x" + std::to_string(width) +
                                " is too small for " + std::to_string(patch_h) + "x" + std::to_string(patch_w) +
                                " patches");
  const int half = window / 2;
  const long corner = static_cast<long>(std::min(half, height - 1) + 1) * (std::min(half, width - 1) + 1);
  if (corner < group_size)
    throw std::invalid_argument("PatchGeometry: clipped search window at the image corner holds " +
                                std::to_string(corner) + " candidates, fewer than group size " +
                                std::to_string(group_size));
}

void GroupIndexSet::validate() const {
  if (height <= 0 || width <= 0 || group_size < 1) throw std::invalid_argument("GroupIndexSet: bad dimensions");
  if (indices.size() != count() * group_size) throw std::invalid_argument("GroupIndexSet: index count mismatch");
  const auto total = static_cast<std::int32_t>(count());
  for (std::size_t r = 0; r < count(); ++r) {
    const auto g = group(r);
    if (g[0] != static_cast<std::int32_t>(r)) throw std::invalid_argument("GroupIndexSet: first entry must be r");
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g[k] < 0 || g[k] >= total) throw std::invalid_argument("GroupIndexSet: index out of range");
      for (std::size_t j = 0; j < k; ++j)
        if (g[j] == g[k]) throw std::invalid_argument("GroupIndexSet: repeated index within a group");
    }
  }
}

PatchLayout::PatchLayout(int height, int width, const PatchGeometry& geom)
    : height_(height), width_(width), patch_size_(geom.patch_size()) {
  geom.validate();
  const Margins m = geom.margins();
  if (std::max(m.top, m.bottom) >= height || std::max(m.left, m.right) >= width)
    throw std::invalid_argument("PatchLayout: padding margins must be smaller than the image");
  sources_.resize(count() * patch_size_);
  std::size_t pos = 0;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      for (int dc = -m.left; dc <= m.right; ++dc) {
        const int col = reflect_index(j + dc, width);
        for (int dr = -m.top; dr <= m.bottom; ++dr) {
          sources_[pos++] = reflect_index(i + dr, height) * width + col;
        }
      }
    }
  }
}

Matrix extract_patches(const ImageTensor& img, const PatchGeometry& geom) {
  img.validate();
  if (img.channels != 1) throw std::invalid_argument("extract_patches: expected a single-channel image");
  const PatchLayout layout(img.height, img.width, geom);
  Matrix out(layout.count(), layout.patch_size());
  for (std::size_t r = 0; r < layout.count(); ++r) {
    const auto src = layout.sources(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = img.data[src[j]];
  }
  return out;
}

ImageTensor accumulate_patches(const Matrix& patches, const PatchGeometry& geom, int height, int width, double peak) {
  const PatchLayout layout(height, width, geom);
  if (patches.rows() != layout.count() || patches.cols() != static_cast<std::size_t>(layout.patch_size()))
    throw std::invalid_argument("accumulate_patches: patch matrix shape does not match the geometry");
  ImageTensor out(height, width, 1, peak);
  for (std::size_t r = 0; r < layout.count(); ++r) {
    const auto src = layout.sources(r);
    const auto row = patches.row(r);
    for (std::size_t j = 0; j < src.size(); ++j) out.data[src[j]] += row[j];
  }
  return out;
}

GroupIndexSet block_match(const ImageTensor& img, const PatchGeometry& geom) {
  img.validate();
  if (img.channels != 1) throw std::invalid_argument("block_match: expected a single-channel image");
  geom.validate();
  const Matrix patches = extract_patches(img, geom);
  const int h = img.height;
  const int w = img.width;
  const int half = geom.window / 2;
  const int k = geom.group_size;
  const std::size_t p = patches.cols();

  GroupIndexSet groups;
  groups.height = h;
  groups.width = w;
  groups.group_size = k;
  groups.indices.resize(static_cast<std::size_t>(h) * w * k);

  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row_index) {
    const int i = static_cast<int>(row_index);
    std::vector<std::pair<double, std::int32_t>> candidates;
    candidates.reserve(static_cast<std::size_t>(geom.window) * geom.window);
    for (int j = 0; j < w; ++j) {
      const std::int32_t r = i * w + j;
      const auto ref = patches.row(r);
      candidates.clear();
      for (int ci = std::max(0, i - half); ci <= std::min(h - 1, i + half); ++ci) {
        for (int cj = std::max(0, j - half); cj <= std::min(w - 1, j + half); ++cj) {
          const std::int32_t c = ci * w + cj;
          if (c == r) continue;
          const auto other = patches.row(c);
          double d = 0.0;
          for (std::size_t t = 0; t < p; ++t) {
            const double diff = ref[t] - other[t];
            d += diff * diff;
          }
          candidates.emplace_back(d, c);
        }
      }
      const std::size_t need = static_cast<std::size_t>(k - 1);
      if (candidates.size() < need)
        throw std::invalid_argument("block_match: search window at pixel " + std::to_string(r) +
                                    " holds fewer than group_size - 1 candidates");
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(need), candidates.end());
      std::int32_t* out = groups.indices.data() + static_cast<std::size_t>(r) * k;
      out[0] = r;
      for (std::size_t t = 0; t < need; ++t) out[t + 1] = candidates[t].second;
    }
  });
  return groups;
}

void write_groups_csv(const GroupIndexSet& groups, std::ostream& out) {
  for (std::size_t r = 0; r < groups.count(); ++r) {
    out << r;
    for (const auto idx : groups.group(r)) out << ',' << idx;
    out << '\n';
  }
}

}  // namespace nlnet
