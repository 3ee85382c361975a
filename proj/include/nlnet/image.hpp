#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace nlnet {

/// Planar multi-channel image. Samples are stored channel by channel, each
/// plane row-major. Grayscale images live in [0, 255] with peak 255, color
/// images in [0, 1] with peak 1.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  double peak = 255.0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, double peak_level, double fill = 0.0);

  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const noexcept { return data.size(); }

  std::span<double> plane(int c);
  std::span<const double> plane(int c) const;

  double& at(int c, int row, int col) { return data[(c * pixels()) + static_cast<std::size_t>(row) * width + col]; }
  double at(int c, int row, int col) const {
    return data[(c * pixels()) + static_cast<std::size_t>(row) * width + col];
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height == other.height && width == other.width && channels == other.channels;
  }

  /// Throws std::invalid_argument if the tensor violates its invariants.
  void validate() const;

  bool operator==(const ImageTensor&) const = default;
};

struct NoiseSpec {
  double sigma = 0.0;  ///< standard deviation in the image's intensity units
  std::uint64_t seed = 0;
};

struct Margins {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;
};

/// Reads binary PGM (P5) or PPM (P6) with maxval 255.
ImageTensor load_image(const std::filesystem::path& path);
ImageTensor decode_pnm(std::span<const std::uint8_t> bytes);

/// Writes P5 (1 channel) or P6 (3 channels). Samples are clamped to
/// [0, peak], rescaled to 0..255 and rounded half away from zero.
void save_image(const ImageTensor& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pnm(const ImageTensor& img);

/// Mirror padding that repeats the edge sample: [1 2 3] padded by 2 gives
/// [2 1 1 2 3 3 2]. Each margin must be smaller than the matching dimension.
ImageTensor symmetric_pad(const ImageTensor& img, Margins margins);

/// Index into [0, n) for position i under symmetric reflection; valid for -n <= i < 2n.
inline int reflect_index(int i, int n) noexcept {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - 1 - i;
  return i;
}

/// 20 log10(peak sqrt(N) / ||y - x||), N counting every sample of every channel.
/// Throws InfinitePsnrError when y == x.
double psnr(const ImageTensor& y, const ImageTensor& x);

/// Adds i.i.d. N(0, sigma^2) noise from GaussianSource(seed). No clamping.
ImageTensor add_gaussian_noise(const ImageTensor& img, const NoiseSpec& spec);

/// Deterministic standard-normal generator: std::mt19937_64 for the raw
/// 64-bit stream (its output sequence is fixed by the C++ standard) and the
/// Box-Muller transform for the Gaussian pairs. Uniforms are built from the
/// top 53 bits as (k + 1) * 2^-53, so they lie in (0, 1].
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed);
  double next();
  /// Uniform in (0, 1].
  double uniform();
  /// Uniform integer in [0, n) by rejection sampling on the raw stream.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Independent stream seed for item `index` of a run seeded with `seed` (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Opponent color transform, luminance first:
///   O1 = (R + G + B) / 3,  O2 = (R - B) / 2,  O3 = (R - 2G + B) / 4.
ImageTensor rgb_to_opponent(const ImageTensor& img);
ImageTensor opponent_to_rgb(const ImageTensor& img);
/// Transpose of opponent_to_rgb; maps RGB-space gradients to opponent space.
ImageTensor opponent_to_rgb_adjoint(const ImageTensor& img);

/// Per-channel bounds of the RGB unit cube mapped through rgb_to_opponent.
void opponent_range(std::span<double, 3> lower, std::span<double, 3> upper);

/// Single channel copy of plane c (peak preserved).
ImageTensor extract_plane(const ImageTensor& img, int c);
void insert_plane(ImageTensor& img, int c, const ImageTensor& plane);

ImageTensor crop(const ImageTensor& img, int row, int col, int height, int width);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace nlnet
