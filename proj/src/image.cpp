#include "nlnet/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nlnet/errors.hpp"

namespace nlnet {

ImageTensor::ImageTensor(int h, int w, int c, double peak_level, double fill)
    : height(h), width(w), channels(c), peak(peak_level) {
  if (h < 0 || w < 0 || c < 0) throw std::invalid_argument("ImageTensor: negative dimension");
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

std::span<double> ImageTensor::plane(int c) {
  return {data.data() + static_cast<std::size_t>(c) * pixels(), pixels()};
}

std::span<const double> ImageTensor::plane(int c) const {
  return {data.data() + static_cast<std::size_t>(c) * pixels(), pixels()};
}

void ImageTensor::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0)
    throw std::invalid_argument("ImageTensor: dimensions must be positive");
  if (data.size() != static_cast<std::size_t>(height) * width * channels)
    throw std::invalid_argument("ImageTensor: data length does not match height*width*channels");
  if (!(peak > 0.0)) throw std::invalid_argument("ImageTensor: peak must be positive");
}

// ---------------------------------------------------------------------------
// PNM codec

namespace {

bool is_space(std::uint8_t b) { return b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\v' || b == '\f'; }

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (is_space(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long long value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1 << 24)) throw ParseError(std::string("PNM header: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PNM header: expected ") + what, pos_);
    return static_cast<int>(value);
  }

  void expect_single_space() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_]))
      throw ParseError("PNM header: expected whitespace after maxval", pos_);
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

ImageTensor decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw ParseError("PNM: missing 'P' magic", 0);
  int channels = 0;
  if (bytes[1] == '5') {
    channels = 1;
  } else if (bytes[1] == '6') {
    channels = 3;
  } else if (bytes[1] >= '1' && bytes[1] <= '7') {
    throw UnsupportedFormatError(std::string("PNM: unsupported magic P") + static_cast<char>(bytes[1]) +
                                 " (only binary P5/P6 are accepted)");
  } else {
    throw ParseError("PNM: malformed magic", 1);
  }

  HeaderReader reader(bytes);
  const int width = reader.read_uint("width");
  const int height = reader.read_uint("height");
  const int maxval = reader.read_uint("maxval");
  if (width <= 0 || height <= 0) throw ParseError("PNM header: zero image dimension", reader.offset());
  if (maxval != 255) throw UnsupportedFormatError("PNM: maxval " + std::to_string(maxval) + " is not 255");
  reader.expect_single_space();

  const std::size_t start = reader.offset();
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - start < count) throw ParseError("PNM: truncated pixel data", bytes.size());

  const double peak = channels == 1 ? 255.0 : 1.0;
  const double scale = channels == 1 ? 1.0 : 1.0 / 255.0;
  ImageTensor img(height, width, channels, peak);
  const std::size_t n = img.pixels();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < channels; ++c) {
      img.data[c * n + p] = bytes[start + p * channels + c] * scale;
    }
  }
  return img;
}

ImageTensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pnm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pnm(const ImageTensor& img) {
  img.validate();
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("encode_pnm: only 1 or 3 channels can be written");
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t n = img.pixels();
  out.reserve(out.size() + n * img.channels);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < img.channels; ++c) {
      const double v = std::clamp(img.data[c * n + p], 0.0, img.peak) * (255.0 / img.peak);
      out.push_back(static_cast<std::uint8_t>(std::round(v)));
    }
  }
  return out;
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

ImageTensor symmetric_pad(const ImageTensor& img, Margins m) {
  img.validate();
  if (m.top < 0 || m.bottom < 0 || m.left < 0 || m.right < 0)
    throw std::invalid_argument("symmetric_pad: negative margin");
  if (m.top >= img.height || m.bottom >= img.height || m.left >= img.width || m.right >= img.width)
    throw std::invalid_argument("symmetric_pad: margin must be smaller than the image dimension");
  ImageTensor out(img.height + m.top + m.bottom, img.width + m.left + m.right, img.channels, img.peak);
  for (int c = 0; c < img.channels; ++c) {
    for (int r = 0; r < out.height; ++r) {
      const int sr = reflect_index(r - m.top, img.height);
      for (int q = 0; q < out.width; ++q) {
        out.at(c, r, q) = img.at(c, sr, reflect_index(q - m.left, img.width));
      }
    }
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double psnr(const ImageTensor& y, const ImageTensor& x) {
  if (!y.same_shape(x) || y.size() != x.size()) throw std::invalid_argument("psnr: dimension mismatch");
  if (y.peak != x.peak) throw std::invalid_argument("psnr: peak mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y.data[i] - x.data[i];
    sq += d * d;
  }
  if (sq == 0.0) throw InfinitePsnrError("psnr: images are identical");
  const double n = static_cast<double>(y.size());
  return 20.0 * std::log10(y.peak * std::sqrt(n) / std::sqrt(sq));
}

// ---------------------------------------------------------------------------
// Noise

GaussianSource::GaussianSource(std::uint64_t seed) : engine_(seed) {}

double GaussianSource::uniform() {
  const std::uint64_t k = engine_() >> 11;
  return static_cast<double>(k + 1) * 0x1.0p-53;
}

std::uint64_t GaussianSource::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("GaussianSource::below: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return v % n;
}

double GaussianSource::next() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

ImageTensor add_gaussian_noise(const ImageTensor& img, const NoiseSpec& spec) {
  img.validate();
  if (!(spec.sigma >= 0.0)) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  ImageTensor out = img;
  if (spec.sigma == 0.0) return out;
  GaussianSource source(spec.seed);
  for (double& v : out.data) v += spec.sigma * source.next();
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Opponent color space

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kRgbToOpp{{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, {0.5, 0.0, -0.5}, {0.25, -0.5, 0.25}}};
constexpr Mat3 kOppToRgb{{{1.0, 1.0, 2.0 / 3.0}, {1.0, 0.0, -4.0 / 3.0}, {1.0, -1.0, 2.0 / 3.0}}};

ImageTensor apply_color_matrix(const ImageTensor& img, const Mat3& m, bool transpose, const char* who) {
  img.validate();
  if (img.channels != 3) throw std::invalid_argument(std::string(who) + ": expected 3 channels");
  ImageTensor out(img.height, img.width, 3, img.peak);
  const std::size_t n = img.pixels();
  for (std::size_t p = 0; p < n; ++p) {
    const double in[3] = {img.data[p], img.data[n + p], img.data[2 * n + p]};
    for (int o = 0; o < 3; ++o) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += (transpose ? m[i][o] : m[o][i]) * in[i];
      out.data[o * n + p] = s;
    }
  }
  return out;
}

}  // namespace

ImageTensor rgb_to_opponent(const ImageTensor& img) { return apply_color_matrix(img, kRgbToOpp, false, "rgb_to_opponent"); }

ImageTensor opponent_to_rgb(const ImageTensor& img) { return apply_color_matrix(img, kOppToRgb, false, "opponent_to_rgb"); }

ImageTensor opponent_to_rgb_adjoint(const ImageTensor& img) {
  return apply_color_matrix(img, kOppToRgb, true, "opponent_to_rgb_adjoint");
}

void opponent_range(std::span<double, 3> lower, std::span<double, 3> upper) {
  for (int o = 0; o < 3; ++o) {
    lower[o] = std::numeric_limits<double>::infinity();
    upper[o] = -std::numeric_limits<double>::infinity();
  }
  for (int corner = 0; corner < 8; ++corner) {
    const double rgb[3] = {double(corner & 1), double((corner >> 1) & 1), double((corner >> 2) & 1)};
    for (int o = 0; o < 3; ++o) {
      const double v = kRgbToOpp[o][0] * rgb[0] + kRgbToOpp[o][1] * rgb[1] + kRgbToOpp[o][2] * rgb[2];
      lower[o] = std::min(lower[o], v);
      upper[o] = std::max(upper[o], v);
    }
  }
}

// ---------------------------------------------------------------------------

ImageTensor extract_plane(const ImageTensor& img, int c) {
  if (c < 0 || c >= img.channels) throw std::invalid_argument("extract_plane: channel out of range");
  ImageTensor out(img.height, img.width, 1, img.peak);
  const auto src = img.plane(c);
  std::copy(src.begin(), src.end(), out.data.begin());
  return out;
}

void insert_plane(ImageTensor& img, int c, const ImageTensor& plane) {
  if (c < 0 || c >= img.channels) throw std::invalid_argument("insert_plane: channel out of range");
  if (plane.channels != 1 || plane.height != img.height || plane.width != img.width)
    throw std::invalid_argument("insert_plane: plane shape mismatch");
  std::copy(plane.data.begin(), plane.data.end(), img.plane(c).begin());
}

ImageTensor crop(const ImageTensor& img, int row, int col, int height, int width) {
  if (row < 0 || col < 0 || height <= 0 || width <= 0 || row + height > img.height || col + width > img.width)
    throw std::invalid_argument("crop: window outside the image");
  ImageTensor out(height, width, img.channels, img.peak);
  for (int c = 0; c < img.channels; ++c)
    for (int r = 0; r < height; ++r)
      for (int q = 0; q < width; ++q) out.at(c, r, q) = img.at(c, row + r, col + q);
  return out;
}

}  // namespace nlnet
