#include "nlnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "nlnet/autodiff.hpp"
#include "nlnet/errors.hpp"

namespace nlnet {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* s, std::size_t n) { bytes.insert(bytes.end(), s, s + n); }

  std::vector<std::uint8_t> bytes;

 private:
  template <class T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t get(std::size_t n) {
    if (remaining() < n) throw CorruptModelError("corrupt model: truncated payload");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t byte_sum(std::span<const std::uint8_t> bytes) {
  std::uint64_t s = 0;
  for (const std::uint8_t b : bytes) s += b;
  return s;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  model.validate();
  const StageParams& first = model.stages.front();
  const RBFGrid& grid = first.mixture.grid();
  for (const auto& s : model.stages)
    if (!(s.mixture.grid() == grid))
      throw std::invalid_argument("serialize_model: all stages must share one RBF grid");
  if (!(model.box == BoxConstraint::for_mode(model.mode)))
    throw std::invalid_argument("serialize_model: only the default box of the color mode can be stored");

  Writer w;
  w.raw("NLNT", 4);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.mode));
  w.u32(static_cast<std::uint32_t>(model.stages.size()));
  w.u32(static_cast<std::uint32_t>(model.geom.patch_w));
  w.u32(static_cast<std::uint32_t>(model.geom.patch_h));
  w.u32(static_cast<std::uint32_t>(model.geom.group_size));
  w.u32(static_cast<std::uint32_t>(model.geom.window));
  w.u32(static_cast<std::uint32_t>(grid.kernels));
  w.f64(model.sigma_trained);
  w.f64(grid.delta);
  w.f64(grid.precision);
  std::vector<double> params;
  for (const auto& s : model.stages) append_parameters(s, params);
  for (const double v : params) w.f64(v);
  const std::uint64_t sum = byte_sum(w.bytes);
  w.u64(sum);
  return std::move(w.bytes);
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 8 || std::memcmp(bytes.data(), "NLNT", 4) != 0)
    throw CorruptModelError("corrupt model: bad magic");
  const auto body = bytes.first(bytes.size() - 8);
  Reader tail(bytes.last(8));
  const std::uint64_t stored = tail.u64();
  if (stored != byte_sum(body)) throw CorruptModelError("corrupt model: checksum mismatch");

  Reader r(body.subspan(4));
  if (r.u32() != kModelFormatVersion) throw CorruptModelError("corrupt model: unsupported format version");
  const std::uint32_t mode = r.u32();
  if (mode > 1) throw CorruptModelError("corrupt model: invalid mode flag");
  Model m;
  m.mode = static_cast<ColorMode>(mode);
  m.box = BoxConstraint::for_mode(m.mode);
  const std::uint32_t stages = r.u32();
  m.geom.patch_w = static_cast<int>(r.u32());
  m.geom.patch_h = static_cast<int>(r.u32());
  m.geom.group_size = static_cast<int>(r.u32());
  m.geom.window = static_cast<int>(r.u32());
  const std::uint32_t kernels = r.u32();
  m.sigma_trained = r.f64();
  const double delta = r.f64();
  const double precision = r.f64();

  try {
    m.geom.validate();
    if (stages == 0 || stages > 4096 || kernels < 2 || kernels > 1u << 16 || m.geom.patch_size() > 4096 ||
        m.geom.group_size > 4096)
      throw std::invalid_argument("header counts out of range");
    const std::uint64_t coeffs = static_cast<std::uint64_t>(m.geom.coeff_count());
    const std::uint64_t expected =
        (1 + coeffs * m.geom.patch_size() + m.geom.group_size + coeffs * m.channels() * kernels) * stages * 8;
    if (r.remaining() != expected)
      throw CorruptModelError("corrupt model: payload length does not match the header counts");
    const RBFGrid grid = RBFGrid::make(static_cast<int>(kernels), delta, precision);
    StageParams proto;
    proto.transform.matrix = Matrix(m.geom.coeff_count(), m.geom.patch_size());
    proto.weights.values.assign(static_cast<std::size_t>(m.geom.group_size), 0.0);
    proto.mixture = RBFMixture(grid, m.channels(), m.geom.coeff_count());
    const std::size_t per_stage = parameter_count(proto);
    std::vector<double> values(per_stage);
    for (std::uint32_t t = 0; t < stages; ++t) {
      for (double& v : values) v = r.f64();
      StageParams s = proto;
      assign_parameters(values, s);
      m.stages.push_back(std::move(s));
    }
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw CorruptModelError(std::string("corrupt model: ") + e.what());
  }
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace nlnet
