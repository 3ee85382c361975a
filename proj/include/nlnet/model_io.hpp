#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nlnet/network.hpp"

namespace nlnet {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary model file, little-endian throughout:
///   "NLNT", u32 version, u32 mode (0 gray, 1 color),
///   u32 S, Px (patch width), Py (patch height), K, window, M,
///   f64 sigma_trained, delta, precision,
///   per stage: f64 gamma, F row-major, w, pi,
///   u64 sum of all preceding bytes modulo 2^64.
std::vector<std::uint8_t> serialize_model(const Model& model);

/// Throws CorruptModelError on a bad magic, version, checksum or length.
Model deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace nlnet
