#pragma once

#include <cstdint>
#include <filesystem>

#include "scenesampler/geometry.hpp"

namespace scs {

// ScanNet export convention: 16-bit depth in millimeters.
inline constexpr double kDefaultDepthScale = 1000.0;

/// Raw 16-bit sensor value to meters. Shared by the PNG loader and the
/// synthetic renderer so that saved scenes reload bit-exactly.
inline float depth_from_raw(std::uint16_t raw, double depth_scale) {
  return static_cast<float>(static_cast<double>(raw) / depth_scale);
}

/// Reads a whitespace-separated row-major matrix. Accepts 3x3 or 4x4 (the
/// upper-left 3x3 block is used).
Eigen::Matrix3d read_intrinsic_matrix(const std::filesystem::path& path);

/// Reads a 4x4 row-major camera-to-world pose. Throws InvalidInput on
/// malformed, non-finite or non-rigid content.
Extrinsics read_extrinsics(const std::filesystem::path& path);

/// Writes with round-trip precision.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Width and height of a PNG without decoding its pixels.
std::pair<int, int> png_size(const std::filesystem::path& path);

/// 16-bit single-channel PNG; raw value 0 is a hole.
DepthMap load_depth_png(const std::filesystem::path& path, double depth_scale = kDefaultDepthScale);

/// Inverse of load_depth_png. Depths are rounded to the nearest raw unit;
/// values that do not fit in 16 bits throw InvalidInput.
void save_depth_png(const std::filesystem::path& path, const DepthMap& depth,
                    double depth_scale = kDefaultDepthScale);

}  // namespace scs
