#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scs {

/// Pinhole intrinsics stored as their four defining scalars plus image size.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws InvalidInput unless fx, fy > 0 and the principal point lies
  /// inside the image.
  void validate() const;

  Eigen::Matrix3d matrix() const;
  static Intrinsics from_matrix(const Eigen::Matrix3d& k, int width, int height);

  bool operator==(const Intrinsics&) const = default;
};

/// Camera-to-world rigid transform.
struct Extrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Extrinsics identity() { return {}; }

  /// Builds from a 4x4 homogeneous pose; the bottom row must be (0,0,0,1)
  /// and the rotation block orthonormal with det +1 (tolerance 1e-5).
  static Extrinsics from_matrix(const Eigen::Matrix4d& m);
  Eigen::Matrix4d matrix() const;

  Extrinsics inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  void validate() const;

  bool operator==(const Extrinsics& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

/// Depth in meters; invalid pixels hold exactly 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int height, int width);

  /// Marks non-positive and non-finite entries invalid and zeroes them.
  static DepthMap from_values(int height, int width, std::vector<float> values);

  std::size_t offset(int i, int j) const { return static_cast<std::size_t>(i) * width + j; }
  float at(int i, int j) const { return values[offset(i, j)]; }
  bool is_valid(int i, int j) const { return valid[offset(i, j)] != 0; }
  void set(int i, int j, float depth);

  bool operator==(const DepthMap&) const = default;
};

/// Per-pixel world coordinates. Invalid entries are the zero vector.
struct CoordinateMap {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> coords;
  std::vector<std::uint8_t> valid;

  std::size_t offset(int i, int j) const { return static_cast<std::size_t>(i) * width + j; }
  const Eigen::Vector3d& at(int i, int j) const { return coords[offset(i, j)]; }
  bool is_valid(int i, int j) const { return valid[offset(i, j)] != 0; }
};

struct CameraFrame {
  std::uint32_t index = 0;
  DepthMap depth;
  Intrinsics intrinsics;
  Extrinsics extrinsics;
  std::optional<std::string> rgb_path;

  void validate() const;
};

/// Result of projecting a world point: pixel column u, pixel row v, and
/// camera-space depth. depth <= 0 means the point is behind the camera.
struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Camera-space ray through pixel (row i, column j) with unit z, i.e.
/// K^-1 [j, i, 1]^T for a skew-free pinhole.
inline Eigen::Vector3d pixel_ray(const Intrinsics& k, double i, double j) {
  return {(j - k.cx) / k.fx, (i - k.cy) / k.fy, 1.0};
}

/// Lifts every valid depth pixel into world coordinates:
/// c(i,j) = R * (d(i,j) * K^-1 [j, i, 1]^T) + t.
CoordinateMap backproject(const DepthMap& depth, const Intrinsics& intr, const Extrinsics& extr);

Projection project(const Eigen::Vector3d& world, const Intrinsics& intr, const Extrinsics& extr);

}  // namespace scs
