#include "scenesampler/geometry.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "scenesampler/errors.hpp"

namespace scs {

namespace {
constexpr double kRotationTolerance = 1e-5;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidInput("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidInput("intrinsics: principal point outside the image");
  }
}

Eigen::Matrix3d Intrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Intrinsics Intrinsics::from_matrix(const Eigen::Matrix3d& k, int width, int height) {
  Intrinsics out{k(0, 0), k(1, 1), k(0, 2), k(1, 2), width, height};
  out.validate();
  return out;
}

Extrinsics Extrinsics::from_matrix(const Eigen::Matrix4d& m) {
  if (!m.allFinite()) throw InvalidInput("extrinsics: non-finite entries");
  const Eigen::RowVector4d bottom = m.row(3);
  if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kRotationTolerance) {
    throw InvalidInput("extrinsics: bottom row must be 0 0 0 1");
  }
  Extrinsics out;
  out.rotation = m.block<3, 3>(0, 0);
  out.translation = m.block<3, 1>(0, 3);
  out.validate();
  return out;
}

Eigen::Matrix4d Extrinsics::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = rotation;
  m.block<3, 1>(0, 3) = translation;
  return m;
}

Extrinsics Extrinsics::inverse() const {
  Extrinsics inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

void Extrinsics::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidInput("extrinsics: non-finite entries");
  }
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kRotationTolerance || std::abs(rotation.determinant() - 1.0) > kRotationTolerance) {
    throw InvalidInput("extrinsics: rotation is not a proper orthonormal matrix");
  }
}

DepthMap::DepthMap(int height_, int width_)
    : width(width_),
      height(height_),
      values(static_cast<std::size_t>(height_) * width_, 0.0f),
      valid(static_cast<std::size_t>(height_) * width_, 0) {
  if (height_ <= 0 || width_ <= 0) throw InvalidInput("depth map: dimensions must be positive");
}

DepthMap DepthMap::from_values(int height, int width, std::vector<float> values) {
  DepthMap out(height, width);
  if (values.size() != out.values.size()) throw InvalidInput("depth map: value count does not match shape");
  for (std::size_t k = 0; k < values.size(); ++k) {
    const float d = values[k];
    const bool ok = std::isfinite(d) && d > 0.0f;
    out.values[k] = ok ? d : 0.0f;
    out.valid[k] = ok ? 1 : 0;
  }
  return out;
}

void DepthMap::set(int i, int j, float depth) {
  const bool ok = std::isfinite(depth) && depth > 0.0f;
  values[offset(i, j)] = ok ? depth : 0.0f;
  valid[offset(i, j)] = ok ? 1 : 0;
}

void CameraFrame::validate() const {
  intrinsics.validate();
  extrinsics.validate();
  if (depth.width != intrinsics.width || depth.height != intrinsics.height) {
    throw InvalidInput("frame " + std::to_string(index) + ": depth size does not match intrinsics");
  }
}

CoordinateMap backproject(const DepthMap& depth, const Intrinsics& intr, const Extrinsics& extr) {
  if (depth.width != intr.width || depth.height != intr.height) {
    throw InvalidInput("backproject: depth map is " + std::to_string(depth.height) + "x" +
                       std::to_string(depth.width) + " but intrinsics expect " +
                       std::to_string(intr.height) + "x" + std::to_string(intr.width));
  }
  CoordinateMap out;
  out.width = depth.width;
  out.height = depth.height;
  out.coords.assign(depth.values.size(), Eigen::Vector3d::Zero());
  out.valid = depth.valid;
  for (int i = 0; i < depth.height; ++i) {
    for (int j = 0; j < depth.width; ++j) {
      const std::size_t k = depth.offset(i, j);
      if (!depth.valid[k]) continue;
      const double d = depth.values[k];
      out.coords[k] = extr.rotation * (d * pixel_ray(intr, i, j)) + extr.translation;
    }
  }
  return out;
}

Projection project(const Eigen::Vector3d& world, const Intrinsics& intr, const Extrinsics& extr) {
  const Eigen::Vector3d cam = extr.rotation.transpose() * (world - extr.translation);
  Projection p;
  p.depth = cam.z();
  if (cam.z() == 0.0) {
    p.u = p.v = std::numeric_limits<double>::quiet_NaN();
    return p;
  }
  p.u = intr.fx * cam.x() / cam.z() + intr.cx;
  p.v = intr.fy * cam.y() / cam.z() + intr.cy;
  return p;
}

}  // namespace scs
