#pragma once

#include <Eigen/Geometry>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scenesampler/coverage.hpp"
#include "scenesampler/geometry.hpp"
#include "scenesampler/random.hpp"

namespace scs::test {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("scs_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Eigen::Matrix3d random_rotation(SplitMix64& rng) {
  Eigen::Quaterniond q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  if (q.norm() < 1e-3) q = Eigen::Quaterniond::Identity();
  return q.normalized().toRotationMatrix();
}

inline Extrinsics random_pose(SplitMix64& rng, double max_translation = 5.0) {
  Extrinsics e;
  e.rotation = random_rotation(rng);
  e.translation = {rng.uniform(-max_translation, max_translation), rng.uniform(-max_translation, max_translation),
                   rng.uniform(-max_translation, max_translation)};
  return e;
}

inline Intrinsics random_intrinsics(SplitMix64& rng, int width, int height) {
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.fx = rng.uniform(0.5, 1.5) * width;
  k.fy = rng.uniform(0.5, 1.5) * width;
  k.cx = rng.uniform(0.3, 0.7) * (width - 1);
  k.cy = rng.uniform(0.3, 0.7) * (height - 1);
  return k;
}

// Depth map with the given fraction of holes.
inline DepthMap random_depth(SplitMix64& rng, int height, int width, double hole_fraction, double lo = 0.3,
                             double hi = 6.0) {
  DepthMap d(height, width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      if (rng.uniform() >= hole_fraction) d.set(i, j, static_cast<float>(rng.uniform(lo, hi)));
    }
  }
  return d;
}

// Voxel with only ix set; handy for hand-built coverage instances.
inline VoxelIndex vx(int k) { return {k, 0, 0}; }

inline VoxelSet voxel_set(std::uint32_t frame, const std::vector<int>& ids, double voxel_size = kDefaultVoxelSize) {
  VoxelSet s;
  s.frame_index = frame;
  s.voxel_size = voxel_size;
  for (int k : ids) s.voxels.push_back(vx(k));
  std::sort(s.voxels.begin(), s.voxels.end());
  s.voxels.erase(std::unique(s.voxels.begin(), s.voxels.end()), s.voxels.end());
  return s;
}

// Random instance: n frames, each a random subset of [0, universe) of size
// at most max_size.
inline SceneCoverage random_instance(SplitMix64& rng, std::size_t n, int universe, int max_size) {
  std::vector<VoxelSet> frames;
  for (std::size_t f = 0; f < n; ++f) {
    const int size = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_size)));
    std::vector<int> ids;
    for (int k = 0; k < size; ++k) ids.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(universe))));
    frames.push_back(voxel_set(static_cast<std::uint32_t>(f), ids));
  }
  return SceneCoverage(std::move(frames));
}

}  // namespace scs::test
