#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scenesampler/geometry.hpp"

namespace scs {

inline constexpr double kDefaultVoxelSize = 0.1;

struct VoxelIndex {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  auto operator<=>(const VoxelIndex&) const = default;
};

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& v) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(v.ix);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.iy);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.iz);
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ULL);
  }
};

/// Cell containing world point p: componentwise floor(p / voxel_size).
VoxelIndex voxel_of(const Eigen::Vector3d& p, double voxel_size);

/// Voxels seen by one frame. `voxels` is sorted ascending and duplicate-free.
struct VoxelSet {
  std::uint32_t frame_index = 0;
  double voxel_size = kDefaultVoxelSize;
  std::vector<VoxelIndex> voxels;

  std::size_t size() const { return voxels.size(); }
  bool operator==(const VoxelSet&) const = default;
};

/// Scene-level view over all frames. Frames are kept sorted by frame_index;
/// `universe` is the exact sorted union of every frame's voxels.
class SceneCoverage {
 public:
  SceneCoverage() = default;

  /// Throws InvalidInput on mixed voxel sizes or duplicate frame indices.
  explicit SceneCoverage(std::vector<VoxelSet> frames);

  double voxel_size() const { return voxel_size_; }
  const std::vector<VoxelSet>& frames() const { return frames_; }
  const std::vector<VoxelIndex>& universe() const { return universe_; }
  std::size_t frame_count() const { return frames_.size(); }

  /// Frame voxels as dense ids into universe(); one sorted list per frame.
  const std::vector<std::vector<std::uint32_t>>& frame_ids() const { return frame_ids_; }

  /// Position of the frame with the given index, or -1.
  std::ptrdiff_t position_of(std::uint32_t frame_index) const;

  bool operator==(const SceneCoverage& o) const { return voxel_size_ == o.voxel_size_ && frames_ == o.frames_; }

 private:
  double voxel_size_ = kDefaultVoxelSize;
  std::vector<VoxelSet> frames_;
  std::vector<VoxelIndex> universe_;
  std::vector<std::vector<std::uint32_t>> frame_ids_;
};

/// Voxelizes every valid pixel (every `stride`-th pixel along rows and
/// columns when stride > 1).
VoxelSet voxelize(const CoordinateMap& cmap, double voxel_size, std::uint32_t frame_index,
                  int stride = 1);

/// |union of selected| / |universe|; 1 for an empty universe.
double coverage_ratio(std::span<const VoxelSet> selected, const SceneCoverage& scene);

// Binary cache: "V3DC", u32 version, f64 voxel size, u32 frame count, then
// per frame u32 index, u32 count and count x (i32, i32, i32). Little-endian.
inline constexpr std::uint32_t kCoverageCacheVersion = 1;

void save_coverage_cache(const std::filesystem::path& path, const SceneCoverage& scene);
SceneCoverage load_coverage_cache(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_coverage_cache(const SceneCoverage& scene);
SceneCoverage decode_coverage_cache(std::span<const std::uint8_t> bytes);

}  // namespace scs
