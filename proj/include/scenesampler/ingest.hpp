#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenesampler/coverage.hpp"
#include "scenesampler/geometry.hpp"
#include "scenesampler/geometry_io.hpp"
#include "scenesampler/grounding.hpp"

namespace scs {

/// One frame of a scene. Depth is read lazily from depth_path unless the
/// frame carries it in memory (synthetic scenes).
struct FrameRecord {
  std::uint32_t index = 0;
  Extrinsics pose;
  std::filesystem::path depth_path;
  std::optional<std::string> rgb_path;
  std::shared_ptr<const DepthMap> depth;
};

struct SceneManifest {
  std::string scene_id;
  Intrinsics intrinsics;
  std::vector<FrameRecord> frames;  // strictly increasing index
  double fps_extracted = 3.0;
  double depth_scale = kDefaultDepthScale;
  std::size_t skipped_frames = 0;
};

/// Materializes frame `pos` (depth decoded, dimensions checked).
CameraFrame load_frame(const SceneManifest& scene, std::size_t pos);

/// Reads root/scene_id/{depth/N.png, pose/N.txt, intrinsic.txt}. Frames
/// whose pose is missing or malformed, or whose depth image has the wrong
/// size, are skipped with a warning. No depth frames -> EmptyScene; missing
/// or unreadable intrinsics -> FatalConfig.
SceneManifest load_scene(const std::filesystem::path& root, const std::string& scene_id,
                         double depth_scale = kDefaultDepthScale, double fps_extracted = 3.0);

/// Writes the manifest back in the same layout (intrinsic.txt as 4x4).
void export_scene(const SceneManifest& scene, const std::filesystem::path& root);

struct SyntheticSceneSpec {
  std::uint64_t seed = 0;
  std::string scene_id;  // defaults to "synth_<seed>"
  Eigen::Vector3d room_extent{6.0, 5.0, 3.0};
  int n_frames = 120;
  int n_objects = 8;
  int width = 80;
  int height = 60;
  std::optional<Intrinsics> intrinsics;  // default: fx = fy = 0.9 W, centered
  double depth_scale = kDefaultDepthScale;
  double voxel_size = kDefaultVoxelSize;  // for the ground-truth coverage

  void validate() const;
  Intrinsics resolved_intrinsics() const;
};

struct SyntheticGroundTruth {
  ObjectProposal room;                            // interior volume
  std::vector<ObjectProposal> objects;            // ids 0..n-1
  std::vector<std::vector<int>> visible_objects;  // per frame, ascending ids
  std::vector<VoxelSet> voxels;                   // per frame, from the renderer's hit points
};

struct SyntheticScene {
  SceneManifest manifest;
  SyntheticGroundTruth truth;
};

struct RenderedFrame {
  DepthMap depth;
  std::vector<int> hit;  // per pixel: object id, -1 room surface, -2 nothing
};

/// Exact ray casting against the room interior and the object boxes; the
/// nearest hit wins. Depth along the optical axis is quantized down to the
/// 16-bit raw grid of `depth_scale`, so points never land behind a surface.
RenderedFrame render_depth(const Intrinsics& intr, const Extrinsics& pose, const ObjectProposal& room,
                           const std::vector<ObjectProposal>& objects, double depth_scale = kDefaultDepthScale);

/// Camera-to-world pose at `eye` looking along yaw (about +z) and pitch.
/// Camera axes follow the x-right, y-down, z-forward convention.
Extrinsics look_pose(const Eigen::Vector3d& eye, double yaw, double pitch);

/// Deterministic scene: a room of floor-standing boxes scanned by a camera
/// that drifts between random viewpoints at uneven speed.
SyntheticScene generate_synthetic(const SyntheticSceneSpec& spec);

}  // namespace scs
