#pragma once

#include <cstdint>
#include <string>

#include "scenesampler/coverage.hpp"
#include "scenesampler/ingest.hpp"
#include "scenesampler/posenc.hpp"

namespace scs {

/// Back-projects and voxelizes every frame of the scene, `threads` frames
/// at a time. The result does not depend on the thread count.
SceneCoverage build_scene_coverage(const SceneManifest& scene, double voxel_size, int pixel_stride = 1,
                                   unsigned threads = 1);

struct EncodeConfig {
  int patch_size = 14;
  PoolMode pool = PoolMode::Average;
  PeKind pe = PeKind::Sinusoidal;
  int dim = 256;
  double grid_resolution = kDefaultGridResolution;
  std::uint64_t seed = 0;  // pseudo-features and MLP weights

  PeConfig pe_config() const;
};

/// pool -> encode -> fuse for one frame, with pseudo-features standing in
/// for the image encoder.
FusedEmbedding encode_frame(const CameraFrame& frame, const EncodeConfig& cfg);

/// Sidecar meta object for a fused tensor.
std::string encode_meta_json(const FusedEmbedding& e, const EncodeConfig& cfg);

}  // namespace scs
