#include "scenesampler/pipeline.hpp"

#include <json.hpp>

#include "scenesampler/errors.hpp"
#include "scenesampler/parallel.hpp"

namespace scs {

SceneCoverage build_scene_coverage(const SceneManifest& scene, double voxel_size, int pixel_stride,
                                   unsigned threads) {
  if (!(voxel_size > 0.0)) throw InvalidInput("voxel size must be positive");
  std::vector<VoxelSet> sets(scene.frames.size());
  parallel_for(scene.frames.size(), resolve_threads(threads), [&](std::size_t pos) {
    const CameraFrame f = load_frame(scene, pos);
    sets[pos] = voxelize(backproject(f.depth, f.intrinsics, f.extrinsics), voxel_size, f.index, pixel_stride);
  });
  if (sets.empty()) throw EmptyScene("scene " + scene.scene_id + " has no frames");
  return SceneCoverage(std::move(sets));
}

PeConfig EncodeConfig::pe_config() const {
  PeConfig pc;
  pc.kind = pe;
  pc.dim = dim;
  pc.grid_resolution = grid_resolution;
  if (pe == PeKind::Mlp) {
    const int in = pool == PoolMode::MinMax ? 6 : 3;
    pc.mlp = Mlp::random(in, dim, dim, seed ^ 0xA0761D6478BD642FULL, 0.5);
  }
  return pc;
}

FusedEmbedding encode_frame(const CameraFrame& frame, const EncodeConfig& cfg) {
  const CoordinateMap cmap = backproject(frame.depth, frame.intrinsics, frame.extrinsics);
  const PatchCoordGrid grid = pool_patch_coords(cmap, cfg.patch_size, cfg.pool);
  const PositionEncoding pe = encode_positions(grid, cfg.pe_config());
  const Tensor3 visual = pseudo_features(cfg.seed, frame.index, grid.rows, grid.cols, cfg.dim);
  return fuse(visual, pe, frame.index);
}

std::string encode_meta_json(const FusedEmbedding& e, const EncodeConfig& cfg) {
  nlohmann::ordered_json meta;
  meta["frame"] = e.source_frame;
  meta["mode"] = std::string(to_string(cfg.pool));
  meta["grid_resolution"] = cfg.grid_resolution;
  meta["pe"] = std::string(to_string(cfg.pe));
  meta["patch_size"] = cfg.patch_size;
  meta["seed"] = cfg.seed;
  return meta.dump();
}

}  // namespace scs
