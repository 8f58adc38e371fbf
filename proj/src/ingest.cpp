#include "scenesampler/ingest.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "scenesampler/errors.hpp"
#include "scenesampler/random.hpp"

namespace scs {

namespace fs = std::filesystem;

namespace {

std::optional<std::uint32_t> parse_index(const std::string& stem) {
  if (stem.empty() || stem.size() > 9 || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  return static_cast<std::uint32_t>(std::stoul(stem));
}

// Slab test. Returns the entry distance along the ray, or +inf.
double ray_box_entry(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                     const Eigen::Vector3d& hi) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double t0 = (lo[a] - o[a]) / d[a];
    const double t1 = (hi[a] - o[a]) / d[a];
    t_near = std::max(t_near, std::min(t0, t1));
    t_far = std::min(t_far, std::max(t0, t1));
  }
  if (t_near > t_far || t_far <= 0.0 || t_near <= 0.0) return std::numeric_limits<double>::infinity();
  return t_near;
}

// Exit distance of a ray that starts inside the box.
double ray_box_exit(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                    const Eigen::Vector3d& hi) {
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double t0 = (lo[a] - o[a]) / d[a];
    const double t1 = (hi[a] - o[a]) / d[a];
    t_far = std::min(t_far, std::max(t0, t1));
  }
  return t_far;
}

double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace

CameraFrame load_frame(const SceneManifest& scene, std::size_t pos) {
  if (pos >= scene.frames.size()) throw InvalidInput("load_frame: position out of range");
  const FrameRecord& rec = scene.frames[pos];
  CameraFrame f;
  f.index = rec.index;
  f.intrinsics = scene.intrinsics;
  f.extrinsics = rec.pose;
  f.rgb_path = rec.rgb_path;
  f.depth = rec.depth ? *rec.depth : load_depth_png(rec.depth_path, scene.depth_scale);
  f.validate();
  return f;
}

SceneManifest load_scene(const fs::path& root, const std::string& scene_id, double depth_scale,
                         double fps_extracted) {
  if (!(depth_scale > 0.0)) throw FatalConfig("depth scale must be positive");
  const fs::path dir = root / scene_id;
  if (!fs::is_directory(dir)) throw FatalConfig("scene directory not found: " + dir.string());

  SceneManifest m;
  m.scene_id = scene_id;
  m.depth_scale = depth_scale;
  m.fps_extracted = fps_extracted;

  std::vector<std::pair<std::uint32_t, fs::path>> depth_files;
  if (fs::is_directory(dir / "depth")) {
    for (const auto& entry : fs::directory_iterator(dir / "depth")) {
      if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
      const auto idx = parse_index(entry.path().stem().string());
      if (!idx) {
        spdlog::warn("{}: ignoring depth file with non-numeric name {}", scene_id, entry.path().filename().string());
        continue;
      }
      depth_files.emplace_back(*idx, entry.path());
    }
  }
  if (depth_files.empty()) throw EmptyScene("scene " + scene_id + " has no depth frames under " + dir.string());
  std::sort(depth_files.begin(), depth_files.end());

  const fs::path intr_path = dir / "intrinsic.txt";
  if (!fs::exists(intr_path)) throw FatalConfig("missing " + intr_path.string());
  Eigen::Matrix3d k;
  try {
    k = read_intrinsic_matrix(intr_path);
  } catch (const Error& e) {
    throw FatalConfig(e.what());
  }

  std::optional<std::pair<int, int>> size;
  for (const auto& [idx, depth_path] : depth_files) {
    const std::string name = std::to_string(idx);
    const fs::path pose_path = dir / "pose" / (depth_path.stem().string() + ".txt");
    FrameRecord rec;
    rec.index = idx;
    rec.depth_path = depth_path;
    try {
      if (!fs::exists(pose_path)) throw InvalidInput("missing pose file " + pose_path.string());
      rec.pose = read_extrinsics(pose_path);
      const auto wh = png_size(depth_path);
      if (!size) size = wh;
      if (wh != *size) throw InvalidInput("depth image size differs from the rest of the scene");
    } catch (const Error& e) {
      spdlog::warn("{}: skipping frame {}: {}", scene_id, name, e.what());
      ++m.skipped_frames;
      continue;
    }
    for (const char* ext : {".jpg", ".png"}) {
      const fs::path rgb = dir / "color" / (depth_path.stem().string() + ext);
      if (fs::exists(rgb)) {
        rec.rgb_path = rgb.string();
        break;
      }
    }
    m.frames.push_back(std::move(rec));
  }
  if (m.frames.empty()) throw EmptyScene("scene " + scene_id + " has no loadable frames");
  try {
    m.intrinsics = Intrinsics::from_matrix(k, size->first, size->second);
  } catch (const Error& e) {
    throw FatalConfig(intr_path.string() + ": " + e.what());
  }
  return m;
}

void export_scene(const SceneManifest& scene, const fs::path& root) {
  const fs::path dir = root / scene.scene_id;
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "pose");
  Eigen::Matrix4d k4 = Eigen::Matrix4d::Identity();
  k4.block<3, 3>(0, 0) = scene.intrinsics.matrix();
  write_matrix(dir / "intrinsic.txt", k4);
  for (std::size_t pos = 0; pos < scene.frames.size(); ++pos) {
    const FrameRecord& rec = scene.frames[pos];
    const std::string name = std::to_string(rec.index);
    const CameraFrame f = load_frame(scene, pos);
    save_depth_png(dir / "depth" / (name + ".png"), f.depth, scene.depth_scale);
    write_matrix(dir / "pose" / (name + ".txt"), rec.pose.matrix());
  }
}

void SyntheticSceneSpec::validate() const {
  if ((room_extent.array() <= 0.0).any()) throw InvalidInput("synthetic scene: room extents must be positive");
  if (n_frames < 1 || n_objects < 0 || width < 1 || height < 1) {
    throw InvalidInput("synthetic scene: counts and image size must be positive");
  }
  if (room_extent.z() < 2.0 || room_extent.x() < 1.0 || room_extent.y() < 1.0) {
    throw InvalidInput("synthetic scene: room must be at least 1 x 1 x 2 m");
  }
  if (!(depth_scale > 0.0) || !(voxel_size > 0.0)) throw InvalidInput("synthetic scene: scales must be positive");
  resolved_intrinsics().validate();
}

Intrinsics SyntheticSceneSpec::resolved_intrinsics() const {
  if (intrinsics) return *intrinsics;
  return {0.9 * width, 0.9 * width, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
}

Extrinsics look_pose(const Eigen::Vector3d& eye, double yaw, double pitch) {
  const Eigen::Vector3d forward(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Extrinsics e;
  e.rotation.col(0) = right;
  e.rotation.col(1) = down;
  e.rotation.col(2) = forward;
  e.translation = eye;
  return e;
}

RenderedFrame render_depth(const Intrinsics& intr, const Extrinsics& pose, const ObjectProposal& room,
                           const std::vector<ObjectProposal>& objects, double depth_scale) {
  intr.validate();
  RenderedFrame out{DepthMap(intr.height, intr.width),
                    std::vector<int>(static_cast<std::size_t>(intr.width) * intr.height, -2)};
  const Eigen::Vector3d origin = pose.translation;
  const Eigen::Vector3d room_lo = room.min_corner();
  const Eigen::Vector3d room_hi = room.max_corner();
  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> bounds;
  for (const auto& o : objects) bounds.emplace_back(o.min_corner(), o.max_corner());

  for (int i = 0; i < intr.height; ++i) {
    for (int j = 0; j < intr.width; ++j) {
      // Unit-z camera ray, so the hit distance is the optical-axis depth.
      const Eigen::Vector3d dir = pose.rotation * pixel_ray(intr, i, j);
      double best = ray_box_exit(origin, dir, room_lo, room_hi);
      int hit = std::isfinite(best) && best > 0.0 ? -1 : -2;
      if (hit == -2) best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < bounds.size(); ++k) {
        const double t = ray_box_entry(origin, dir, bounds[k].first, bounds[k].second);
        if (t < best) {
          best = t;
          hit = objects[k].id;
        }
      }
      if (hit == -2) continue;
      const double raw = std::floor(best * depth_scale + 1e-6);
      if (raw < 1.0 || raw > 65535.0) continue;
      out.depth.set(i, j, depth_from_raw(static_cast<std::uint16_t>(raw), depth_scale));
      out.hit[out.depth.offset(i, j)] = hit;
    }
  }
  return out;
}

SyntheticScene generate_synthetic(const SyntheticSceneSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const Eigen::Vector3d& L = spec.room_extent;
  const Intrinsics intr = spec.resolved_intrinsics();

  SyntheticScene scene;
  SyntheticGroundTruth& truth = scene.truth;
  truth.room.id = -1;
  truth.room.center = 0.5 * L;
  truth.room.extent = L;

  for (int k = 0; k < spec.n_objects; ++k) {
    ObjectProposal o;
    o.id = k;
    o.extent = {rng.uniform(0.3, std::min(1.4, 0.4 * L.x())), rng.uniform(0.3, std::min(1.4, 0.4 * L.y())),
                rng.uniform(0.3, 1.1)};
    o.center.x() = rng.uniform(0.5 * o.extent.x(), L.x() - 0.5 * o.extent.x());
    o.center.y() = rng.uniform(0.5 * o.extent.y(), L.y() - 0.5 * o.extent.y());
    o.center.z() = 0.5 * o.extent.z();
    truth.objects.push_back(o);
  }

  // Key viewpoints above the furniture; the camera eases between them and
  // spends an uneven share of the frames on each leg.
  struct Key {
    Eigen::Vector3d eye;
    double yaw, pitch;
  };
  const int n_keys = std::max(4, spec.n_frames / 15);
  std::vector<Key> keys;
  for (int k = 0; k < n_keys; ++k) {
    Key key;
    key.eye = {rng.uniform(0.15 * L.x(), 0.85 * L.x()), rng.uniform(0.15 * L.y(), 0.85 * L.y()),
               rng.uniform(1.2, std::min(1.7, L.z() - 0.2))};
    key.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    key.pitch = rng.uniform(-0.7, 0.2);
    keys.push_back(key);
  }
  std::vector<double> weight(n_keys - 1);
  for (auto& w : weight) w = rng.uniform(0.2, 3.0);
  double total = 0.0;
  for (double w : weight) total += w;
  std::vector<double> leg_start(n_keys, 0.0);
  for (int k = 1; k < n_keys; ++k) leg_start[k] = leg_start[k - 1] + weight[k - 1] / total;

  SceneManifest& m = scene.manifest;
  m.scene_id = spec.scene_id.empty() ? "synth_" + std::to_string(spec.seed) : spec.scene_id;
  m.intrinsics = intr;
  m.depth_scale = spec.depth_scale;

  for (int f = 0; f < spec.n_frames; ++f) {
    const double s = spec.n_frames == 1 ? 0.0 : static_cast<double>(f) / (spec.n_frames - 1);
    int leg = 0;
    while (leg + 1 < n_keys - 1 && s >= leg_start[leg + 1]) ++leg;
    const double u = std::clamp((s - leg_start[leg]) / (leg_start[leg + 1] - leg_start[leg]), 0.0, 1.0);
    const double e = smoothstep(u);
    const Key& a = keys[leg];
    const Key& b = keys[leg + 1];
    const Eigen::Vector3d eye = a.eye + e * (b.eye - a.eye);
    const double yaw = a.yaw + e * wrap_angle(b.yaw - a.yaw);
    const double pitch = a.pitch + e * (b.pitch - a.pitch);
    const Extrinsics pose = look_pose(eye, yaw, pitch);

    RenderedFrame r = render_depth(intr, pose, truth.room, truth.objects, spec.depth_scale);

    FrameRecord rec;
    rec.index = static_cast<std::uint32_t>(f);
    rec.pose = pose;

    std::set<int> visible;
    VoxelSet vs;
    vs.frame_index = rec.index;
    vs.voxel_size = spec.voxel_size;
    std::set<VoxelIndex> cells;
    for (int i = 0; i < intr.height; ++i) {
      for (int j = 0; j < intr.width; ++j) {
        const std::size_t k = r.depth.offset(i, j);
        if (!r.depth.valid[k]) continue;
        if (r.hit[k] >= 0) visible.insert(r.hit[k]);
        const Eigen::Vector3d p = pose.rotation * (static_cast<double>(r.depth.values[k]) * pixel_ray(intr, i, j)) +
                                  pose.translation;
        cells.insert(voxel_of(p, spec.voxel_size));
      }
    }
    vs.voxels.assign(cells.begin(), cells.end());
    truth.voxels.push_back(std::move(vs));
    truth.visible_objects.emplace_back(visible.begin(), visible.end());

    rec.depth = std::make_shared<const DepthMap>(std::move(r.depth));
    m.frames.push_back(std::move(rec));
  }
  return scene;
}

}  // namespace scs
