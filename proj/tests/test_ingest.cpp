#include <doctest.h>

#include <fstream>

#include "scenesampler/errors.hpp"
#include "scenesampler/ingest.hpp"
#include "scenesampler/pipeline.hpp"
#include "support.hpp"

using namespace scs;
using scs::test::TempDir;

namespace {

// root/<id>/{depth/N.png, pose/N.txt, intrinsic.txt} with n small frames.
void write_fixture(const std::filesystem::path& root, const std::string& id, int n, bool with_intrinsics = true) {
  const auto dir = root / id;
  std::filesystem::create_directories(dir / "depth");
  std::filesystem::create_directories(dir / "pose");
  if (with_intrinsics) std::ofstream(dir / "intrinsic.txt") << "8 0 3.5 0\n0 8 2.5 0\n0 0 1 0\n0 0 0 1\n";
  SplitMix64 rng(static_cast<std::uint64_t>(n));
  for (int f = 0; f < n; ++f) {
    DepthMap d(6, 8);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 8; ++j) d.set(i, j, depth_from_raw(static_cast<std::uint16_t>(500 + 37 * (i + j + f)), 1000.0));
    const auto name = std::to_string(f * 10);
    save_depth_png(dir / "depth" / (name + ".png"), d);
    write_matrix(dir / "pose" / (name + ".txt"), test::random_pose(rng).matrix());
  }
}

SyntheticSceneSpec small_spec(std::uint64_t seed) {
  SyntheticSceneSpec s;
  s.seed = seed;
  s.n_frames = 24;
  s.width = 40;
  s.height = 30;
  return s;
}

double distance_to_box(const Eigen::Vector3d& p, const ObjectProposal& b) {
  const Eigen::Vector3d lo = b.min_corner(), hi = b.max_corner();
  return (lo - p).cwiseMax(p - hi).cwiseMax(0.0).norm();
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("well-formed fixture with three frames") {
    TempDir tmp("load");
    write_fixture(tmp.path(), "scene0000_00", 3);
    std::filesystem::create_directories(tmp.path() / "scene0000_00" / "color");
    std::ofstream(tmp.path() / "scene0000_00" / "color" / "10.jpg") << "x";
    const auto m = load_scene(tmp.path(), "scene0000_00");
    REQUIRE(m.frames.size() == 3);
    CHECK(m.frames[0].index == 0);
    CHECK(m.frames[1].index == 10);
    CHECK(m.frames[2].index == 20);
    CHECK(m.intrinsics.width == 8);
    CHECK(m.intrinsics.height == 6);
    CHECK(m.intrinsics.fx == 8.0);
    CHECK(m.fps_extracted == 3.0);
    CHECK(m.frames[1].rgb_path.has_value());
    CHECK_FALSE(m.frames[0].rgb_path.has_value());
    const auto f = load_frame(m, 1);
    CHECK(f.depth.at(0, 0) == depth_from_raw(500 + 37, 1000.0));
  }

  TEST_CASE("frames are ordered numerically, not lexically") {
    TempDir tmp("order");
    write_fixture(tmp.path(), "s", 12);  // 0, 10, ..., 110
    const auto m = load_scene(tmp.path(), "s");
    for (std::size_t k = 1; k < m.frames.size(); ++k) CHECK(m.frames[k].index > m.frames[k - 1].index);
  }

  TEST_CASE("one corrupt pose among three is skipped") {
    TempDir tmp("corrupt");
    write_fixture(tmp.path(), "s", 3);
    std::ofstream(tmp.path() / "s" / "pose" / "10.txt", std::ios::trunc) << "1 2 3\nnonsense\n";
    const auto m = load_scene(tmp.path(), "s");
    CHECK(m.frames.size() == 2);
    CHECK(m.skipped_frames == 1);
  }

  TEST_CASE("missing pose and wrong-sized depth are skipped") {
    TempDir tmp("skip");
    write_fixture(tmp.path(), "s", 3);
    std::filesystem::remove(tmp.path() / "s" / "pose" / "0.txt");
    save_depth_png(tmp.path() / "s" / "depth" / "20.png", DepthMap(5, 5));
    const auto m = load_scene(tmp.path(), "s");
    CHECK(m.frames.size() == 1);
    CHECK(m.skipped_frames == 2);
  }

  TEST_CASE("missing intrinsics is fatal") {
    TempDir tmp("nointr");
    write_fixture(tmp.path(), "s", 3, false);
    CHECK_THROWS_AS(load_scene(tmp.path(), "s"), FatalConfig);
    std::ofstream(tmp.path() / "s" / "intrinsic.txt") << "garbage";
    CHECK_THROWS_AS(load_scene(tmp.path(), "s"), FatalConfig);
  }

  TEST_CASE("empty and missing scene directories") {
    TempDir tmp("empty");
    std::filesystem::create_directories(tmp.path() / "s");
    CHECK_THROWS_AS(load_scene(tmp.path(), "s"), EmptyScene);
    CHECK_THROWS_AS(load_scene(tmp.path(), "nope"), FatalConfig);
    write_fixture(tmp.path(), "bad", 2);
    for (auto f : {"0.txt", "10.txt"}) std::ofstream(tmp.path() / "bad" / "pose" / f, std::ios::trunc) << "x";
    CHECK_THROWS_AS(load_scene(tmp.path(), "bad"), EmptyScene);
  }

  TEST_CASE("synthetic generation is deterministic") {
    const auto a = generate_synthetic(small_spec(5));
    const auto b = generate_synthetic(small_spec(5));
    REQUIRE(a.manifest.frames.size() == b.manifest.frames.size());
    for (std::size_t k = 0; k < a.manifest.frames.size(); ++k) {
      CHECK(*a.manifest.frames[k].depth == *b.manifest.frames[k].depth);
      CHECK(a.manifest.frames[k].pose == b.manifest.frames[k].pose);
    }
    CHECK(a.truth.voxels == b.truth.voxels);
    const auto c = generate_synthetic(small_spec(6));
    CHECK_FALSE(*a.manifest.frames[3].depth == *c.manifest.frames[3].depth);
  }

  TEST_CASE("spec validation") {
    auto s = small_spec(1);
    s.n_frames = 0;
    CHECK_THROWS_AS(s.validate(), InvalidInput);
    s = small_spec(1);
    s.room_extent = {-1, 2, 3};
    CHECK_THROWS_AS(generate_synthetic(s), InvalidInput);
  }

  TEST_CASE("depth at the principal pixel in front of a box") {
    Intrinsics k{60.0, 60.0, 40.0, 30.0, 81, 61};
    ObjectProposal room;
    room.center = {5, 5, 1.5};
    room.extent = {10, 10, 3};
    ObjectProposal target;
    target.id = 0;
    target.center = {3.0, 5.0, 1.5};
    target.extent = {0.5, 0.8, 0.8};
    const auto pose = look_pose({1.0, 5.0, 1.5}, 0.0, 0.0);  // looking along +x
    const auto r = render_depth(k, pose, room, {target});
    CHECK(r.depth.at(30, 40) == doctest::Approx(2.0 - 0.25));
    CHECK(r.hit[r.depth.offset(30, 40)] == 0);
    // Without the box the ray reaches the far wall at x = 10.
    const auto empty = render_depth(k, pose, room, {});
    CHECK(empty.depth.at(30, 40) == doctest::Approx(9.0));
    CHECK(empty.hit[empty.depth.offset(30, 40)] == -1);
  }

  TEST_CASE("look_pose builds a right-handed x-right, y-down, z-forward frame") {
    const auto p = look_pose({1, 2, 3}, 0.7, -0.3);
    CHECK(p.rotation.determinant() == doctest::Approx(1.0));
    CHECK((p.rotation.transpose() * p.rotation).isApprox(Eigen::Matrix3d::Identity()));
    CHECK(p.rotation.col(1).z() < 0.0);  // image down points toward the floor
  }

  TEST_CASE("back-projected points stay in the room and on the surface they hit") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto s = generate_synthetic(small_spec(seed));
      const auto& room = s.truth.room;
      for (std::size_t pos = 0; pos < s.manifest.frames.size(); ++pos) {
        const auto f = load_frame(s.manifest, pos);
        const auto cmap = backproject(f.depth, f.intrinsics, f.extrinsics);
        const auto r = render_depth(f.intrinsics, f.extrinsics, room, s.truth.objects);
        for (std::size_t k = 0; k < cmap.coords.size(); ++k) {
          if (!cmap.valid[k]) continue;
          const auto& p = cmap.coords[k];
          CHECK(((p - room.min_corner()).array() >= -1e-4).all());
          CHECK(((room.max_corner() - p).array() >= -1e-4).all());
          // Depth is quantized down by < 1 mm along the optical axis.
          const double ray_len = (p - f.extrinsics.translation).norm() / std::max(1e-9, double(f.depth.values[k]));
          if (r.hit[k] >= 0) {
            CHECK(distance_to_box(p, s.truth.objects[static_cast<std::size_t>(r.hit[k])]) <= 1.01e-3 * ray_len);
          }
        }
      }
    }
  }

  TEST_CASE("ground-truth voxels agree with voxelize after backproject") {
    const auto s = generate_synthetic(small_spec(7));
    const auto cov = build_scene_coverage(s.manifest, 0.1, 1, 2);
    REQUIRE(cov.frames().size() == s.truth.voxels.size());
    for (std::size_t k = 0; k < cov.frames().size(); ++k) CHECK(cov.frames()[k] == s.truth.voxels[k]);
  }

  TEST_CASE("an empty room hides every floating proposal") {
    auto spec = small_spec(8);
    spec.n_objects = 0;
    const auto s = generate_synthetic(spec);
    for (const auto& v : s.truth.visible_objects) CHECK(v.empty());
    ObjectProposal floating;
    floating.center = {3.0, 2.5, 1.0};
    floating.extent = {0.4, 0.4, 0.4};
    for (std::size_t pos = 0; pos < s.manifest.frames.size(); ++pos) {
      const auto f = load_frame(s.manifest, pos);
      const auto cmap = backproject(f.depth, f.intrinsics, f.extrinsics);
      const auto mask = assign_patches(floating, cmap, 10);
      const Tensor3 visual(mask.rows, mask.cols, 12);
      CHECK_THROWS_AS(pool_object_features(mask, visual, floating, 0.02), ObjectNotVisible);
    }
  }

  TEST_CASE("visible objects match the hit buffer") {
    const auto s = generate_synthetic(small_spec(9));
    std::size_t seen = 0;
    for (const auto& v : s.truth.visible_objects) seen += v.size();
    CHECK(seen > 0);
  }

  TEST_CASE("export and reload round-trip bit-exactly") {
    TempDir tmp("export");
    const auto s = generate_synthetic(small_spec(10));
    export_scene(s.manifest, tmp.path());
    const auto m = load_scene(tmp.path(), s.manifest.scene_id);
    REQUIRE(m.frames.size() == s.manifest.frames.size());
    CHECK(m.intrinsics == s.manifest.intrinsics);
    for (std::size_t k = 0; k < m.frames.size(); ++k) {
      CHECK(m.frames[k].index == s.manifest.frames[k].index);
      CHECK(m.frames[k].pose == s.manifest.frames[k].pose);
      CHECK(load_frame(m, k).depth == *s.manifest.frames[k].depth);
    }
    CHECK(build_scene_coverage(m, 0.1) == build_scene_coverage(s.manifest, 0.1));
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("coverage build does not depend on the thread count") {
    const auto s = generate_synthetic(small_spec(11));
    const auto one = build_scene_coverage(s.manifest, 0.1, 1, 1);
    CHECK(build_scene_coverage(s.manifest, 0.1, 1, 4) == one);
    CHECK(build_scene_coverage(s.manifest, 0.1, 1, 0) == one);
  }

  TEST_CASE("encode_frame shape, pe none and mode sensitivity") {
    const auto s = generate_synthetic(small_spec(12));
    const auto f = load_frame(s.manifest, 3);
    EncodeConfig cfg;
    cfg.dim = 64;
    cfg.patch_size = 14;
    const auto fused = encode_frame(f, cfg);
    CHECK(fused.values.rows == 30 / 14);
    CHECK(fused.values.cols == 40 / 14);
    CHECK(fused.values.channels == 64);
    CHECK(fused.source_frame == 3);

    cfg.pe = PeKind::None;
    CHECK(encode_frame(f, cfg).values == pseudo_features(cfg.seed, 3, 2, 2, 64));

    cfg.pe = PeKind::Sinusoidal;
    cfg.pool = PoolMode::MinMax;
    CHECK_FALSE(encode_frame(f, cfg).values == fused.values);
    cfg.pe = PeKind::Mlp;
    const auto mlp = encode_frame(f, cfg);
    CHECK(mlp.values == encode_frame(f, cfg).values);
    CHECK_FALSE(mlp.values == fused.values);
  }
}
