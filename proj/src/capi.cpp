#include <spdlog/spdlog.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "scenesampler/errors.hpp"
#include "scenesampler/grounding.hpp"
#include "scenesampler/ingest.hpp"
#include "scenesampler/pipeline.hpp"
#include "scenesampler/sampler.hpp"
#include "scenesampler/scenesampler.h"
#include "scenesampler/tensor.hpp"

struct scs_scene {
  scs::SceneManifest manifest;
  std::vector<scs::ObjectProposal> objects;
};

struct scs_coverage {
  scs::SceneCoverage coverage;
};

struct scs_sampling {
  scs::SamplingReport report;
};

namespace {

thread_local std::string g_last_error;

scs_status fail(scs_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <typename Fn>
scs_status guarded(Fn&& fn) {
  try {
    fn();
    return SCS_OK;
  } catch (const scs::InvalidInput& e) {
    return fail(SCS_INVALID_INPUT, e.what());
  } catch (const scs::FatalConfig& e) {
    return fail(SCS_FATAL_CONFIG, e.what());
  } catch (const scs::EmptyScene& e) {
    return fail(SCS_EMPTY_SCENE, e.what());
  } catch (const scs::ObjectNotVisible& e) {
    return fail(SCS_OBJECT_NOT_VISIBLE, e.what());
  } catch (const scs::IoError& e) {
    return fail(SCS_IO_ERROR, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SCS_IO_ERROR, e.what());
  } catch (const std::exception& e) {
    return fail(SCS_INTERNAL, e.what());
  } catch (...) {
    return fail(SCS_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (!p) throw scs::InvalidInput(std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

scs::PoolMode to_pool(scs_pool_mode m) {
  switch (m) {
    case SCS_POOL_AVG:
      return scs::PoolMode::Average;
    case SCS_POOL_CENTER:
      return scs::PoolMode::Center;
    case SCS_POOL_MINMAX:
      return scs::PoolMode::MinMax;
  }
  throw scs::InvalidInput("unknown pooling mode");
}

scs::PeKind to_pe(scs_pe_kind k) {
  switch (k) {
    case SCS_PE_SIN:
      return scs::PeKind::Sinusoidal;
    case SCS_PE_MLP:
      return scs::PeKind::Mlp;
    case SCS_PE_NONE:
      return scs::PeKind::None;
  }
  throw scs::InvalidInput("unknown position encoding");
}

}  // namespace

extern "C" {

const char* scs_version(void) { return "0.3.0"; }

const char* scs_status_name(scs_status status) {
  switch (status) {
    case SCS_OK:
      return "Ok";
    case SCS_INVALID_INPUT:
      return "InvalidInput";
    case SCS_FATAL_CONFIG:
      return "FatalConfig";
    case SCS_EMPTY_SCENE:
      return "EmptyScene";
    case SCS_OBJECT_NOT_VISIBLE:
      return "ObjectNotVisible";
    case SCS_IO_ERROR:
      return "IoError";
    case SCS_INTERNAL:
      return "Internal";
  }
  return "Unknown";
}

const char* scs_last_error(void) { return g_last_error.c_str(); }

scs_status scs_set_log_level(const char* level) {
  return guarded([&] {
    require(level, "level");
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && std::strcmp(level, "off") != 0) {
      throw scs::InvalidInput(std::string("unknown log level '") + level + "'");
    }
    spdlog::set_level(lvl);
  });
}

void scs_string_free(char* s) { std::free(s); }

void scs_synth_params_default(scs_synth_params* p) {
  if (!p) return;
  const scs::SyntheticSceneSpec d;
  p->seed = d.seed;
  p->n_frames = static_cast<uint32_t>(d.n_frames);
  p->n_objects = static_cast<uint32_t>(d.n_objects);
  p->width = static_cast<uint32_t>(d.width);
  p->height = static_cast<uint32_t>(d.height);
  for (int a = 0; a < 3; ++a) p->room_extent[a] = d.room_extent[a];
  p->depth_scale = d.depth_scale;
  p->voxel_size = d.voxel_size;
  p->scene_id = nullptr;
}

scs_status scs_scene_load(const char* root, const char* scene_id, double depth_scale, scs_scene** out) {
  return guarded([&] {
    require(root, "root");
    require(scene_id, "scene_id");
    require(out, "out");
    auto s = std::make_unique<scs_scene>();
    s->manifest = scs::load_scene(root, scene_id, depth_scale);
    *out = s.release();
  });
}

scs_status scs_scene_synthesize(const scs_synth_params* p, scs_scene** out) {
  return guarded([&] {
    require(p, "params");
    require(out, "out");
    scs::SyntheticSceneSpec spec;
    spec.seed = p->seed;
    spec.n_frames = static_cast<int>(p->n_frames);
    spec.n_objects = static_cast<int>(p->n_objects);
    spec.width = static_cast<int>(p->width);
    spec.height = static_cast<int>(p->height);
    spec.room_extent = {p->room_extent[0], p->room_extent[1], p->room_extent[2]};
    spec.depth_scale = p->depth_scale;
    spec.voxel_size = p->voxel_size;
    if (p->scene_id) spec.scene_id = p->scene_id;
    auto synth = scs::generate_synthetic(spec);
    auto s = std::make_unique<scs_scene>();
    s->manifest = std::move(synth.manifest);
    s->objects = std::move(synth.truth.objects);
    *out = s.release();
  });
}

scs_status scs_scene_export(const scs_scene* scene, const char* root) {
  return guarded([&] {
    require(scene, "scene");
    require(root, "root");
    scs::export_scene(scene->manifest, root);
  });
}

void scs_scene_free(scs_scene* scene) { delete scene; }

const char* scs_scene_id(const scs_scene* scene) { return scene ? scene->manifest.scene_id.c_str() : ""; }

size_t scs_scene_frame_count(const scs_scene* scene) { return scene ? scene->manifest.frames.size() : 0; }

size_t scs_scene_skipped_frames(const scs_scene* scene) { return scene ? scene->manifest.skipped_frames : 0; }

scs_status scs_scene_frame_indices(const scs_scene* scene, uint32_t* out, size_t capacity) {
  return guarded([&] {
    require(scene, "scene");
    require(out, "out");
    const auto& frames = scene->manifest.frames;
    for (size_t k = 0; k < frames.size() && k < capacity; ++k) out[k] = frames[k].index;
  });
}

size_t scs_scene_object_count(const scs_scene* scene) { return scene ? scene->objects.size() : 0; }

scs_status scs_scene_object(const scs_scene* scene, size_t k, double center[3], double extent[3]) {
  return guarded([&] {
    require(scene, "scene");
    require(center, "center");
    require(extent, "extent");
    if (k >= scene->objects.size()) throw scs::InvalidInput("object index out of range");
    for (int a = 0; a < 3; ++a) {
      center[a] = scene->objects[k].center[a];
      extent[a] = scene->objects[k].extent[a];
    }
  });
}

scs_status scs_coverage_build(const scs_scene* scene, double voxel_size, uint32_t pixel_stride, uint32_t threads,
                              scs_coverage** out) {
  return guarded([&] {
    require(scene, "scene");
    require(out, "out");
    auto c = std::make_unique<scs_coverage>();
    c->coverage = scs::build_scene_coverage(scene->manifest, voxel_size,
                                            static_cast<int>(pixel_stride == 0 ? 1 : pixel_stride), threads);
    *out = c.release();
  });
}

scs_status scs_coverage_save(const scs_coverage* coverage, const char* path) {
  return guarded([&] {
    require(coverage, "coverage");
    require(path, "path");
    const auto bytes = scs::encode_coverage_cache(coverage->coverage);
    scs::write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
  });
}

scs_status scs_coverage_load(const char* path, scs_coverage** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto c = std::make_unique<scs_coverage>();
    c->coverage = scs::load_coverage_cache(path);
    *out = c.release();
  });
}

void scs_coverage_free(scs_coverage* coverage) { delete coverage; }

size_t scs_coverage_frame_count(const scs_coverage* c) { return c ? c->coverage.frame_count() : 0; }

size_t scs_coverage_universe_size(const scs_coverage* c) { return c ? c->coverage.universe().size() : 0; }

double scs_coverage_voxel_size(const scs_coverage* c) { return c ? c->coverage.voxel_size() : 0.0; }

scs_status scs_coverage_ratio(const scs_coverage* c, const uint32_t* frame_indices, size_t n, double* out) {
  return guarded([&] {
    require(c, "coverage");
    require(out, "out");
    if (n > 0) require(frame_indices, "frame_indices");
    std::vector<scs::VoxelSet> selected;
    for (size_t k = 0; k < n; ++k) {
      const auto pos = c->coverage.position_of(frame_indices[k]);
      if (pos < 0) throw scs::InvalidInput("frame " + std::to_string(frame_indices[k]) + " is not in the scene");
      selected.push_back(c->coverage.frames()[static_cast<size_t>(pos)]);
    }
    *out = scs::coverage_ratio(selected, c->coverage);
  });
}

void scs_sampler_config_default(scs_sampler_config* cfg) {
  if (!cfg) return;
  cfg->strategy = SCS_STRATEGY_MAX_COVERAGE;
  cfg->budget = 32;
  cfg->coverage_threshold = 0.0;
  cfg->threads = 1;
}

scs_status scs_sample(const scs_coverage* coverage, const scs_sampler_config* cfg, scs_sampling** out) {
  return guarded([&] {
    require(coverage, "coverage");
    require(cfg, "cfg");
    require(out, "out");
    scs::SamplerConfig sc;
    switch (cfg->strategy) {
      case SCS_STRATEGY_UNIFORM:
        sc.strategy = scs::SamplingStrategy::Uniform;
        break;
      case SCS_STRATEGY_MAX_COVERAGE:
        sc.strategy = scs::SamplingStrategy::MaxCoverage;
        break;
      default:
        throw scs::InvalidInput("unknown sampling strategy");
    }
    sc.budget = cfg->budget;
    if (cfg->coverage_threshold > 0.0) sc.coverage_threshold = cfg->coverage_threshold;
    sc.threads = cfg->threads;

    auto s = std::make_unique<scs_sampling>();
    const auto t0 = std::chrono::steady_clock::now();
    s->report.result = scs::sample_frames(coverage->coverage, sc);
    s->report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    s->report.config = sc;
    s->report.voxel_size = coverage->coverage.voxel_size();
    *out = s.release();
  });
}

void scs_sampling_free(scs_sampling* sampling) { delete sampling; }

size_t scs_sampling_count(const scs_sampling* s) { return s ? s->report.result.selected.size() : 0; }

scs_status scs_sampling_selected(const scs_sampling* s, uint32_t* out, size_t capacity) {
  return guarded([&] {
    require(s, "sampling");
    require(out, "out");
    const auto& sel = s->report.result.selected;
    for (size_t k = 0; k < sel.size() && k < capacity; ++k) out[k] = sel[k];
  });
}

double scs_sampling_final_ratio(const scs_sampling* s) { return s ? s->report.result.final_ratio : 0.0; }

double scs_sampling_elapsed_ms(const scs_sampling* s) { return s ? s->report.elapsed_ms : 0.0; }

scs_status scs_sampling_to_json(const scs_sampling* s, const char* scene_id, int include_timing, char** out_json) {
  return guarded([&] {
    require(s, "sampling");
    require(out_json, "out_json");
    scs::SamplingReport r = s->report;
    r.scene_id = scene_id ? scene_id : "";
    if (!include_timing) r.elapsed_ms = 0.0;
    *out_json = dup_string(scs::sampling_report_json(r));
  });
}

void scs_encode_config_default(scs_encode_config* cfg) {
  if (!cfg) return;
  const scs::EncodeConfig d;
  cfg->patch_size = static_cast<uint32_t>(d.patch_size);
  cfg->pool = SCS_POOL_AVG;
  cfg->pe = SCS_PE_SIN;
  cfg->dim = static_cast<uint32_t>(d.dim);
  cfg->grid_resolution = d.grid_resolution;
  cfg->seed = d.seed;
}

scs_status scs_encode_frame(const scs_scene* scene, uint32_t frame_index, const scs_encode_config* cfg,
                            const char* out_stem, uint32_t shape_out[3]) {
  return guarded([&] {
    require(scene, "scene");
    require(cfg, "cfg");
    const auto& frames = scene->manifest.frames;
    const auto it = std::find_if(frames.begin(), frames.end(), [&](const auto& f) { return f.index == frame_index; });
    if (it == frames.end()) throw scs::InvalidInput("frame " + std::to_string(frame_index) + " is not in the scene");
    scs::EncodeConfig ec;
    ec.patch_size = static_cast<int>(cfg->patch_size);
    ec.pool = to_pool(cfg->pool);
    ec.pe = to_pe(cfg->pe);
    ec.dim = static_cast<int>(cfg->dim);
    ec.grid_resolution = cfg->grid_resolution;
    ec.seed = cfg->seed;
    const auto frame = scs::load_frame(scene->manifest, static_cast<size_t>(it - frames.begin()));
    const auto fused = scs::encode_frame(frame, ec);
    if (out_stem) scs::write_tensor(out_stem, fused.values, scs::encode_meta_json(fused, ec));
    if (shape_out) {
      shape_out[0] = static_cast<uint32_t>(fused.values.rows);
      shape_out[1] = static_cast<uint32_t>(fused.values.cols);
      shape_out[2] = static_cast<uint32_t>(fused.values.channels);
    }
  });
}

scs_status scs_ground_eval_file(const char* jsonl_path, const double* thresholds, size_t n_thresholds,
                                char** out_json) {
  return guarded([&] {
    require(jsonl_path, "jsonl_path");
    require(out_json, "out_json");
    std::ifstream in(jsonl_path);
    if (!in) throw scs::IoError(std::string("cannot open ") + jsonl_path);
    std::size_t skipped = 0;
    const auto records = scs::read_grounding_jsonl(in, &skipped);
    std::span<const double> t;
    if (thresholds && n_thresholds > 0) t = std::span<const double>(thresholds, n_thresholds);
    for (double v : t) {
      if (!(v >= 0.0 && v < 1.0)) throw scs::InvalidInput("IoU thresholds must lie in [0, 1)");
    }
    auto m = scs::eval_metrics(records, t);
    m.skipped = skipped;
    *out_json = dup_string(scs::metrics_json(m));
  });
}

scs_status scs_ground_oracle_write(uint64_t seed, uint32_t queries, uint32_t dim, double grid_resolution,
                                   double tau, const char* out_jsonl) {
  return guarded([&] {
    require(out_jsonl, "out_jsonl");
    scs::OracleConfig cfg;
    cfg.seed = seed;
    cfg.queries = static_cast<int>(queries);
    cfg.dim = static_cast<int>(dim);
    cfg.grid_resolution = grid_resolution;
    cfg.tau = tau;
    std::string text;
    for (const auto& r : scs::run_pe_oracle(cfg)) text += scs::grounding_record_json(r) + "\n";
    scs::write_file_atomic(out_jsonl, text);
  });
}

double scs_aabb_iou(const double a_center[3], const double a_extent[3], const double b_center[3],
                    const double b_extent[3]) {
  if (!a_center || !a_extent || !b_center || !b_extent) return 0.0;
  scs::ObjectProposal a, b;
  a.center = {a_center[0], a_center[1], a_center[2]};
  a.extent = {a_extent[0], a_extent[1], a_extent[2]};
  b.center = {b_center[0], b_center[1], b_center[2]};
  b.extent = {b_extent[0], b_extent[1], b_extent[2]};
  return scs::aabb_iou(a, b);
}

}  // extern "C"
