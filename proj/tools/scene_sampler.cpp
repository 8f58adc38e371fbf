// scene_sampler: batch frame sampling, encoding, grounding evaluation and
// benchmarks on top of the scenesampler C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "scenesampler/scenesampler.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct Options {
  std::string root;
  std::vector<std::string> scenes;
  std::string out = "out";
  std::string strategy = "mc";
  std::uint32_t budget = 32;
  std::optional<double> threshold;
  double voxel_size = 0.1;
  std::uint32_t stride = 1;
  std::uint32_t patch_size = 14;
  std::string pool = "avg";
  std::string pe = "sin";
  double grid_res = 0.02;
  std::uint32_t dim = 256;
  double tau = 0.07;
  double depth_scale = 1000.0;
  std::uint64_t seed = 0;
  std::uint32_t threads = 1;
  bool all_frames = false;
  bool no_timing = false;

  // ground-eval
  std::string predictions;
  bool oracle = false;
  std::uint32_t queries = 100;
  std::vector<double> thresholds{0.25, 0.5};

  // synth / bench
  std::uint32_t count = 1;
  std::uint32_t frames = 120;
  std::uint32_t objects = 8;
  std::uint32_t width = 80;
  std::uint32_t height = 60;
};

struct Failure {
  std::string scene;
  std::string message;
};

class ApiError : public std::runtime_error {
 public:
  ApiError(scs_status s, const std::string& msg) : std::runtime_error(msg), status(s) {}
  scs_status status;
};

void check(scs_status s) {
  if (s != SCS_OK) throw ApiError(s, std::string(scs_status_name(s)) + ": " + scs_last_error());
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Scene = Handle<scs_scene, scs_scene_free>;
using Coverage = Handle<scs_coverage, scs_coverage_free>;
using Sampling = Handle<scs_sampling, scs_sampling_free>;

std::string take_string(char* s) {
  std::string out(s ? s : "");
  scs_string_free(s);
  return out;
}

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ApiError(SCS_IO_ERROR, "cannot write " + tmp.string());
    f << text;
    if (!f) throw ApiError(SCS_IO_ERROR, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void log_line(const char* level, const std::string& msg) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::fprintf(stderr, "[scene_sampler] [%s] %s\n", level, msg.c_str());
}

std::vector<std::string> resolve_scenes(const Options& o) {
  if (o.root.empty()) throw ApiError(SCS_FATAL_CONFIG, "--root is required");
  if (!fs::is_directory(o.root)) throw ApiError(SCS_FATAL_CONFIG, "scene root " + o.root + " is not a directory");
  if (!o.scenes.empty()) return o.scenes;
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(o.root)) {
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw ApiError(SCS_EMPTY_SCENE, "no scene directories under " + o.root);
  return ids;
}

// Runs fn(k) for every scene on at most `threads` workers. Failures are
// collected per scene; the batch always finishes.
template <typename Fn>
std::vector<Failure> for_each_scene(const std::vector<std::string>& ids, std::uint32_t threads, Fn&& fn) {
  std::vector<std::optional<Failure>> failed(ids.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < ids.size();) {
      try {
        fn(k);
      } catch (const std::exception& e) {
        failed[k] = Failure{ids[k], e.what()};
        log_line("error", ids[k] + ": " + e.what());
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(threads == 0 ? std::thread::hardware_concurrency() : threads, 1,
                                                        std::max<std::size_t>(ids.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  std::vector<Failure> out;
  for (auto& f : failed) {
    if (f) out.push_back(std::move(*f));
  }
  return out;
}

int batch_exit(std::size_t total, const std::vector<Failure>& failures) {
  if (failures.empty()) return kExitOk;
  return failures.size() == total ? kExitFatal : kExitPartial;
}

// Worker threads per scene once scenes themselves run in parallel.
std::uint32_t inner_threads(const Options& o, std::size_t n_scenes) {
  if (n_scenes > 1) return 1;
  return o.threads;
}

scs_sampler_config sampler_config(const Options& o, std::uint32_t threads) {
  scs_sampler_config cfg;
  scs_sampler_config_default(&cfg);
  cfg.strategy = o.strategy == "uniform" ? SCS_STRATEGY_UNIFORM : SCS_STRATEGY_MAX_COVERAGE;
  cfg.budget = o.budget;
  cfg.coverage_threshold = o.threshold.value_or(0.0);
  cfg.threads = threads;
  return cfg;
}

scs_encode_config encode_config(const Options& o) {
  scs_encode_config cfg;
  scs_encode_config_default(&cfg);
  cfg.patch_size = o.patch_size;
  cfg.pool = o.pool == "center" ? SCS_POOL_CENTER : o.pool == "minmax" ? SCS_POOL_MINMAX : SCS_POOL_AVG;
  cfg.pe = o.pe == "mlp" ? SCS_PE_MLP : o.pe == "none" ? SCS_PE_NONE : SCS_PE_SIN;
  cfg.dim = o.dim;
  cfg.grid_resolution = o.grid_res;
  cfg.seed = o.seed;
  return cfg;
}

std::vector<std::uint32_t> scene_frames(const scs_scene* scene) {
  std::vector<std::uint32_t> idx(scs_scene_frame_count(scene));
  if (!idx.empty()) check(scs_scene_frame_indices(scene, idx.data(), idx.size()));
  return idx;
}

std::vector<std::uint32_t> selected_frames(const scs_sampling* s) {
  std::vector<std::uint32_t> sel(scs_sampling_count(s));
  if (!sel.empty()) check(scs_sampling_selected(s, sel.data(), sel.size()));
  return sel;
}

int cmd_sample(const Options& o) {
  const auto ids = resolve_scenes(o);
  const auto threads = inner_threads(o, ids.size());
  const auto failures = for_each_scene(ids, o.threads, [&](std::size_t k) {
    Scene scene;
    check(scs_scene_load(o.root.c_str(), ids[k].c_str(), o.depth_scale, scene.out()));
    if (const auto skipped = scs_scene_skipped_frames(scene.get()); skipped > 0) {
      log_line("warn", ids[k] + ": skipped " + std::to_string(skipped) + " frame(s)");
    }
    Coverage cov;
    check(scs_coverage_build(scene.get(), o.voxel_size, o.stride, threads, cov.out()));
    const fs::path dir = fs::path(o.out) / ids[k];
    fs::create_directories(dir);
    check(scs_coverage_save(cov.get(), (dir / "voxels.v3dc").string().c_str()));
    Sampling s;
    const auto cfg = sampler_config(o, threads);
    check(scs_sample(cov.get(), &cfg, s.out()));
    char* text = nullptr;
    check(scs_sampling_to_json(s.get(), ids[k].c_str(), o.no_timing ? 0 : 1, &text));
    write_atomic(dir / "sample.json", take_string(text));
    log_line("info", ids[k] + ": " + std::to_string(scs_sampling_count(s.get())) + " frame(s), coverage " +
                         std::to_string(scs_sampling_final_ratio(s.get())));
  });
  return batch_exit(ids.size(), failures);
}

std::vector<std::uint32_t> read_selection(const fs::path& sample_json) {
  std::ifstream in(sample_json);
  if (!in) {
    throw ApiError(SCS_FATAL_CONFIG, "missing " + sample_json.string() + " (run `sample` first or pass --all-frames)");
  }
  try {
    const auto doc = json::parse(in);
    return doc.at("selected").get<std::vector<std::uint32_t>>();
  } catch (const json::exception& e) {
    throw ApiError(SCS_FATAL_CONFIG, "unreadable " + sample_json.string() + ": " + e.what());
  }
}

int cmd_encode(const Options& o) {
  const auto ids = resolve_scenes(o);
  const auto cfg = encode_config(o);
  const auto failures = for_each_scene(ids, o.threads, [&](std::size_t k) {
    const fs::path dir = fs::path(o.out) / ids[k];
    // Resolve the selection before touching the depth data so a missing
    // sample result fails fast.
    std::optional<std::vector<std::uint32_t>> frames;
    if (!o.all_frames) frames = read_selection(dir / "sample.json");
    Scene scene;
    check(scs_scene_load(o.root.c_str(), ids[k].c_str(), o.depth_scale, scene.out()));
    if (!frames) frames = scene_frames(scene.get());
    fs::create_directories(dir / "encode");
    for (const auto f : *frames) {
      const auto stem = dir / "encode" / ("frame_" + std::to_string(f));
      check(scs_encode_frame(scene.get(), f, &cfg, stem.string().c_str(), nullptr));
    }
    log_line("info", ids[k] + ": encoded " + std::to_string(frames->size()) + " frame(s)");
  });
  return batch_exit(ids.size(), failures);
}

int cmd_ground_eval(const Options& o) {
  std::string path = o.predictions;
  if (o.oracle) {
    fs::create_directories(o.out);
    path = (fs::path(o.out) / "oracle.jsonl").string();
    check(scs_ground_oracle_write(o.seed, o.queries, o.dim, o.grid_res, o.tau, path.c_str()));
  }
  if (path.empty()) throw ApiError(SCS_FATAL_CONFIG, "ground-eval needs --predictions FILE or --oracle");
  char* text = nullptr;
  check(scs_ground_eval_file(path.c_str(), o.thresholds.data(), o.thresholds.size(), &text));
  const std::string metrics = take_string(text);
  if (!o.out.empty()) write_atomic(fs::path(o.out) / "metrics.json", metrics);
  std::cout << metrics;
  return kExitOk;
}

double percentile95(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  // nearest-rank
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

int cmd_bench(const Options& o) {
  using clock = std::chrono::steady_clock;
  const auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  std::vector<std::string> ids;
  const bool synthetic = o.root.empty();
  if (synthetic) {
    for (std::uint32_t k = 0; k < o.count; ++k) ids.push_back("synth_" + std::to_string(o.seed + k));
  } else {
    ids = resolve_scenes(o);
  }

  // Stages are timed one scene at a time so that the numbers are not
  // polluted by scene-level contention; --threads goes to each stage.
  std::vector<double> t_vox, t_greedy, t_encode;
  json scenes = json::array();
  std::vector<Failure> failures;
  const auto cfg = sampler_config(o, o.threads);
  const auto ecfg = encode_config(o);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    try {
      Scene scene;
      if (synthetic) {
        scs_synth_params p;
        scs_synth_params_default(&p);
        p.seed = o.seed + k;
        p.n_frames = o.frames;
        p.n_objects = o.objects;
        p.width = o.width;
        p.height = o.height;
        p.depth_scale = o.depth_scale;
        p.voxel_size = o.voxel_size;
        check(scs_scene_synthesize(&p, scene.out()));
      } else {
        check(scs_scene_load(o.root.c_str(), ids[k].c_str(), o.depth_scale, scene.out()));
      }
      Coverage cov;
      const auto t0 = clock::now();
      check(scs_coverage_build(scene.get(), o.voxel_size, o.stride, o.threads, cov.out()));
      const auto t1 = clock::now();
      Sampling s;
      check(scs_sample(cov.get(), &cfg, s.out()));
      const auto t2 = clock::now();
      const auto sel = selected_frames(s.get());
      for (const auto f : sel) check(scs_encode_frame(scene.get(), f, &ecfg, nullptr, nullptr));
      const auto t3 = clock::now();

      t_vox.push_back(ms(t0, t1));
      t_greedy.push_back(ms(t1, t2));
      t_encode.push_back(ms(t2, t3));
      json entry;
      entry["scene_id"] = ids[k];
      entry["frames"] = scs_scene_frame_count(scene.get());
      entry["selected"] = sel;
      entry["final_ratio"] = scs_sampling_final_ratio(s.get());
      entry["voxelize_ms"] = t_vox.back();
      entry["greedy_ms"] = t_greedy.back();
      entry["encode_ms"] = t_encode.back();
      scenes.push_back(std::move(entry));
    } catch (const std::exception& e) {
      failures.push_back({ids[k], e.what()});
      log_line("error", ids[k] + ": " + e.what());
    }
  }

  json report;
  report["threads"] = o.threads;
  report["voxel_size"] = o.voxel_size;
  report["strategy"] = o.strategy;
  report["budget"] = o.budget;
  json stages = json::object();
  for (const auto& [name, v] : {std::pair{"voxelize", &t_vox}, {"greedy", &t_greedy}, {"encode", &t_encode}}) {
    stages[name] = {{"mean_ms", mean(*v)}, {"p95_ms", percentile95(*v)}, {"n", v->size()}};
  }
  report["stages"] = std::move(stages);
  report["scenes"] = std::move(scenes);
  const std::string text = report.dump(2) + "\n";
  if (!o.out.empty()) write_atomic(fs::path(o.out) / "bench.json", text);
  std::cout << text;
  return batch_exit(ids.size(), failures);
}

int cmd_synth(const Options& o) {
  std::vector<std::string> ids;
  for (std::uint32_t k = 0; k < o.count; ++k) ids.push_back("synth_" + std::to_string(o.seed + k));
  const auto failures = for_each_scene(ids, o.threads, [&](std::size_t k) {
    scs_synth_params p;
    scs_synth_params_default(&p);
    p.seed = o.seed + k;
    p.n_frames = o.frames;
    p.n_objects = o.objects;
    p.width = o.width;
    p.height = o.height;
    p.depth_scale = o.depth_scale;
    p.voxel_size = o.voxel_size;
    Scene scene;
    check(scs_scene_synthesize(&p, scene.out()));
    check(scs_scene_export(scene.get(), o.out.c_str()));

    json objects = json::array();
    for (std::size_t i = 0; i < scs_scene_object_count(scene.get()); ++i) {
      double c[3], e[3];
      check(scs_scene_object(scene.get(), i, c, e));
      objects.push_back({{"id", i}, {"center", {c[0], c[1], c[2]}}, {"extent", {e[0], e[1], e[2]}}});
    }
    write_atomic(fs::path(o.out) / ids[k] / "objects.json", objects.dump(2) + "\n");
  });
  return batch_exit(ids.size(), failures);
}

void add_scene_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--root", o.root, "Directory holding one sub-directory per scene");
  cmd->add_option("--scene", o.scenes, "Scene id under --root (repeatable; default: all)");
  cmd->add_option("--depth-scale", o.depth_scale, "Raw depth units per metre")->check(CLI::PositiveNumber);
}

void add_sampler_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--strategy", o.strategy, "Frame sampling strategy")->check(CLI::IsMember({"uniform", "mc"}));
  cmd->add_option("--budget", o.budget, "Maximum number of frames")->check(CLI::PositiveNumber);
  cmd->add_option("--threshold", o.threshold, "Stop once this coverage ratio is reached (mc only)")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--voxel-size", o.voxel_size, "Coverage voxel edge in metres")->check(CLI::PositiveNumber);
  cmd->add_option("--stride", o.stride, "Voxelize every n-th pixel")->check(CLI::PositiveNumber);
}

void add_encode_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--patch-size", o.patch_size, "Patch edge in pixels")->check(CLI::PositiveNumber);
  cmd->add_option("--pool", o.pool, "Patch coordinate pooling")->check(CLI::IsMember({"avg", "center", "minmax"}));
  cmd->add_option("--pe", o.pe, "Position encoding")->check(CLI::IsMember({"sin", "mlp", "none"}));
  cmd->add_option("--grid-res", o.grid_res, "Coordinate quantization in metres")->check(CLI::PositiveNumber);
  cmd->add_option("--dim", o.dim, "Embedding width")->check(CLI::PositiveNumber);
}

void add_synth_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--count", o.count, "Number of synthetic scenes");
  cmd->add_option("--frames", o.frames, "Frames per synthetic scene")->check(CLI::PositiveNumber);
  cmd->add_option("--objects", o.objects, "Objects per synthetic scene");
  cmd->add_option("--width", o.width, "Image width")->check(CLI::PositiveNumber);
  cmd->add_option("--height", o.height, "Image height")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* level = std::getenv("SCENE_SAMPLER_LOG")) {
    if (scs_set_log_level(level) != SCS_OK) {
      std::fprintf(stderr, "scene_sampler: ignoring SCENE_SAMPLER_LOG: %s\n", scs_last_error());
    }
  }

  Options o;
  CLI::App app{"RGB-D scene frame sampling and 3D position encoding"};
  app.set_version_flag("--version", std::string(scs_version()));
  app.set_config("--config", "", "Config file (TOML or INI); command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "Seed for every random choice");
  app.add_option("--threads", o.threads, "Worker threads (0: all cores)");
  app.add_option("--out", o.out, "Output directory");

  auto* sample = app.add_subcommand("sample", "Select frames per scene and write sample.json");
  add_scene_flags(sample, o);
  add_sampler_flags(sample, o);
  sample->add_flag("--no-timing", o.no_timing, "Write elapsed_ms as 0 for reproducible output");

  auto* encode = app.add_subcommand("encode", "Write fused embeddings for the sampled frames");
  add_scene_flags(encode, o);
  add_encode_flags(encode, o);
  encode->add_flag("--all-frames", o.all_frames, "Encode every frame instead of the sampled ones");

  auto* ground = app.add_subcommand("ground-eval", "Grounding accuracy and F1 from JSON-lines records");
  ground->add_option("--predictions", o.predictions, "JSON-lines file of {query_id, predicted, target}");
  ground->add_flag("--oracle", o.oracle, "Evaluate a position-encoding-only oracle run instead");
  ground->add_option("--queries", o.queries, "Oracle queries")->check(CLI::PositiveNumber);
  ground->add_option("--thresholds", o.thresholds, "IoU thresholds")->delimiter(',');
  ground->add_option("--tau", o.tau, "Softmax temperature")->check(CLI::PositiveNumber);
  ground->add_option("--grid-res", o.grid_res, "Coordinate quantization in metres")->check(CLI::PositiveNumber);
  ground->add_option("--dim", o.dim, "Embedding width")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "Time voxelization, greedy selection and encoding");
  add_scene_flags(bench, o);
  add_sampler_flags(bench, o);
  add_encode_flags(bench, o);
  add_synth_flags(bench, o);

  auto* synth = app.add_subcommand("synth", "Write deterministic synthetic scenes in the loader layout");
  synth->add_option("--depth-scale", o.depth_scale, "Raw depth units per metre")->check(CLI::PositiveNumber);
  synth->add_option("--voxel-size", o.voxel_size, "Ground-truth voxel edge in metres")->check(CLI::PositiveNumber);
  add_synth_flags(synth, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*sample) return cmd_sample(o);
    if (*encode) return cmd_encode(o);
    if (*ground) return cmd_ground_eval(o);
    if (*bench) return cmd_bench(o);
    if (*synth) return cmd_synth(o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scene_sampler: %s\n", e.what());
    return kExitFatal;
  }
  return kExitFatal;
}
