#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scenesampler/coverage.hpp"

namespace scs {

enum class SamplingStrategy { Uniform, MaxCoverage };

std::string_view to_string(SamplingStrategy s);
SamplingStrategy parse_strategy(std::string_view name);

struct SamplerConfig {
  std::uint32_t budget = 32;
  // Adaptive stop; unset means fixed budget. Ignored by Uniform.
  std::optional<double> coverage_threshold;
  SamplingStrategy strategy = SamplingStrategy::MaxCoverage;
  // Workers for the per-iteration argmax; 0 = hardware concurrency.
  unsigned threads = 1;

  void validate() const;

  /// Budget 32 with a 95% stop.
  static SamplerConfig adaptive() {
    SamplerConfig cfg;
    cfg.budget = 32;
    cfg.coverage_threshold = 0.95;
    return cfg;
  }
};

struct SamplingResult {
  std::vector<std::uint32_t> selected;            // frame indices, selection order
  std::vector<std::uint64_t> covered_after_each;  // |U| after each pick
  std::uint64_t universe_size = 0;
  double final_ratio = 0.0;
};

/// Greedy maximum coverage. Each step takes the frame with the most
/// uncovered voxels (ties to the lowest frame index) and stops on the
/// budget, on reaching the threshold, or when no frame adds anything.
SamplingResult greedy_max_coverage(const SceneCoverage& scene, const SamplerConfig& cfg);

/// min(budget, n) evenly spaced positions floor(r * n / m), r = 0..m-1.
std::vector<std::size_t> uniform_sample(std::size_t n_frames, std::size_t budget);

/// Coverage trajectory of a fixed list of frame positions.
SamplingResult evaluate_selection(const SceneCoverage& scene, const std::vector<std::size_t>& positions);

/// Dispatches on cfg.strategy.
SamplingResult sample_frames(const SceneCoverage& scene, const SamplerConfig& cfg);

struct BruteForceResult {
  std::vector<std::uint32_t> best_subset;  // frame indices, ascending
  std::uint64_t best_count = 0;
};

inline constexpr std::size_t kBruteForceMaxFrames = 20;

/// Exhaustive optimum over all subsets of size <= budget. Exponential;
/// refuses scenes with more than kBruteForceMaxFrames frames.
BruteForceResult brute_force_max_coverage(const SceneCoverage& scene, std::size_t budget);

struct SamplingReport {
  std::string scene_id;
  SamplerConfig config;
  double voxel_size = kDefaultVoxelSize;
  SamplingResult result;
  double elapsed_ms = 0.0;
};

/// Per-scene JSON document with keys in a fixed order.
std::string sampling_report_json(const SamplingReport& report);

}  // namespace scs
