#include "scenesampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <json.hpp>

#include "scenesampler/errors.hpp"
#include "scenesampler/parallel.hpp"

namespace scs {

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::Uniform:
      return "uniform";
    case SamplingStrategy::MaxCoverage:
      return "mc";
  }
  return "unknown";
}

SamplingStrategy parse_strategy(std::string_view name) {
  if (name == "uniform") return SamplingStrategy::Uniform;
  if (name == "mc") return SamplingStrategy::MaxCoverage;
  throw InvalidInput("unknown sampling strategy '" + std::string(name) + "'");
}

void SamplerConfig::validate() const {
  if (budget < 1) throw InvalidInput("sampler: budget must be >= 1");
  if (coverage_threshold && !(*coverage_threshold > 0.0 && *coverage_threshold <= 1.0)) {
    throw InvalidInput("sampler: coverage threshold must lie in (0, 1]");
  }
}

namespace {

double ratio(std::uint64_t covered, std::uint64_t universe) {
  return universe == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(universe);
}

std::uint64_t marginal_gain(const std::vector<std::uint32_t>& ids, const std::vector<std::uint8_t>& covered) {
  std::uint64_t g = 0;
  for (std::uint32_t id : ids) g += covered[id] == 0;
  return g;
}

}  // namespace

SamplingResult greedy_max_coverage(const SceneCoverage& scene, const SamplerConfig& cfg) {
  cfg.validate();
  if (scene.frame_count() == 0) throw InvalidInput("greedy_max_coverage: scene has no frames");

  const auto& ids = scene.frame_ids();
  const std::size_t n = ids.size();
  const unsigned threads = resolve_threads(cfg.threads);

  SamplingResult out;
  out.universe_size = scene.universe().size();
  std::vector<std::uint8_t> covered(out.universe_size, 0);
  std::vector<std::uint8_t> taken(n, 0);
  // Gains only shrink as U grows, so the last computed gain bounds the next.
  std::vector<std::uint64_t> bound(n);
  for (std::size_t k = 0; k < n; ++k) bound[k] = ids[k].size();
  std::uint64_t covered_count = 0;

  while (out.selected.size() < cfg.budget) {
    std::ptrdiff_t best = -1;
    std::uint64_t best_gain = 0;
    if (threads > 1) {
      std::vector<std::uint64_t> gains(n, 0);
      parallel_for(n, threads, [&](std::size_t k) {
        if (!taken[k]) gains[k] = marginal_gain(ids[k], covered);
      });
      for (std::size_t k = 0; k < n; ++k) {
        if (taken[k]) continue;
        bound[k] = gains[k];
        if (best < 0 || gains[k] > best_gain) {
          best = static_cast<std::ptrdiff_t>(k);
          best_gain = gains[k];
        }
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        if (taken[k]) continue;
        // A lower index already holds best_gain, so equal bounds cannot win.
        if (best >= 0 && bound[k] <= best_gain) continue;
        const std::uint64_t g = marginal_gain(ids[k], covered);
        bound[k] = g;
        if (best < 0 || g > best_gain) {
          best = static_cast<std::ptrdiff_t>(k);
          best_gain = g;
        }
      }
    }
    if (best < 0 || best_gain == 0) break;

    taken[best] = 1;
    for (std::uint32_t id : ids[best]) covered[id] = 1;
    covered_count += best_gain;
    out.selected.push_back(scene.frames()[best].frame_index);
    out.covered_after_each.push_back(covered_count);

    if (cfg.coverage_threshold && ratio(covered_count, out.universe_size) >= *cfg.coverage_threshold) break;
  }
  out.final_ratio = ratio(covered_count, out.universe_size);
  return out;
}

std::vector<std::size_t> uniform_sample(std::size_t n_frames, std::size_t budget) {
  if (n_frames == 0 || budget == 0) throw InvalidInput("uniform_sample: frame count and budget must be >= 1");
  const std::size_t m = std::min(budget, n_frames);
  std::vector<std::size_t> out(m);
  for (std::size_t r = 0; r < m; ++r) out[r] = r * n_frames / m;
  return out;
}

SamplingResult evaluate_selection(const SceneCoverage& scene, const std::vector<std::size_t>& positions) {
  SamplingResult out;
  out.universe_size = scene.universe().size();
  std::vector<std::uint8_t> covered(out.universe_size, 0);
  std::uint64_t covered_count = 0;
  for (std::size_t pos : positions) {
    if (pos >= scene.frame_count()) throw InvalidInput("evaluate_selection: frame position out of range");
    for (std::uint32_t id : scene.frame_ids()[pos]) {
      if (!covered[id]) {
        covered[id] = 1;
        ++covered_count;
      }
    }
    out.selected.push_back(scene.frames()[pos].frame_index);
    out.covered_after_each.push_back(covered_count);
  }
  out.final_ratio = ratio(covered_count, out.universe_size);
  return out;
}

SamplingResult sample_frames(const SceneCoverage& scene, const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.strategy == SamplingStrategy::MaxCoverage) return greedy_max_coverage(scene, cfg);
  if (scene.frame_count() == 0) throw InvalidInput("sample_frames: scene has no frames");
  return evaluate_selection(scene, uniform_sample(scene.frame_count(), cfg.budget));
}

BruteForceResult brute_force_max_coverage(const SceneCoverage& scene, std::size_t budget) {
  const std::size_t n = scene.frame_count();
  if (n > kBruteForceMaxFrames) {
    throw InvalidInput("brute_force_max_coverage: " + std::to_string(n) + " frames exceeds the limit of " +
                       std::to_string(kBruteForceMaxFrames));
  }
  const std::size_t words = (scene.universe().size() + 63) / 64;
  std::vector<std::vector<std::uint64_t>> bits(n, std::vector<std::uint64_t>(words, 0));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::uint32_t id : scene.frame_ids()[k]) bits[k][id / 64] |= std::uint64_t{1} << (id % 64);
  }
  // Coverage is monotone, so subsets of exactly min(budget, n) suffice.
  const std::size_t size = std::min(budget, n);
  BruteForceResult best;
  std::vector<std::size_t> chosen;
  std::vector<std::vector<std::uint64_t>> acc(size + 1, std::vector<std::uint64_t>(words, 0));

  std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t start, std::size_t depth) {
    if (depth == size) {
      std::uint64_t count = 0;
      for (std::uint64_t w : acc[depth]) count += static_cast<std::uint64_t>(std::popcount(w));
      if (count > best.best_count || best.best_subset.empty()) {
        best.best_count = count;
        best.best_subset.clear();
        for (std::size_t pos : chosen) best.best_subset.push_back(scene.frames()[pos].frame_index);
      }
      return;
    }
    for (std::size_t k = start; k + (size - depth) <= n; ++k) {
      for (std::size_t w = 0; w < words; ++w) acc[depth + 1][w] = acc[depth][w] | bits[k][w];
      chosen.push_back(k);
      recurse(k + 1, depth + 1);
      chosen.pop_back();
    }
  };
  if (size > 0) recurse(0, 0);
  return best;
}

std::string sampling_report_json(const SamplingReport& report) {
  nlohmann::ordered_json j;
  j["scene_id"] = report.scene_id;
  j["strategy"] = std::string(to_string(report.config.strategy));
  j["voxel_size"] = report.voxel_size;
  j["budget"] = report.config.budget;
  if (report.config.coverage_threshold) {
    j["threshold"] = *report.config.coverage_threshold;
  } else {
    j["threshold"] = nullptr;
  }
  j["selected"] = report.result.selected;
  j["coverage_trajectory"] = report.result.covered_after_each;
  j["universe_size"] = report.result.universe_size;
  j["final_ratio"] = report.result.final_ratio;
  j["elapsed_ms"] = report.elapsed_ms;
  return j.dump(2) + "\n";
}

}  // namespace scs
