#include "scenesampler/grounding.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "scenesampler/errors.hpp"
#include "scenesampler/posenc.hpp"

namespace scs {

bool ObjectProposal::contains(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d lo = min_corner();
  const Eigen::Vector3d hi = max_corner();
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

void ObjectProposal::validate() const {
  if (!center.allFinite() || !extent.allFinite() || (extent.array() <= 0.0).any()) {
    throw InvalidInput("object proposal " + std::to_string(id) + ": extents must be positive and finite");
  }
}

double aabb_iou(const ObjectProposal& a, const ObjectProposal& b) {
  const Eigen::Vector3d lo = a.min_corner().cwiseMax(b.min_corner());
  const Eigen::Vector3d hi = a.max_corner().cwiseMin(b.max_corner());
  const Eigen::Vector3d overlap = (hi - lo).cwiseMax(0.0);
  const double inter = overlap.prod();
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::size_t PatchMask::count() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), 1));
}

PatchMask assign_patches(const ObjectProposal& box, const CoordinateMap& cmap, int patch_size) {
  if (patch_size < 1) throw InvalidInput("assign_patches: patch size must be >= 1");
  PatchMask mask;
  mask.rows = cmap.height / patch_size;
  mask.cols = cmap.width / patch_size;
  mask.selected.assign(static_cast<std::size_t>(mask.rows) * mask.cols, 0);
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) {
      int valid = 0;
      int inside = 0;
      for (int i = r * patch_size; i < (r + 1) * patch_size; ++i) {
        for (int j = c * patch_size; j < (c + 1) * patch_size; ++j) {
          if (!cmap.is_valid(i, j)) continue;
          ++valid;
          inside += box.contains(cmap.at(i, j));
        }
      }
      if (valid > 0 && 2 * inside > valid) mask.selected[static_cast<std::size_t>(r) * mask.cols + c] = 1;
    }
  }
  return mask;
}

ObjectEmbedding center_only_embedding(const ObjectProposal& box, int dim, double grid_resolution) {
  const auto pe = sinusoidal_pe(box.center, dim, grid_resolution);
  ObjectEmbedding e{box.id, Eigen::VectorXd(dim)};
  for (int k = 0; k < dim; ++k) e.values[k] = pe[k];
  return e;
}

ObjectEmbedding pool_object_features(const PatchMask& mask, const Tensor3& visual, const ObjectProposal& box,
                                     double grid_resolution) {
  if (mask.rows != visual.rows || mask.cols != visual.cols) {
    throw InvalidInput("pool_object_features: mask and feature grid differ in shape");
  }
  ObjectEmbedding e = center_only_embedding(box, visual.channels, grid_resolution);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(visual.channels);
  std::size_t n = 0;
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) {
      if (!mask.at(r, c)) continue;
      const float* f = visual.cell(r, c);
      for (int k = 0; k < visual.channels; ++k) sum[k] += f[k];
      ++n;
    }
  }
  if (n == 0) throw ObjectNotVisible("object " + std::to_string(box.id) + " covers no patch");
  e.values += sum / static_cast<double>(n);
  return e;
}

void GroundingHead::validate(Eigen::Index dim) const {
  if (!(tau > 0.0)) throw InvalidInput("grounding head: temperature must be positive");
  f.validate();
  g.validate();
  if (f.in_dim() != dim || g.in_dim() != dim || f.out_dim() != g.out_dim()) {
    throw InvalidInput("grounding head: projection shapes do not match the embedding dimension");
  }
}

GroundingHead GroundingHead::random(Eigen::Index dim, std::uint64_t seed, Eigen::Index hidden, double scale) {
  if (hidden <= 0) hidden = dim;
  return {Mlp::random(dim, hidden, dim, seed, scale), Mlp::random(dim, hidden, dim, seed ^ 0x5DEECE66DULL, scale),
          kDefaultTemperature};
}

GroundingHead GroundingHead::identity(Eigen::Index dim, double tau) {
  return {Mlp::identity(dim), Mlp::identity(dim), tau};
}

void GroundingBatch::validate() const {
  if (objects.empty()) throw InvalidInput("grounding batch: no objects");
  if (positives.empty()) throw InvalidInput("grounding batch: no positive objects");
  std::set<int> ids;
  for (const auto& o : objects) {
    if (!ids.insert(o.object_id).second) {
      throw InvalidInput("grounding batch: duplicate object id " + std::to_string(o.object_id));
    }
    if (o.values.size() != objects.front().values.size() || !o.values.allFinite()) {
      throw InvalidInput("grounding batch: embeddings must be finite and equally sized");
    }
  }
  for (int p : positives) {
    if (!ids.count(p)) throw InvalidInput("grounding batch: positive id " + std::to_string(p) + " is not an object");
  }
}

std::vector<std::uint8_t> GroundingBatch::positive_mask() const {
  std::set<int> pos(positives.begin(), positives.end());
  std::vector<std::uint8_t> mask(objects.size());
  for (std::size_t k = 0; k < objects.size(); ++k) mask[k] = pos.count(objects[k].object_id) ? 1 : 0;
  return mask;
}

namespace {

double log_sum_exp(std::span<const double> z, std::span<const std::uint8_t> keep, bool only_kept) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < z.size(); ++k)
    if (!only_kept || keep[k]) m = std::max(m, z[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (!only_kept || keep[k]) s += std::exp(z[k] - m);
  return m + std::log(s);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct Forward {
  std::vector<MlpActivations> objects;
  MlpActivations query;
  std::vector<double> scores;
};

Forward run_heads(const GroundingBatch& batch, const GroundingHead& head) {
  batch.validate();
  if (batch.query.size() != batch.objects.front().values.size()) {
    throw InvalidInput("grounding batch: query and object dimensions differ");
  }
  head.validate(batch.query.size());
  Forward fw;
  fw.query = forward_with_cache(head.g, batch.query);
  fw.objects.reserve(batch.objects.size());
  for (const auto& o : batch.objects) {
    fw.objects.push_back(forward_with_cache(head.f, o.values));
    fw.scores.push_back(fw.objects.back().output.dot(fw.query.output));
  }
  return fw;
}

HeadLoss backprop(const GroundingBatch& batch, const GroundingHead& head, const Forward& fw, const ScoreLoss& sl) {
  HeadLoss out;
  out.loss = sl.loss;
  out.degenerate = sl.degenerate;
  out.grad_f = Mlp::zeros(head.f.in_dim(), head.f.hidden_dim(), head.f.out_dim());
  out.grad_g = Mlp::zeros(head.g.in_dim(), head.g.hidden_dim(), head.g.out_dim());
  Eigen::VectorXd dv = Eigen::VectorXd::Zero(head.g.out_dim());
  for (std::size_t k = 0; k < batch.objects.size(); ++k) {
    const double ds = sl.dscores[k];
    if (ds == 0.0) continue;
    dv += ds * fw.objects[k].output;
    backward(head.f, batch.objects[k].values, fw.objects[k], ds * fw.query.output, out.grad_f);
  }
  out.grad_query = backward(head.g, batch.query, fw.query, dv, out.grad_g);
  return out;
}

}  // namespace

ScoreLoss infonce_from_scores(std::span<const double> scores, std::span<const std::uint8_t> positive, double tau) {
  if (!(tau > 0.0)) throw InvalidInput("infonce: temperature must be positive");
  if (scores.size() != positive.size() || scores.empty()) throw InvalidInput("infonce: score/label size mismatch");
  const std::size_t n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](auto v) { return v != 0; }));
  if (n_pos == 0) throw InvalidInput("infonce: no positive object");
  ScoreLoss out;
  out.dscores.assign(scores.size(), 0.0);
  if (n_pos == scores.size()) {
    spdlog::warn("infonce: every object is positive; loss is identically zero");
    out.degenerate = true;
    return out;
  }
  std::vector<double> z(scores.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = scores[k] / tau;
  const double lse_all = log_sum_exp(z, positive, false);
  const double lse_pos = log_sum_exp(z, positive, true);
  out.loss = std::max(0.0, lse_all - lse_pos);
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double p_all = std::exp(z[k] - lse_all);
    const double p_pos = positive[k] ? std::exp(z[k] - lse_pos) : 0.0;
    out.dscores[k] = (p_all - p_pos) / tau;
  }
  return out;
}

ScoreLoss bce_from_logits(std::span<const double> logits, std::span<const std::uint8_t> positive) {
  if (logits.size() != positive.size() || logits.empty()) throw InvalidInput("bce: logit/label size mismatch");
  ScoreLoss out;
  out.dscores.resize(logits.size());
  const double n = static_cast<double>(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double x = logits[k];
    // -log sigmoid(x) = softplus(-x); -log(1 - sigmoid(x)) = softplus(x)
    out.loss += positive[k] ? softplus(-x) : softplus(x);
    out.dscores[k] = (sigmoid(x) - (positive[k] ? 1.0 : 0.0)) / n;
  }
  out.loss /= n;
  return out;
}

std::vector<double> head_scores(const GroundingBatch& batch, const GroundingHead& head) {
  return run_heads(batch, head).scores;
}

HeadLoss infonce_loss(const GroundingBatch& batch, const GroundingHead& head) {
  if (batch.objects.size() < 2) throw InvalidInput("infonce: at least two objects are required");
  const Forward fw = run_heads(batch, head);
  const auto mask = batch.positive_mask();
  return backprop(batch, head, fw, infonce_from_scores(fw.scores, mask, head.tau));
}

HeadLoss bce_loss(const GroundingBatch& batch, const GroundingHead& head) {
  const Forward fw = run_heads(batch, head);
  const auto mask = batch.positive_mask();
  return backprop(batch, head, fw, bce_from_logits(fw.scores, mask));
}

int select_single(std::span<const Similarity> sims) {
  if (sims.empty()) throw InvalidInput("select_single: no candidates");
  const Similarity* best = &sims[0];
  for (const auto& s : sims) {
    if (s.second > best->second || (s.second == best->second && s.first < best->first)) best = &s;
  }
  return best->first;
}

std::vector<int> select_multi(std::span<const Similarity> sims, double tau, double p) {
  if (sims.empty()) throw InvalidInput("select_multi: no candidates");
  if (!(tau > 0.0)) throw InvalidInput("select_multi: temperature must be positive");
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("select_multi: threshold must lie in (0, 1)");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& s : sims) m = std::max(m, s.second / tau);
  std::vector<std::pair<double, int>> probs;
  double total = 0.0;
  for (const auto& s : sims) {
    const double e = std::exp(s.second / tau - m);
    probs.emplace_back(e, s.first);
    total += e;
  }
  for (auto& pr : probs) pr.first /= total;
  std::sort(probs.begin(), probs.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> out;
  double cum = 0.0;
  for (const auto& [prob, id] : probs) {
    out.push_back(id);
    cum += prob;
    if (cum > p) break;
  }
  return out;
}

double record_f1(const GroundingRecord& r, double threshold) {
  if (r.target.empty() && r.predicted.empty()) return 1.0;
  if (r.target.empty() || r.predicted.empty()) return 0.0;
  struct Pair {
    double iou;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < r.predicted.size(); ++p) {
    for (std::size_t g = 0; g < r.target.size(); ++g) {
      const double iou = aabb_iou(r.predicted[p], r.target[g]);
      if (iou > threshold) pairs.push_back({iou, p, g});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    return a.p != b.p ? a.p < b.p : a.g < b.g;
  });
  std::vector<std::uint8_t> used_p(r.predicted.size(), 0), used_g(r.target.size(), 0);
  std::size_t tp = 0;
  for (const auto& pr : pairs) {
    if (used_p[pr.p] || used_g[pr.g]) continue;
    used_p[pr.p] = used_g[pr.g] = 1;
    ++tp;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(r.predicted.size());
  const double recall = static_cast<double>(tp) / static_cast<double>(r.target.size());
  return 2.0 * precision * recall / (precision + recall);
}

GroundingMetrics eval_metrics(std::span<const GroundingRecord> records, std::span<const double> thresholds) {
  static constexpr double kDefaultThresholds[] = {0.25, 0.5};
  if (thresholds.empty()) thresholds = kDefaultThresholds;
  GroundingMetrics m;
  m.thresholds.assign(thresholds.begin(), thresholds.end());
  m.n = records.size();
  std::vector<double> correct(thresholds.size(), 0.0), f1(thresholds.size(), 0.0);
  for (const auto& r : records) {
    const bool single = r.target.size() == 1;
    if (single) ++m.n_single;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (single && !r.predicted.empty() && aabb_iou(r.predicted.front(), r.target.front()) > thresholds[t]) {
        correct[t] += 1.0;
      }
      f1[t] += record_f1(r, thresholds[t]);
    }
  }
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    m.accuracy.push_back(m.n_single ? std::optional<double>(correct[t] / static_cast<double>(m.n_single))
                                    : std::nullopt);
    m.f1.push_back(m.n ? f1[t] / static_cast<double>(m.n) : 0.0);
  }
  return m;
}

}  // namespace scs
