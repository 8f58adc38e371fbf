#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenesampler/geometry.hpp"
#include "scenesampler/mlp.hpp"
#include "scenesampler/tensor.hpp"

namespace scs {

inline constexpr double kDefaultTemperature = 0.07;
inline constexpr double kDefaultMultiTargetThreshold = 0.25;

/// Axis-aligned world box; extent holds full side lengths.
struct ObjectProposal {
  int id = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d extent = Eigen::Vector3d::Ones();
  std::optional<double> score;

  Eigen::Vector3d min_corner() const { return center - 0.5 * extent; }
  Eigen::Vector3d max_corner() const { return center + 0.5 * extent; }
  double volume() const { return extent.prod(); }
  bool contains(const Eigen::Vector3d& p) const;
  void validate() const;
};

double aabb_iou(const ObjectProposal& a, const ObjectProposal& b);

struct PatchMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> selected;

  bool at(int r, int c) const { return selected[static_cast<std::size_t>(r) * cols + c] != 0; }
  std::size_t count() const;
};

/// A patch is selected when strictly more than half of its valid pixels
/// fall inside the box. Patches without valid pixels never are.
PatchMask assign_patches(const ObjectProposal& box, const CoordinateMap& cmap, int patch_size);

struct ObjectEmbedding {
  int object_id = 0;
  Eigen::VectorXd values;
};

/// Mean visual feature over the selected patches plus the sinusoidal
/// encoding of the box center. Throws ObjectNotVisible for an empty mask.
ObjectEmbedding pool_object_features(const PatchMask& mask, const Tensor3& visual, const ObjectProposal& box,
                                     double grid_resolution);

/// Encoding-only embedding for proposals no sampled frame sees.
ObjectEmbedding center_only_embedding(const ObjectProposal& box, int dim, double grid_resolution);

/// Projection heads f (objects) and g (query) with temperature tau.
struct GroundingHead {
  Mlp f;
  Mlp g;
  double tau = kDefaultTemperature;

  void validate(Eigen::Index dim) const;

  /// Random heads d -> hidden -> d (hidden defaults to d).
  static GroundingHead random(Eigen::Index dim, std::uint64_t seed, Eigen::Index hidden = 0, double scale = 0.3);
  static GroundingHead identity(Eigen::Index dim, double tau = kDefaultTemperature);
};

struct GroundingBatch {
  std::vector<ObjectEmbedding> objects;
  std::vector<int> positives;  // object ids
  Eigen::VectorXd query;

  /// Objects nonempty with distinct ids; positives nonempty and a subset.
  void validate() const;
  std::vector<std::uint8_t> positive_mask() const;
};

struct ScoreLoss {
  double loss = 0.0;
  std::vector<double> dscores;
  bool degenerate = false;
};

/// -log(sum_pos exp(s/tau) / sum_all exp(s/tau)) and its gradient in s.
/// With every object positive the loss is exactly 0 and `degenerate` set.
ScoreLoss infonce_from_scores(std::span<const double> scores, std::span<const std::uint8_t> positive, double tau);

/// Mean over objects of the sigmoid binary cross-entropy of each logit.
ScoreLoss bce_from_logits(std::span<const double> logits, std::span<const std::uint8_t> positive);

struct HeadLoss {
  double loss = 0.0;
  Mlp grad_f;
  Mlp grad_g;
  Eigen::VectorXd grad_query;
  bool degenerate = false;
};

/// Similarities s_k = f(e_k) . g(h), in object order.
std::vector<double> head_scores(const GroundingBatch& batch, const GroundingHead& head);

HeadLoss infonce_loss(const GroundingBatch& batch, const GroundingHead& head);

/// Logits are the raw similarities (no temperature).
HeadLoss bce_loss(const GroundingBatch& batch, const GroundingHead& head);

using Similarity = std::pair<int, double>;  // (object id, score)

/// Highest score; ties to the lowest id.
int select_single(std::span<const Similarity> sims);

/// Softmax(s / tau), sorted descending (ties to lower id); the shortest
/// prefix whose cumulative probability exceeds p.
std::vector<int> select_multi(std::span<const Similarity> sims, double tau, double p);

struct GroundingRecord {
  std::string query_id;
  std::vector<ObjectProposal> predicted;
  std::vector<ObjectProposal> target;
};

struct GroundingMetrics {
  std::vector<double> thresholds;
  std::vector<std::optional<double>> accuracy;  // over single-target records; unset if none
  std::vector<double> f1;                        // mean per-record F1 over all records
  std::size_t n = 0;
  std::size_t n_single = 0;
  std::size_t skipped = 0;
};

/// Per-record F1 at IoU > threshold, greedy one-to-one matching with the
/// highest-IoU pairs first. Empty prediction on an empty target scores 1.
double record_f1(const GroundingRecord& r, double threshold);

GroundingMetrics eval_metrics(std::span<const GroundingRecord> records,
                              std::span<const double> thresholds = std::span<const double>());

/// JSON-lines reader; malformed lines are logged, counted and skipped.
std::vector<GroundingRecord> read_grounding_jsonl(std::istream& in, std::size_t* skipped);
std::string grounding_record_json(const GroundingRecord& r);

/// {"acc_0.25": .., "acc_0.5": .., "f1_0.25": .., "f1_0.5": .., "n": .., ...}
std::string metrics_json(const GroundingMetrics& m);

struct OracleConfig {
  std::uint64_t seed = 0;
  int queries = 100;
  int objects_per_scene = 12;
  int dim = 64;
  double grid_resolution = 0.02;
  double tau = kDefaultTemperature;
  Eigen::Vector3d room_extent{6.0, 5.0, 3.0};
};

struct OracleQuery {
  std::vector<ObjectProposal> objects;  // ids equal positions
  int target = 0;
  std::vector<Similarity> sims;  // identity-head scores against the target's encoding
};

/// The scenes and scores behind run_pe_oracle, one per query.
std::vector<OracleQuery> make_oracle_queries(const OracleConfig& cfg);

/// Encoding-only grounding: objects are their center encodings, the query
/// is the target's center encoding, both heads are identities. Returns one
/// single-target record per query with the selected box as prediction.
std::vector<GroundingRecord> run_pe_oracle(const OracleConfig& cfg);

}  // namespace scs
