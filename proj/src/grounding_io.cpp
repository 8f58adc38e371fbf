#include <spdlog/spdlog.h>

#include <charconv>
#include <json.hpp>
#include <set>

#include "scenesampler/errors.hpp"
#include "scenesampler/grounding.hpp"
#include "scenesampler/posenc.hpp"
#include "scenesampler/random.hpp"

namespace scs {

using nlohmann::ordered_json;

namespace {

Eigen::Vector3d vec3(const ordered_json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw InvalidInput(std::string(key) + " must be a 3-element array");
  Eigen::Vector3d v;
  for (int k = 0; k < 3; ++k) {
    if (!a[k].is_number()) throw InvalidInput(std::string(key) + " must hold numbers");
    v[k] = a[k].get<double>();
  }
  return v;
}

std::vector<ObjectProposal> boxes(const ordered_json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array()) throw InvalidInput(std::string(key) + " must be an array");
  std::vector<ObjectProposal> out;
  int id = 0;
  for (const auto& b : a) {
    ObjectProposal p;
    p.id = b.contains("id") ? b["id"].get<int>() : id;
    p.center = vec3(b, "center");
    p.extent = vec3(b, "extent");
    p.validate();
    out.push_back(p);
    ++id;
  }
  return out;
}

ordered_json box_json(const ObjectProposal& p) {
  return ordered_json{{"center", {p.center.x(), p.center.y(), p.center.z()}},
                      {"extent", {p.extent.x(), p.extent.y(), p.extent.z()}}};
}

std::string threshold_key(const char* prefix, double t) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), t);
  return std::string(prefix) + std::string(buf, end);
}

}  // namespace

std::vector<GroundingRecord> read_grounding_jsonl(std::istream& in, std::size_t* skipped) {
  std::vector<GroundingRecord> out;
  std::size_t bad = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = ordered_json::parse(line);
      GroundingRecord r;
      const auto& qid = j.at("query_id");
      r.query_id = qid.is_string() ? qid.get<std::string>() : qid.dump();
      r.predicted = boxes(j, "predicted");
      r.target = boxes(j, "target");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      ++bad;
      spdlog::warn("grounding records: skipping line {}: {}", line_no, e.what());
    }
  }
  if (skipped) *skipped = bad;
  return out;
}

std::string grounding_record_json(const GroundingRecord& r) {
  ordered_json j;
  j["query_id"] = r.query_id;
  j["predicted"] = ordered_json::array();
  for (const auto& p : r.predicted) j["predicted"].push_back(box_json(p));
  j["target"] = ordered_json::array();
  for (const auto& t : r.target) j["target"].push_back(box_json(t));
  return j.dump();
}

std::string metrics_json(const GroundingMetrics& m) {
  ordered_json j;
  for (std::size_t t = 0; t < m.thresholds.size(); ++t) {
    const auto key = threshold_key("acc_", m.thresholds[t]);
    if (m.accuracy[t]) {
      j[key] = *m.accuracy[t];
    } else {
      j[key] = nullptr;
    }
  }
  for (std::size_t t = 0; t < m.thresholds.size(); ++t) j[threshold_key("f1_", m.thresholds[t])] = m.f1[t];
  j["n"] = m.n;
  j["n_single_target"] = m.n_single;
  j["skipped"] = m.skipped;
  return j.dump(2) + "\n";
}

std::vector<OracleQuery> make_oracle_queries(const OracleConfig& cfg) {
  if (cfg.queries < 0 || cfg.objects_per_scene < 2) throw InvalidInput("pe oracle: need >= 2 objects per scene");
  const GroundingHead head = GroundingHead::identity(cfg.dim, cfg.tau);
  SplitMix64 rng(cfg.seed);
  const double min_gap = 2.0 * cfg.grid_resolution;

  std::vector<OracleQuery> queries;
  queries.reserve(static_cast<std::size_t>(cfg.queries));
  for (int q = 0; q < cfg.queries; ++q) {
    // Fresh object layout per query; centers at least two grid steps apart
    // along some axis.
    OracleQuery out;
    auto& objects = out.objects;
    while (static_cast<int>(objects.size()) < cfg.objects_per_scene) {
      ObjectProposal p;
      p.id = static_cast<int>(objects.size());
      p.extent = {rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.0)};
      for (int a = 0; a < 3; ++a) p.center[a] = rng.uniform(0.5 * p.extent[a], cfg.room_extent[a] - 0.5 * p.extent[a]);
      const bool clash = std::any_of(objects.begin(), objects.end(), [&](const ObjectProposal& o) {
        return (o.center - p.center).cwiseAbs().maxCoeff() < min_gap;
      });
      if (!clash) objects.push_back(p);
    }
    out.target = static_cast<int>(rng.below(objects.size()));

    GroundingBatch batch;
    for (const auto& o : objects) batch.objects.push_back(center_only_embedding(o, cfg.dim, cfg.grid_resolution));
    batch.positives = {out.target};
    batch.query = batch.objects[static_cast<std::size_t>(out.target)].values;
    const auto scores = head_scores(batch, head);
    for (std::size_t k = 0; k < objects.size(); ++k) out.sims.emplace_back(objects[k].id, scores[k]);
    queries.push_back(std::move(out));
  }
  return queries;
}

std::vector<GroundingRecord> run_pe_oracle(const OracleConfig& cfg) {
  std::vector<GroundingRecord> records;
  int q = 0;
  for (const auto& query : make_oracle_queries(cfg)) {
    const int chosen = select_single(query.sims);
    GroundingRecord r;
    r.query_id = "oracle_" + std::to_string(q++);
    r.predicted = {query.objects[static_cast<std::size_t>(chosen)]};
    r.target = {query.objects[static_cast<std::size_t>(query.target)]};
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace scs
