#include "fga/audit.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace fga {

const EffectValue& AuditReport::effect(const StageTriple& stage, EffectKind kind) const {
  auto s = effects.find(stage);
  if (s != effects.end()) {
    auto e = s->second.find(kind);
    if (e != s->second.end()) return e->second;
  }
  throw ValidationError("report for " + model + "/" + dataset + " lacks " + std::string(to_string(kind)) +
                        " at stage " + to_string(stage));
}

AuditReport decompose(const StageDatasets& datasets, Transition t, int y_target, const DecomposeOptions& opts) {
  std::vector<StageTriple> stages;
  if (opts.real_only) {
    stages = {kRealWorldStage};
  } else {
    stages.assign(std::begin(kDataStages), std::end(kDataStages));
  }
  for (const StageTriple& s : stages) {
    if (!datasets.count(s)) throw EstimationError("missing staged dataset for stage " + to_string(s));
  }

  AuditReport r;
  r.model = opts.model;
  r.family = opts.family;
  r.dataset = opts.dataset;
  r.transition = t;
  r.y_target = y_target;
  nlohmann::json terms = nlohmann::json::object();
  for (const StageTriple& s : stages) {
    for (EffectKind k : kPathwayKinds) {
      const EffectEstimate e = estimate_effect(datasets, k, s, t, y_target, opts.estimator);
      r.effects[s][k] = report_convention(e.effect);
      terms[to_string(s) + "/" + std::string(to_string(k))] = e.provenance;
    }
    if (s == kRealWorldStage || s == kModelStage) {
      const EffectEstimate e = estimate_effect(datasets, EffectKind::TV, s, t, y_target, opts.estimator);
      r.effects[s][EffectKind::TV] = report_convention(e.effect);
    }
  }
  if (!opts.real_only) {
    for (EffectKind k : kPathwayKinds) {
      std::map<StageTriple, EffectValue> by_stage;
      for (const StageTriple& s : stages) by_stage[s] = r.effects[s][k];
      r.waterfalls.push_back(waterfall(by_stage, k));
    }
  }
  r.provenance = {{"estimator", "dr"},
                  {"folds", opts.estimator.folds},
                  {"seed", opts.estimator.seed},
                  {"alpha", opts.estimator.alpha},
                  {"rows", nlohmann::json::object()},
                  {"variance_rule",
                   "effects at one stage: row-wise IF difference on the shared dataset; stage terms: "
                   "independent datasets, variances add"},
                  {"orientation", "reported: IE and SE negated"},
                  {"terms", terms}};
  for (const StageTriple& s : stages) r.provenance["rows"][to_string(s)] = datasets.at(s).size();
  return r;
}

nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json effects = nlohmann::json::array();
  for (const auto& [stage, by_kind] : r.effects) {
    for (const auto& [kind, e] : by_kind) effects.push_back(to_json(e));
  }
  nlohmann::json wf = nlohmann::json::array();
  for (const auto& w : r.waterfalls) wf.push_back(to_json(w));
  return {{"format", "fga.report"},
          {"version", 1},
          {"model", r.model},
          {"family", r.family},
          {"dataset", r.dataset},
          {"transition", {{"x0", r.transition.x0}, {"x1", r.transition.x1}}},
          {"y_target", r.y_target},
          {"effects", effects},
          {"waterfalls", wf},
          {"provenance", r.provenance}};
}

AuditReport audit_report_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "fga.report") throw ValidationError("not an fga.report document");
    AuditReport r;
    r.model = j.value("model", std::string{});
    r.family = j.value("family", std::string{});
    r.dataset = j.value("dataset", std::string{});
    if (j.contains("transition")) {
      r.transition.x0 = j["transition"].value("x0", 0);
      r.transition.x1 = j["transition"].value("x1", 1);
    }
    r.y_target = j.value("y_target", 1);
    for (const auto& e : j.at("effects")) {
      EffectValue v = effect_value_from_json(e);
      if (!v.reported) v = report_convention(v);
      r.effects[v.stage][v.kind] = v;
    }
    bool full = true;
    for (const StageTriple& s : kDataStages) full = full && r.effects.count(s);
    if (full) {
      for (EffectKind k : kPathwayKinds) {
        std::map<StageTriple, EffectValue> by_stage;
        bool have = true;
        for (const StageTriple& s : kDataStages) {
          auto it = r.effects[s].find(k);
          if (it == r.effects[s].end()) {
            have = false;
            break;
          }
          by_stage[s] = it->second;
        }
        if (have) r.waterfalls.push_back(waterfall(by_stage, k));
      }
    }
    r.provenance = j.value("provenance", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

AuditReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open report " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  try {
    return audit_report_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_report(const AuditReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json(r).dump(2) << '\n';
}

DatasetSignature dataset_signature(const AuditReport& r) {
  DatasetSignature d;
  d.dataset = r.dataset;
  for (int k = 0; k < 3; ++k) d.real[static_cast<std::size_t>(k)] = r.effect(kRealWorldStage, kPathwayKinds[k]).value;
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k < 3; ++k) {
      d.model[static_cast<std::size_t>(s * 3 + k)] = r.effect(kSignatureStages[s], kPathwayKinds[k]).value;
    }
  }
  return d;
}

std::vector<BiasSignature> signatures_from_reports(const std::vector<AuditReport>& reports) {
  std::map<std::string, std::map<std::string, DatasetSignature>> by_model;
  std::vector<std::string> order;
  for (const AuditReport& r : reports) {
    if (r.model.empty()) throw ValidationError("report without a model id");
    if (!by_model.count(r.model)) order.push_back(r.model);
    auto& slot = by_model[r.model];
    if (slot.count(r.dataset)) throw ValidationError("duplicate report for " + r.model + " on " + r.dataset);
    slot[r.dataset] = dataset_signature(r);
  }
  std::vector<BiasSignature> out;
  std::set<std::string> expected;
  for (const auto& name : order) {
    std::set<std::string> have;
    for (const auto& [ds, sig] : by_model[name]) have.insert(ds);
    if (out.empty()) {
      expected = have;
    } else if (have != expected) {
      throw ValidationError("model " + name + " does not cover the same datasets as " + out.front().model);
    }
    BiasSignature b;
    b.model = name;
    for (const auto& [ds, sig] : by_model[name]) b.datasets.push_back(sig);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace fga
