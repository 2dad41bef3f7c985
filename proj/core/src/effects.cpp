#include "fga/effects.hpp"

#include <cmath>

namespace fga {

std::string_view to_string(EffectKind k) {
  switch (k) {
    case EffectKind::DE: return "DE";
    case EffectKind::IE: return "IE";
    case EffectKind::SE: return "SE";
    case EffectKind::TV: return "TV";
  }
  return "?";
}

EffectKind parse_effect_kind(std::string_view text) {
  if (text == "DE" || text == "de") return EffectKind::DE;
  if (text == "IE" || text == "ie") return EffectKind::IE;
  if (text == "SE" || text == "se") return EffectKind::SE;
  if (text == "TV" || text == "tv") return EffectKind::TV;
  throw ValidationError("unknown effect kind '" + std::string(text) + "'");
}

void EffectValue::set_se(double s) {
  se = s;
  ci95 = Interval{value - 1.96 * s, value + 1.96 * s};
}

EffectQueries effect_queries(EffectKind kind, const StageTriple& stage, Transition t, int y_target) {
  auto q = [&](int xz, int xw, int xy) { return PoQuery{xz, xw, xy, stage, y_target}; };
  switch (kind) {
    case EffectKind::DE: return {q(t.x0, t.x0, t.x1), q(t.x0, t.x0, t.x0)};
    case EffectKind::IE: return {q(t.x0, t.x0, t.x1), q(t.x0, t.x1, t.x1)};
    case EffectKind::SE: return {q(t.x0, t.x1, t.x1), q(t.x1, t.x1, t.x1)};
    case EffectKind::TV: break;
  }
  throw ValidationError("TV is not a difference of nested potential outcomes");
}

EffectValue tv(const ScmPair& pair, Env env, Transition t, int y_target) {
  const JointTable joint(pair.levels, pair.env(env));
  EffectValue out;
  out.kind = EffectKind::TV;
  out.stage = StageTriple::constant(env);
  out.value = joint.y_given_x(y_target, t.x1) - joint.y_given_x(y_target, t.x0);
  return out;
}

EffectValue s_effect(const ScmPair& pair, EffectKind kind, const StageTriple& stage, Transition t,
                     int y_target) {
  if (kind == EffectKind::TV) {
    if (stage.z != stage.w || stage.w != stage.y) {
      throw ValidationError("TV is only defined for a constant stage");
    }
    return tv(pair, stage.z, t, y_target);
  }
  const EffectQueries qs = effect_queries(kind, stage, t, y_target);
  EffectValue out;
  out.kind = kind;
  out.stage = stage;
  out.value = eval_po_exact(pair, qs.first) - eval_po_exact(pair, qs.second);
  return out;
}

Decomposition tv_decompose(const ScmPair& pair, Env env, Transition t, int y_target) {
  const StageTriple s = StageTriple::constant(env);
  return Decomposition{s_effect(pair, EffectKind::DE, s, t, y_target),
                       s_effect(pair, EffectKind::IE, s, t, y_target),
                       s_effect(pair, EffectKind::SE, s, t, y_target), tv(pair, env, t, y_target)};
}

DeltaDecomposition delta_tv_decompose(const ScmPair& pair, Transition t, int y_target) {
  const Decomposition real = tv_decompose(pair, s0, t, y_target);
  const Decomposition model = tv_decompose(pair, s1, t, y_target);
  return DeltaDecomposition{model.de.value - real.de.value, model.ie.value - real.ie.value,
                            model.se.value - real.se.value, model.tv.value - real.tv.value};
}

double delta_ce(const ScmPair& pair, EffectKind kind, const StageTriple& from,
                const StageTriple& to, Transition t, int y_target) {
  return s_effect(pair, kind, to, t, y_target).value - s_effect(pair, kind, from, t, y_target).value;
}

StageTerms delta_ce_stages(const ScmPair& pair, EffectKind kind, Transition t, int y_target) {
  double ce[4];
  for (int i = 0; i < 4; ++i) ce[i] = s_effect(pair, kind, kDataStages[i], t, y_target).value;
  return StageTerms{ce[1] - ce[0], ce[2] - ce[1], ce[3] - ce[2], ce[3] - ce[0]};
}

EffectValue report_convention(EffectValue e) {
  if (e.reported) return e;
  if (e.kind == EffectKind::IE || e.kind == EffectKind::SE) {
    e.value = -e.value;
    if (e.ci95) e.ci95 = Interval{-e.ci95->hi, -e.ci95->lo};
  }
  e.reported = true;
  return e;
}

bool is_disadvantage(const EffectValue& reported) { return reported.value > 0.0; }

nlohmann::json to_json(const EffectValue& e) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(e.kind));
  j["stage"] = to_string(e.stage);
  const EffectValue raw = [&] {
    if (!e.reported || (e.kind != EffectKind::IE && e.kind != EffectKind::SE)) return e;
    EffectValue r = e;
    r.value = -e.value;
    return r;
  }();
  j["raw_value"] = raw.value;
  j["reported_value"] = report_convention(raw).value;
  j["orientation"] = e.reported ? "reported" : "raw";
  j["value"] = e.value;
  if (e.se) {
    j["se"] = *e.se;
    j["ci95"] = {e.ci95->lo, e.ci95->hi};
    j["significant"] = e.significant();
  } else {
    j["se"] = nullptr;
    j["ci95"] = nullptr;
  }
  return j;
}

EffectValue effect_value_from_json(const nlohmann::json& j) {
  EffectValue e;
  e.kind = parse_effect_kind(j.at("kind").get<std::string>());
  e.stage = parse_stage(j.at("stage").get<std::string>());
  e.reported = j.value("orientation", std::string("raw")) == "reported";
  e.value = j.at("value").get<double>();
  if (j.contains("se") && !j["se"].is_null()) {
    e.se = j["se"].get<double>();
    const auto ci = j.at("ci95");
    e.ci95 = Interval{ci.at(0).get<double>(), ci.at(1).get<double>()};
  }
  return e;
}

}  // namespace fga
