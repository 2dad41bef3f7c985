#pragma once

// Population-level x-specific effects, their S-modified versions and the
// mechanism-replacement decompositions. Internal algebra keeps the defining
// orientation (IE and SE use the reverse transition x1 -> x0); the display
// sign flip lives only in report_convention().

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "fga/scm.hpp"

namespace fga {

enum class EffectKind { DE, IE, SE, TV };

std::string_view to_string(EffectKind k);
EffectKind parse_effect_kind(std::string_view text);

inline constexpr EffectKind kPathwayKinds[] = {EffectKind::DE, EffectKind::IE, EffectKind::SE};

/// Baseline and comparison attribute levels.
struct Transition {
  int x0 = 0;
  int x1 = 1;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct EffectValue {
  EffectKind kind = EffectKind::DE;
  StageTriple stage;
  /// Signed probability difference in the defining orientation.
  double value = 0.0;
  std::optional<double> se;
  std::optional<Interval> ci95;
  /// True once report_convention() has been applied.
  bool reported = false;

  /// Sets se and the normal 95% interval value +- 1.96 se.
  void set_se(double s);
  bool significant() const { return se && std::abs(value) >= 1.96 * *se; }
};

/// The three potential-outcome queries an effect is a difference of:
/// value = E[first] - E[second].
struct EffectQueries {
  PoQuery first;
  PoQuery second;
};

/// DE: (x0,x0,x1) - (x0,x0,x0); IE: (x0,x0,x1) - (x0,x1,x1);
/// SE: (x0,x1,x1) - (x1,x1,x1), all at the given stage. TV has no such form.
EffectQueries effect_queries(EffectKind kind, const StageTriple& stage, Transition t, int y_target);

/// E[Y | x1] - E[Y | x0] in one environment, by joint marginalization.
EffectValue tv(const ScmPair& pair, Env env, Transition t, int y_target);

/// Exact S-modified effect. The stage may be arbitrary here.
EffectValue s_effect(const ScmPair& pair, EffectKind kind, const StageTriple& stage, Transition t,
                     int y_target);

struct Decomposition {
  EffectValue de;
  EffectValue ie;
  EffectValue se;
  EffectValue tv;
  /// tv - (de - ie - se); zero up to rounding.
  double residual() const { return tv.value - (de.value - ie.value - se.value); }
};

/// TV = DE - IE - SE in a single environment.
Decomposition tv_decompose(const ScmPair& pair, Env env, Transition t, int y_target);

struct DeltaDecomposition {
  double d_de = 0.0;
  double d_ie = 0.0;
  double d_se = 0.0;
  double d_tv = 0.0;
  double residual() const { return d_tv - (d_de - d_ie - d_se); }
};

/// Differences CE^{s1,s1,s1} - CE^{s0,s0,s0} of every decomposition term.
DeltaDecomposition delta_tv_decompose(const ScmPair& pair, Transition t, int y_target);

/// Stage-wise replacement terms of one effect:
///   outcome  = CE^{s0,s0,s1} - CE^{s0,s0,s0}   (f_Y replaced)
///   mediator = CE^{s0,s1,s1} - CE^{s0,s0,s1}   (f_W replaced)
///   context  = CE^{s1,s1,s1} - CE^{s0,s1,s1}   (f_{X,Z} replaced)
struct StageTerms {
  double outcome = 0.0;
  double mediator = 0.0;
  double context = 0.0;
  double total = 0.0;
  double residual() const { return total - (outcome + mediator + context); }
};

StageTerms delta_ce_stages(const ScmPair& pair, EffectKind kind, Transition t, int y_target);

/// Generic second-order difference CE^{to} - CE^{from}.
double delta_ce(const ScmPair& pair, EffectKind kind, const StageTriple& from,
                const StageTriple& to, Transition t, int y_target);

/// Display convention: DE unchanged, IE and SE negated so that a positive
/// value always reads as a disadvantage for the x1 group. Idempotent.
EffectValue report_convention(EffectValue e);

/// Positive reported value means the comparison group is disadvantaged.
bool is_disadvantage(const EffectValue& reported);

nlohmann::json to_json(const EffectValue& e);
EffectValue effect_value_from_json(const nlohmann::json& j);

}  // namespace fga
