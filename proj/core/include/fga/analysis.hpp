#pragma once

// Cross-model analyses of reported effects: stereotype labels, bias
// signatures and their L1 geometry, Ward clustering, the family permutation
// test and stage-wise waterfalls.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/effects.hpp"

namespace fga {

enum class Stereotype { amplify, dampen, reverse };

std::string_view to_string(Stereotype s);

/// Same sign and larger magnitude amplifies, same sign and smaller or equal
/// magnitude dampens, a sign flip reverses. A zero model effect dampens; a
/// zero real effect reverses unless the model effect is also zero.
Stereotype classify_stereotype(double ce_real, double ce_model);

/// The three stages of a signature, in signature order.
inline constexpr StageTriple kSignatureStages[] = {kOutcomeStage, kMediatorStage, kModelStage};

/// Reported effects of one model on one dataset.
struct DatasetSignature {
  std::string dataset;
  /// Reported DE, IE, SE on the real-world data.
  std::array<double, 3> real{};
  /// (DE, IE, SE) at (s0,s0,s1), then (s0,s1,s1), then (s1,s1,s1).
  std::array<double, 9> model{};
};

struct BiasSignature {
  std::string model;
  std::vector<DatasetSignature> datasets;

  /// Concatenation of the per-dataset 9-vectors in dataset order.
  std::vector<double> vector() const;
};

struct StereotypeLabel {
  std::string dataset;
  EffectKind kind = EffectKind::DE;
  StageTriple stage;
  double real = 0.0;
  double model = 0.0;
  Stereotype label = Stereotype::dampen;
  /// The real-world effect is a disadvantage for the comparison group.
  bool disadvantage = false;
};

std::vector<StereotypeLabel> label_signature(const BiasSignature& sig);

enum class SummaryScope { all, disadvantage };

struct StereotypeSummary {
  std::string model;
  std::size_t amplify = 0;
  std::size_t dampen = 0;
  std::size_t reverse = 0;
  std::size_t total() const { return amplify + dampen + reverse; }
  double percent(Stereotype s) const;
};

/// One row per model. `all` counts every effect of the signature; the
/// disadvantage scope keeps effects whose real-world value is positive.
std::vector<StereotypeSummary> stereotype_summary(const std::vector<BiasSignature>& signatures,
                                                  SummaryScope scope = SummaryScope::all);

using Matrix = std::vector<std::vector<double>>;

Matrix l1_matrix(const std::vector<std::vector<double>>& signatures);

enum class WardMode { squared, linear };

/// One agglomeration step. Leaves are 0..n-1; the cluster formed at step k
/// gets id n+k.
struct Merge {
  int a = 0;
  int b = 0;
  double height = 0.0;
  int size = 0;
};

/// Lance-Williams Ward agglomeration of a symmetric dissimilarity matrix.
/// In squared mode the recurrence runs on d^2 and heights are reported on
/// the input scale. Ties go to the pair with the lowest cluster ids.
std::vector<Merge> ward_cluster(const Matrix& d, WardMode mode = WardMode::squared);

struct PermutationResult {
  double observed_mean = 0.0;
  double null_mean = 0.0;
  double p_value = 1.0;
  int n_perm = 0;
  std::size_t within_pairs = 0;
};

/// One-sided test that same-family models are closer than chance.
/// p = (1 + #{null <= observed}) / (N + 1).
PermutationResult family_permutation_test(const Matrix& d, const std::vector<std::string>& families,
                                          int n_perm, std::uint64_t seed);

struct WaterfallBar {
  std::string label;
  double value = 0.0;
  std::optional<double> se;
  std::optional<Interval> band;
  /// Running total before and after this bar (endpoints start at zero).
  double start = 0.0;
  double end = 0.0;
};

struct Waterfall {
  EffectKind kind = EffectKind::DE;
  std::vector<WaterfallBar> bars;
  /// CE^{s1} - (CE^{s0} + T_fY + T_fW + T_fXZ).
  double residual = 0.0;
  bool consistent = true;
};

/// Bars CE^{s0}, T_fY, T_fW, T_fXZ, CE^{s1}. Inputs that do not telescope
/// within `tol` are flagged, never adjusted.
Waterfall waterfall_from_terms(EffectKind kind, const std::array<double, 5>& values,
                               const std::array<std::optional<double>, 5>& ses = {}, double tol = 1e-9);

/// Builds the bars from the four stage effects. Stage terms difference
/// distinct staged datasets, so their variances add.
Waterfall waterfall(const std::map<StageTriple, EffectValue>& effects_by_stage, EffectKind kind,
                    double tol = 1e-9);

nlohmann::json to_json(const Waterfall& w);
nlohmann::json to_json(const std::vector<Merge>& merges);
nlohmann::json to_json(const PermutationResult& r);

}  // namespace fga
