#pragma once

// Estimation of S-modified potential outcomes and effects from staged
// samples: a smoothed frequency-table plug-in and the cross-fitted one-step
// (doubly robust) estimator with influence-function standard errors.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/effects.hpp"
#include "fga/scm.hpp"

namespace fga {

/// Product-coded rows drawn from one staged distribution.
struct StagedSample {
  Sample rows;
  int nx = 2;
  int nz = 1;
  int nw = 1;
  int ny = 2;
  StageTriple stage;

  std::size_t size() const { return rows.size(); }
  void validate() const;
};

StagedSample make_staged_sample(const Levels& levels, Sample rows, const StageTriple& stage);

/// Counts over the (x, z, w, y) cells.
class CellCounts {
 public:
  CellCounts(int nx, int nz, int nw, int ny);
  static CellCounts from_rows(const StagedSample& data);
  static CellCounts from_rows(const StagedSample& data, std::span<const std::size_t> rows);

  double& at(int x, int z, int w, int y) { return c_[index(x, z, w, y)]; }
  double at(int x, int z, int w, int y) const { return c_[index(x, z, w, y)]; }
  std::vector<double>& raw() { return c_; }
  const std::vector<double>& raw() const { return c_; }

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  int nw() const { return nw_; }
  int ny() const { return ny_; }
  double total() const;

 private:
  std::size_t index(int x, int z, int w, int y) const {
    return ((static_cast<std::size_t>(x) * nz_ + z) * nw_ + w) * ny_ + y;
  }
  int nx_, nz_, nw_, ny_;
  std::vector<double> c_;
};

/// Nuisance functions for one query, evaluated at the query's fixed
/// attribute values.
class NuisanceModel {
 public:
  virtual ~NuisanceModel() = default;
  /// mu(x_y, z, w) = E[1{Y = y_target} | x_y, z, w].
  virtual double mu(int z, int w) const = 0;
  /// eta(z) = E[mu(x_y, z, W) | x_w, z].
  virtual double eta(int z) const = 0;
  virtual double prop_x_given_z(int x, int z) const = 0;
  virtual double prop_x_given_zw(int x, int z, int w) const = 0;
};

/// Fits a NuisanceModel on a subset of rows. Alternative regression
/// learners plug in here.
class NuisanceFitter {
 public:
  virtual ~NuisanceFitter() = default;
  virtual std::unique_ptr<NuisanceModel> fit(const StagedSample& data,
                                             std::span<const std::size_t> rows,
                                             const PoQuery& q) const = 0;
  virtual std::string name() const = 0;
};

/// Saturated frequency tables. Categorical conditionals (P(x|z), P(x|z,w),
/// P(w|x,z), P(z|x)) are Laplace-smoothed with `alpha`; outcome means are raw
/// cell means, falling back to the (x, z) and then x stratum when a cell is
/// empty.
class FrequencyFitter final : public NuisanceFitter {
 public:
  explicit FrequencyFitter(double alpha = 0.5) : alpha_(alpha) {}
  std::unique_ptr<NuisanceModel> fit(const StagedSample& data, std::span<const std::size_t> rows,
                                     const PoQuery& q) const override;
  std::unique_ptr<NuisanceModel> fit_counts(const CellCounts& counts, const PoQuery& q) const;
  std::string name() const override { return "frequency"; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

/// Nuisance values needed by the influence term at one row.
struct NuisanceValues {
  double mu = 0.0;             // mu(x_y, Z, W)
  double eta = 0.0;            // E[mu(x_y, Z, W) | x_w, Z]
  double p_xz = 0.0;           // P~(x_z)
  double p_xz_given_z = 0.0;   // P~(x_z | Z)
  double p_xw_given_z = 0.0;   // P~(x_w | Z)
  double p_xw_given_zw = 0.0;  // P~(x_w | Z, W)
  double p_xy_given_zw = 0.0;  // P~(x_y | Z, W)
};

/// Evaluates a model at one (z, w) cell; p_xz is supplied separately.
NuisanceValues evaluate(const NuisanceModel& m, const PoQuery& q, int z, int w, double p_xz);

/// Cross-fitted per-row nuisance evaluations.
struct NuisanceSet {
  std::vector<NuisanceValues> rows;
  std::vector<int> fold_of_row;
  int folds = 0;
  std::uint64_t seed = 0;
  std::string fitter;
};

/// One-step influence term f(X, Z, W, Y) for a single row.
///   1{X=x_y}/P(x_z) * P(x_z|Z)/P(x_w|Z) * P(x_w|Z,W)/P(x_y|Z,W) * (Y - mu)
/// + 1{X=x_w}/P(x_z) * P(x_z|Z)/P(x_w|Z) * (mu - eta)
/// + 1{X=x_z}/P(x_z) * eta
/// Throws EstimationError on a nonpositive propensity.
double influence_term(const PoQuery& q, int x, double y_indicator, const NuisanceValues& nv);

/// Deterministic fold labels: a seeded shuffle of round-robin labels.
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed);

NuisanceSet fit_nuisances(const StagedSample& data, const PoQuery& q, int folds, std::uint64_t seed,
                          const NuisanceFitter& fitter);
NuisanceSet fit_nuisances(const StagedSample& data, const PoQuery& q, int folds, std::uint64_t seed);

struct EstimateWithIF {
  double theta_hat = 0.0;
  /// Per-row influence values whose mean is theta_hat. Empty for estimators
  /// whose standard error comes from resampling.
  std::vector<double> if_values;
  double se = 0.0;
  Interval ci95;
  std::size_t n = 0;
  std::string estimator;
  nlohmann::json provenance;
};

/// Averages the influence term over rows. The variance uses the influence
/// function of the functional, which adds the centering term
/// -theta * (1{X=x_z}/P(x_z) - 1) for the estimated marginal P(x_z); its
/// mean is still theta_hat.
EstimateWithIF estimate_dr(const StagedSample& data, const PoQuery& q, const NuisanceSet& nuisances);

struct EstimatorOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  double alpha = 0.5;
  int bootstrap = 200;
  /// Null selects FrequencyFitter(alpha).
  const NuisanceFitter* fitter = nullptr;
};

/// Smoothed frequency-table value of the identification formula; se from a
/// multinomial bootstrap over cell counts.
EstimateWithIF estimate_plugin(const StagedSample& data, const PoQuery& q,
                               const EstimatorOptions& opts = {});

/// Plug-in value computed directly from counts (no standard error).
double plugin_value(const CellCounts& counts, const PoQuery& q, double alpha);

/// fit_nuisances + estimate_dr.
EstimateWithIF estimate_po(const StagedSample& data, const PoQuery& q,
                           const EstimatorOptions& opts = {});

using StageDatasets = std::map<StageTriple, StagedSample>;

struct EffectEstimate {
  EffectValue effect;
  /// Row-wise IF of the effect when all terms share one dataset.
  std::vector<double> if_values;
  nlohmann::json provenance;
};

/// CE at one stage from the dataset carrying that stage. Terms share the
/// dataset, so the IF of the effect is the row-wise difference of IFs.
EffectEstimate estimate_effect(const StageDatasets& datasets, EffectKind kind,
                               const StageTriple& stage, Transition t, int y_target,
                               const EstimatorOptions& opts = {});

/// CE^{to} - CE^{from}. Distinct staged datasets are independent draws, so
/// their variances add.
EffectEstimate estimate_delta(const StageDatasets& datasets, EffectKind kind,
                              const StageTriple& from, const StageTriple& to, Transition t,
                              int y_target, const EstimatorOptions& opts = {});

double sample_sd(std::span<const double> v);

nlohmann::json to_json(const EstimateWithIF& e);

}  // namespace fga
