#include "fga/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fga {
namespace {

std::string cell_name(const char* var, int v) { return std::string(var) + "=" + std::to_string(v); }

void require_stage_match(const StagedSample& data, const PoQuery& q) {
  if (data.stage != q.stage) {
    throw EstimationError("stage mismatch: dataset is " + to_string(data.stage) + ", query is " +
                          to_string(q.stage));
  }
}

void require_query_in_range(const StagedSample& data, const PoQuery& q) {
  auto bad = [&](int v, int n) { return v < 0 || v >= n; };
  if (bad(q.x_z, data.nx) || bad(q.x_w, data.nx) || bad(q.x_y, data.nx) || bad(q.y_target, data.ny)) {
    throw ValidationError("query level out of range for dataset");
  }
}

// Aggregated counts with the marginals the frequency model needs.
struct Margins {
  int nx, nz, nw;
  std::vector<double> xzw;   // n(x, z, w)
  std::vector<double> xzwy;  // n(x, z, w, Y = target)

  Margins(const CellCounts& c, int y_target)
      : nx(c.nx()), nz(c.nz()), nw(c.nw()),
        xzw(static_cast<std::size_t>(nx * nz * nw), 0.0),
        xzwy(static_cast<std::size_t>(nx * nz * nw), 0.0) {
    for (int x = 0; x < nx; ++x) {
      for (int z = 0; z < nz; ++z) {
        for (int w = 0; w < nw; ++w) {
          double tot = 0.0;
          for (int y = 0; y < c.ny(); ++y) tot += c.at(x, z, w, y);
          xzw[idx(x, z, w)] = tot;
          xzwy[idx(x, z, w)] = c.at(x, z, w, y_target);
        }
      }
    }
  }
  std::size_t idx(int x, int z, int w) const {
    return (static_cast<std::size_t>(x) * nz + z) * nw + w;
  }
  double n_xzw(int x, int z, int w) const { return xzw[idx(x, z, w)]; }
  double n_xz(int x, int z) const {
    double s = 0.0;
    for (int w = 0; w < nw; ++w) s += n_xzw(x, z, w);
    return s;
  }
  double n_x(int x) const {
    double s = 0.0;
    for (int z = 0; z < nz; ++z) s += n_xz(x, z);
    return s;
  }
  double n_z(int z) const {
    double s = 0.0;
    for (int x = 0; x < nx; ++x) s += n_xz(x, z);
    return s;
  }
  double n_zw(int z, int w) const {
    double s = 0.0;
    for (int x = 0; x < nx; ++x) s += n_xzw(x, z, w);
    return s;
  }
  double y_xzw(int x, int z, int w) const { return xzwy[idx(x, z, w)]; }
  double y_xz(int x, int z) const {
    double s = 0.0;
    for (int w = 0; w < nw; ++w) s += y_xzw(x, z, w);
    return s;
  }
  double y_x(int x) const {
    double s = 0.0;
    for (int z = 0; z < nz; ++z) s += y_xz(x, z);
    return s;
  }

  // Raw cell mean with the (x,z,w) -> (x,z) -> x fallback.
  double mu(int x, int z, int w) const {
    if (n_xzw(x, z, w) > 0) return y_xzw(x, z, w) / n_xzw(x, z, w);
    if (n_xz(x, z) > 0) return y_xz(x, z) / n_xz(x, z);
    if (n_x(x) > 0) return y_x(x) / n_x(x);
    throw EstimationError("no rows with " + cell_name("X", x) + " to fit the outcome mean");
  }

  double w_given_xz(int w, int x, int z, double alpha) const {
    const double den = n_xz(x, z) + alpha * nw;
    if (den <= 0) {
      throw EstimationError("empty conditioning cell " + cell_name("X", x) + ", " + cell_name("Z", z) +
                            " for P(w | x, z)");
    }
    return (n_xzw(x, z, w) + alpha) / den;
  }
};

class FrequencyModel final : public NuisanceModel {
 public:
  FrequencyModel(const CellCounts& counts, const PoQuery& q, double alpha)
      : m_(counts, q.y_target), q_(q), alpha_(alpha), eta_(static_cast<std::size_t>(counts.nz()), 0.0),
        mu_(static_cast<std::size_t>(counts.nz() * counts.nw()), 0.0) {
    for (int z = 0; z < m_.nz; ++z) {
      for (int w = 0; w < m_.nw; ++w) mu_[static_cast<std::size_t>(z * m_.nw + w)] = m_.mu(q.x_y, z, w);
    }
    for (int z = 0; z < m_.nz; ++z) {
      if (m_.n_xz(q.x_w, z) + alpha * m_.nw <= 0) {
        eta_[static_cast<std::size_t>(z)] = std::nan("");
        continue;
      }
      double s = 0.0;
      for (int w = 0; w < m_.nw; ++w) s += mu(z, w) * m_.w_given_xz(w, q.x_w, z, alpha);
      eta_[static_cast<std::size_t>(z)] = s;
    }
  }

  double mu(int z, int w) const override { return mu_[static_cast<std::size_t>(z * m_.nw + w)]; }
  double eta(int z) const override {
    const double e = eta_[static_cast<std::size_t>(z)];
    if (std::isnan(e)) {
      throw EstimationError("empty conditioning cell " + cell_name("X", q_.x_w) + ", " + cell_name("Z", z) +
                            " for P(w | x, z)");
    }
    return e;
  }
  double prop_x_given_z(int x, int z) const override {
    const double den = m_.n_z(z) + alpha_ * m_.nx;
    if (den <= 0) throw EstimationError("empty conditioning cell " + cell_name("Z", z) + " for P(x | z)");
    return (m_.n_xz(x, z) + alpha_) / den;
  }
  double prop_x_given_zw(int x, int z, int w) const override {
    const double den = m_.n_zw(z, w) + alpha_ * m_.nx;
    if (den <= 0) {
      throw EstimationError("empty conditioning cell " + cell_name("Z", z) + ", " + cell_name("W", w) +
                            " for P(x | z, w)");
    }
    return (m_.n_xzw(x, z, w) + alpha_) / den;
  }

 private:
  Margins m_;
  PoQuery q_;
  double alpha_;
  std::vector<double> eta_;
  std::vector<double> mu_;
};

void check_positive(double p, const char* what, const PoQuery& q, int z, int w) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    std::ostringstream os;
    os << "nonpositive propensity " << what << " = " << p << " in stratum Z=" << z << ", W=" << w
       << " (x_z=" << q.x_z << ", x_w=" << q.x_w << ", x_y=" << q.x_y << ")";
    throw EstimationError(os.str());
  }
}

nlohmann::json query_json(const PoQuery& q) {
  return {{"x_z", q.x_z}, {"x_w", q.x_w}, {"x_y", q.x_y}, {"stage", to_string(q.stage)},
          {"y_target", q.y_target}};
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

const StagedSample& dataset_for(const StageDatasets& datasets, const StageTriple& stage) {
  require_monotone(stage);
  auto it = datasets.find(stage);
  if (it == datasets.end()) throw EstimationError("missing staged dataset for stage " + to_string(stage));
  return it->second;
}

}  // namespace

void StagedSample::validate() const {
  const std::size_t n = rows.x.size();
  if (rows.z.size() != n || rows.w.size() != n || rows.y.size() != n) {
    throw ValidationError("staged sample columns have different lengths");
  }
  auto check = [&](const std::vector<int>& col, int levels, const char* name) {
    for (std::size_t i = 0; i < n; ++i) {
      if (col[i] < 0 || col[i] >= levels) {
        throw ValidationError(std::string("row ") + std::to_string(i) + ": " + name + " code " +
                              std::to_string(col[i]) + " out of range");
      }
    }
  };
  check(rows.x, nx, "X");
  check(rows.z, nz, "Z");
  check(rows.w, nw, "W");
  check(rows.y, ny, "Y");
}

StagedSample make_staged_sample(const Levels& levels, Sample rows, const StageTriple& stage) {
  StagedSample s{std::move(rows), levels.nx(), levels.nz(), levels.nw(), levels.ny(), stage};
  s.validate();
  return s;
}

CellCounts::CellCounts(int nx, int nz, int nw, int ny)
    : nx_(nx), nz_(nz), nw_(nw), ny_(ny), c_(static_cast<std::size_t>(nx * nz * nw * ny), 0.0) {}

CellCounts CellCounts::from_rows(const StagedSample& data) {
  CellCounts c(data.nx, data.nz, data.nw, data.ny);
  for (std::size_t i = 0; i < data.size(); ++i) {
    c.at(data.rows.x[i], data.rows.z[i], data.rows.w[i], data.rows.y[i]) += 1.0;
  }
  return c;
}

CellCounts CellCounts::from_rows(const StagedSample& data, std::span<const std::size_t> rows) {
  CellCounts c(data.nx, data.nz, data.nw, data.ny);
  for (std::size_t i : rows) c.at(data.rows.x[i], data.rows.z[i], data.rows.w[i], data.rows.y[i]) += 1.0;
  return c;
}

double CellCounts::total() const { return std::accumulate(c_.begin(), c_.end(), 0.0); }

std::unique_ptr<NuisanceModel> FrequencyFitter::fit(const StagedSample& data,
                                                    std::span<const std::size_t> rows,
                                                    const PoQuery& q) const {
  return fit_counts(CellCounts::from_rows(data, rows), q);
}

std::unique_ptr<NuisanceModel> FrequencyFitter::fit_counts(const CellCounts& counts,
                                                           const PoQuery& q) const {
  return std::make_unique<FrequencyModel>(counts, q, alpha_);
}

NuisanceValues evaluate(const NuisanceModel& m, const PoQuery& q, int z, int w, double p_xz) {
  NuisanceValues v;
  v.mu = m.mu(z, w);
  v.eta = m.eta(z);
  v.p_xz = p_xz;
  v.p_xz_given_z = m.prop_x_given_z(q.x_z, z);
  v.p_xw_given_z = m.prop_x_given_z(q.x_w, z);
  v.p_xw_given_zw = m.prop_x_given_zw(q.x_w, z, w);
  v.p_xy_given_zw = m.prop_x_given_zw(q.x_y, z, w);
  return v;
}

double influence_term(const PoQuery& q, int x, double y_indicator, const NuisanceValues& nv) {
  if (!(nv.p_xz > 0) || !(nv.p_xw_given_z > 0) || !(nv.p_xy_given_zw > 0)) {
    throw EstimationError("nonpositive propensity in influence term");
  }
  const double base = nv.p_xz_given_z / nv.p_xw_given_z / nv.p_xz;
  double f = 0.0;
  if (x == q.x_y) f += base * nv.p_xw_given_zw / nv.p_xy_given_zw * (y_indicator - nv.mu);
  if (x == q.x_w) f += base * (nv.mu - nv.eta);
  if (x == q.x_z) f += nv.eta / nv.p_xz;
  return f;
}

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-fitting needs at least 2 folds");
  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = static_cast<int>(i % static_cast<std::size_t>(folds));
  Rng rng = make_stream(seed, 0x666f6c6473ULL);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(label[i - 1], label[j]);
  }
  return label;
}

NuisanceSet fit_nuisances(const StagedSample& data, const PoQuery& q, int folds, std::uint64_t seed,
                          const NuisanceFitter& fitter) {
  require_stage_match(data, q);
  require_query_in_range(data, q);
  const std::size_t n = data.size();
  if (n < static_cast<std::size_t>(folds)) {
    throw EstimationError("fold too small: " + std::to_string(n) + " rows for " + std::to_string(folds) +
                          " folds");
  }
  NuisanceSet out;
  out.folds = folds;
  out.seed = seed;
  out.fitter = fitter.name();
  out.fold_of_row = assign_folds(n, folds, seed);
  out.rows.resize(n);

  const double n_xz = static_cast<double>(std::count(data.rows.x.begin(), data.rows.x.end(), q.x_z));
  if (n_xz <= 0) throw EstimationError("no rows with " + cell_name("X", q.x_z));
  const double p_xz = n_xz / static_cast<double>(n);

  for (int k = 0; k < folds; ++k) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    train.reserve(n);
    for (std::size_t i = 0; i < n; ++i) (out.fold_of_row[i] == k ? test : train).push_back(i);
    std::unique_ptr<NuisanceModel> model;
    try {
      model = fitter.fit(data, train, q);
    } catch (const EstimationError& e) {
      throw EstimationError("fold " + std::to_string(k) + ": " + e.what());
    }
    // Rows sharing (z, w) share nuisance values; evaluate each stratum once.
    std::vector<std::optional<NuisanceValues>> cache(static_cast<std::size_t>(data.nz * data.nw));
    for (std::size_t i : test) {
      const int z = data.rows.z[i];
      const int w = data.rows.w[i];
      auto& slot = cache[static_cast<std::size_t>(z * data.nw + w)];
      if (!slot) {
        try {
          slot = evaluate(*model, q, z, w, p_xz);
        } catch (const EstimationError& e) {
          throw EstimationError("fold " + std::to_string(k) + ": " + e.what());
        }
      }
      out.rows[i] = *slot;
    }
  }
  return out;
}

NuisanceSet fit_nuisances(const StagedSample& data, const PoQuery& q, int folds, std::uint64_t seed) {
  return fit_nuisances(data, q, folds, seed, FrequencyFitter{});
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

EstimateWithIF estimate_dr(const StagedSample& data, const PoQuery& q, const NuisanceSet& nuisances) {
  require_stage_match(data, q);
  const std::size_t n = data.size();
  if (nuisances.rows.size() != n) throw EstimationError("nuisance set does not match dataset size");
  if (n == 0) throw EstimationError("empty dataset");

  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const NuisanceValues& nv = nuisances.rows[i];
    const int z = data.rows.z[i];
    const int w = data.rows.w[i];
    check_positive(nv.p_xz, "P(x_z)", q, z, w);
    check_positive(nv.p_xw_given_z, "P(x_w | z)", q, z, w);
    check_positive(nv.p_xy_given_zw, "P(x_y | z, w)", q, z, w);
    f[i] = influence_term(q, data.rows.x[i], data.rows.y[i] == q.y_target ? 1.0 : 0.0, nv);
  }

  EstimateWithIF out;
  out.theta_hat = mean(f);
  out.if_values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ind = data.rows.x[i] == q.x_z ? 1.0 : 0.0;
    out.if_values[i] = f[i] - out.theta_hat * (ind / nuisances.rows[i].p_xz - 1.0);
  }
  out.n = n;
  out.se = sample_sd(out.if_values) / std::sqrt(static_cast<double>(n));
  out.ci95 = Interval{out.theta_hat - 1.96 * out.se, out.theta_hat + 1.96 * out.se};
  out.estimator = "dr";
  out.provenance = {{"query", query_json(q)},
                    {"estimator", "dr"},
                    {"n", n},
                    {"folds", nuisances.folds},
                    {"seed", nuisances.seed},
                    {"fitter", nuisances.fitter}};
  return out;
}

double plugin_value(const CellCounts& counts, const PoQuery& q, double alpha) {
  const Margins m(counts, q.y_target);
  const double nx = m.n_x(q.x_z);
  const double den_z = nx + alpha * m.nz;
  if (den_z <= 0) throw EstimationError("empty conditioning cell " + cell_name("X", q.x_z) + " for P(z | x)");
  double theta = 0.0;
  for (int z = 0; z < m.nz; ++z) {
    const double pz = (m.n_xz(q.x_z, z) + alpha) / den_z;
    if (pz == 0.0) continue;
    double inner = 0.0;
    for (int w = 0; w < m.nw; ++w) {
      const double pw = m.w_given_xz(w, q.x_w, z, alpha);
      if (pw == 0.0) continue;
      inner += pw * m.mu(q.x_y, z, w);
    }
    theta += pz * inner;
  }
  return theta;
}

EstimateWithIF estimate_plugin(const StagedSample& data, const PoQuery& q, const EstimatorOptions& opts) {
  require_stage_match(data, q);
  require_query_in_range(data, q);
  if (data.size() == 0) throw EstimationError("empty dataset");
  const CellCounts counts = CellCounts::from_rows(data);
  EstimateWithIF out;
  out.theta_hat = plugin_value(counts, q, opts.alpha);
  out.n = data.size();
  out.estimator = "plugin";

  // Resampling n rows with replacement is a multinomial draw over cells.
  const auto n = static_cast<std::uint64_t>(data.size());
  const std::vector<double>& p = counts.raw();
  std::vector<double> boot;
  boot.reserve(static_cast<std::size_t>(std::max(opts.bootstrap, 0)));
  for (int b = 0; b < opts.bootstrap; ++b) {
    Rng rng = make_stream(opts.seed, 0x626f6f74ULL + static_cast<std::uint64_t>(b));
    CellCounts rc(counts.nx(), counts.nz(), counts.nw(), counts.ny());
    std::uint64_t left = n;
    double mass = static_cast<double>(n);
    for (std::size_t k = 0; k < p.size() && left > 0; ++k) {
      if (p[k] <= 0) continue;
      const double prob = std::min(1.0, p[k] / mass);
      std::binomial_distribution<std::uint64_t> draw(left, prob);
      const std::uint64_t c = prob >= 1.0 ? left : draw(rng);
      rc.raw()[k] = static_cast<double>(c);
      left -= c;
      mass -= p[k];
    }
    try {
      boot.push_back(plugin_value(rc, q, opts.alpha));
    } catch (const EstimationError&) {
      // A resample that empties a required stratum carries no information.
    }
  }
  out.se = boot.size() >= 2 ? sample_sd(boot) : 0.0;
  out.ci95 = Interval{out.theta_hat - 1.96 * out.se, out.theta_hat + 1.96 * out.se};
  out.provenance = {{"query", query_json(q)},          {"estimator", "plugin"},
                    {"n", out.n},                      {"alpha", opts.alpha},
                    {"bootstrap", opts.bootstrap},     {"bootstrap_used", boot.size()},
                    {"seed", opts.seed}};
  return out;
}

EstimateWithIF estimate_po(const StagedSample& data, const PoQuery& q, const EstimatorOptions& opts) {
  const FrequencyFitter fallback(opts.alpha);
  const NuisanceFitter& fitter = opts.fitter ? *opts.fitter : fallback;
  const NuisanceSet ns = fit_nuisances(data, q, opts.folds, opts.seed, fitter);
  EstimateWithIF e = estimate_dr(data, q, ns);
  e.provenance["alpha"] = opts.alpha;
  return e;
}

namespace {

EffectEstimate tv_estimate(const StagedSample& data, Transition t, int y_target) {
  const std::size_t n = data.size();
  double n0 = 0, n1 = 0, y0 = 0, y1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = data.rows.y[i] == y_target ? 1.0 : 0.0;
    if (data.rows.x[i] == t.x0) n0 += 1, y0 += y;
    if (data.rows.x[i] == t.x1) n1 += 1, y1 += y;
  }
  if (n0 == 0 || n1 == 0) throw EstimationError("TV needs rows at both attribute levels");
  const double m0 = y0 / n0, m1 = y1 / n1;
  const double p0 = n0 / static_cast<double>(n), p1 = n1 / static_cast<double>(n);
  EffectEstimate out;
  out.effect.kind = EffectKind::TV;
  out.effect.stage = data.stage;
  out.effect.value = m1 - m0;
  out.if_values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = data.rows.y[i] == y_target ? 1.0 : 0.0;
    double v = out.effect.value;
    if (data.rows.x[i] == t.x1) v += (y - m1) / p1;
    if (data.rows.x[i] == t.x0) v -= (y - m0) / p0;
    out.if_values[i] = v;
  }
  out.effect.set_se(sample_sd(out.if_values) / std::sqrt(static_cast<double>(n)));
  return out;
}

}  // namespace

EffectEstimate estimate_effect(const StageDatasets& datasets, EffectKind kind, const StageTriple& stage,
                               Transition t, int y_target, const EstimatorOptions& opts) {
  const StagedSample& data = dataset_for(datasets, stage);
  EffectEstimate out;
  if (kind == EffectKind::TV) {
    if (stage.z != stage.w || stage.w != stage.y) {
      throw ValidationError("TV is only defined for a constant stage");
    }
    out = tv_estimate(data, t, y_target);
  } else {
    const EffectQueries qs = effect_queries(kind, stage, t, y_target);
    const EstimateWithIF a = estimate_po(data, qs.first, opts);
    const EstimateWithIF b = estimate_po(data, qs.second, opts);
    out.effect.kind = kind;
    out.effect.stage = stage;
    out.effect.value = a.theta_hat - b.theta_hat;
    out.if_values.resize(a.if_values.size());
    for (std::size_t i = 0; i < a.if_values.size(); ++i) out.if_values[i] = a.if_values[i] - b.if_values[i];
    out.effect.set_se(sample_sd(out.if_values) / std::sqrt(static_cast<double>(data.size())));
    out.provenance["terms"] = {to_json(a), to_json(b)};
  }
  out.provenance["kind"] = std::string(to_string(kind));
  out.provenance["stage"] = to_string(stage);
  out.provenance["estimator"] = kind == EffectKind::TV ? "difference-in-means" : "dr";
  out.provenance["n"] = data.size();
  out.provenance["folds"] = opts.folds;
  out.provenance["seed"] = opts.seed;
  out.provenance["alpha"] = opts.alpha;
  out.provenance["variance_rule"] = "row-wise IF difference on a shared dataset";
  return out;
}

EffectEstimate estimate_delta(const StageDatasets& datasets, EffectKind kind, const StageTriple& from,
                              const StageTriple& to, Transition t, int y_target,
                              const EstimatorOptions& opts) {
  const EffectEstimate a = estimate_effect(datasets, kind, to, t, y_target, opts);
  EffectEstimate out;
  out.effect.kind = kind;
  out.effect.stage = to;
  if (from == to) {
    out.effect.value = 0.0;
    out.effect.set_se(0.0);
    out.provenance = {{"from", to_string(from)}, {"to", to_string(to)}, {"variance_rule", "identical stage"}};
    return out;
  }
  const EffectEstimate b = estimate_effect(datasets, kind, from, t, y_target, opts);
  out.effect.value = a.effect.value - b.effect.value;
  out.effect.set_se(std::hypot(*a.effect.se, *b.effect.se));
  out.provenance = {{"from", to_string(from)},
                    {"to", to_string(to)},
                    {"kind", std::string(to_string(kind))},
                    {"variance_rule", "independent staged datasets: variances add"},
                    {"terms", {a.provenance, b.provenance}}};
  return out;
}

nlohmann::json to_json(const EstimateWithIF& e) {
  nlohmann::json j = e.provenance;
  j["theta_hat"] = e.theta_hat;
  j["se"] = e.se;
  j["ci95"] = {e.ci95.lo, e.ci95.hi};
  j["n"] = e.n;
  j["estimator"] = e.estimator;
  return j;
}

}  // namespace fga
