#include "fga/scm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fga {
namespace {

constexpr double kNoiseSumTolerance = 1e-12;

void check_noise(const std::vector<double>& p, const char* name) {
  if (p.empty()) throw ValidationError(std::string(name) + ": empty noise support");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(name) + ": probabilities must be finite and nonnegative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kNoiseSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << name << ": probabilities sum to " << total << ", expected 1";
    throw ValidationError(msg.str());
  }
}

// Inverse-CDF sampler over a finite support.
class Categorical {
 public:
  explicit Categorical(const std::vector<double>& p) : cum_(p.size()) {
    std::partial_sum(p.begin(), p.end(), cum_.begin());
    last_positive_ = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0) last_positive_ = i;
    }
  }
  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng) * cum_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    if (it == cum_.end()) return last_positive_;
    return static_cast<std::size_t>(it - cum_.begin());
  }

 private:
  std::vector<double> cum_;
  std::size_t last_positive_ = 0;
};

Sample sample_blocks(const ScmEnvironment& exz, const ScmEnvironment& ew,
                     const ScmEnvironment& ey, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample size must be at least 1");
  Rng rng(seed);
  const Categorical uxz(exz.noise_xz);
  const Categorical uw(ew.noise_w);
  const Categorical uy(ey.noise_y);
  Sample out;
  out.x.resize(n);
  out.z.resize(n);
  out.w.resize(n);
  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const XZ xz = exz.xz(uxz(rng));
    const int w = ew.w(xz.x, xz.z, uw(rng));
    const int y = ey.y(xz.x, xz.z, w, uy(rng));
    out.x[i] = xz.x;
    out.z[i] = xz.z;
    out.w[i] = w;
    out.y[i] = y;
  }
  return out;
}

std::string cell_name(const Levels& l, int x, int z) {
  return "(x=" + l.x[static_cast<std::size_t>(x)] + ", z=" + l.z[static_cast<std::size_t>(z)] + ")";
}

}  // namespace

ScmEnvironment ScmEnvironment::shaped(const Levels& levels, std::size_t n_uxz, std::size_t n_uw,
                                      std::size_t n_uy) {
  ScmEnvironment env;
  env.nz_ = static_cast<std::size_t>(levels.nz());
  env.nw_ = static_cast<std::size_t>(levels.nw());
  env.noise_xz.assign(n_uxz, n_uxz ? 1.0 / static_cast<double>(n_uxz) : 0.0);
  env.noise_w.assign(n_uw, n_uw ? 1.0 / static_cast<double>(n_uw) : 0.0);
  env.noise_y.assign(n_uy, n_uy ? 1.0 / static_cast<double>(n_uy) : 0.0);
  env.mech_xz.assign(n_uxz, XZ{});
  env.mech_w.assign(static_cast<std::size_t>(levels.nx()) * env.nz_ * n_uw, 0);
  env.mech_y.assign(static_cast<std::size_t>(levels.nx()) * env.nz_ * env.nw_ * n_uy, 0);
  return env;
}

void ScmEnvironment::validate(const Levels& levels) const {
  if (levels.nx() < 1 || levels.nz() < 1 || levels.nw() < 1 || levels.ny() < 1) {
    throw ValidationError("every block needs at least one level");
  }
  check_noise(noise_xz, "noise_xz");
  check_noise(noise_w, "noise_w");
  check_noise(noise_y, "noise_y");
  if (nz_ != static_cast<std::size_t>(levels.nz()) || nw_ != static_cast<std::size_t>(levels.nw())) {
    throw ValidationError("environment tables were shaped for different level lists");
  }
  if (mech_xz.size() != noise_xz.size()) {
    throw ValidationError("mech_xz must map every u_xz state");
  }
  for (const XZ& v : mech_xz) {
    if (v.x < 0 || v.x >= levels.nx() || v.z < 0 || v.z >= levels.nz()) {
      throw ValidationError("mech_xz produces an undeclared level");
    }
  }
  const std::size_t nx = static_cast<std::size_t>(levels.nx());
  if (mech_w.size() != nx * nz_ * noise_w.size()) {
    throw ValidationError("mech_w is not total over (x, z, u_w)");
  }
  if (mech_y.size() != nx * nz_ * nw_ * noise_y.size()) {
    throw ValidationError("mech_y is not total over (x, z, w, u_y)");
  }
  for (int v : mech_w) {
    if (v < 0 || v >= levels.nw()) throw ValidationError("mech_w produces an undeclared level");
  }
  for (int v : mech_y) {
    if (v < 0 || v >= levels.ny()) throw ValidationError("mech_y produces an undeclared level");
  }
}

void ScmEnvironment::check_positivity(const Levels& levels) const {
  std::vector<double> cell(static_cast<std::size_t>(levels.nx() * levels.nz()), 0.0);
  for (std::size_t u = 0; u < noise_xz.size(); ++u) {
    cell[static_cast<std::size_t>(mech_xz[u].x * levels.nz() + mech_xz[u].z)] += noise_xz[u];
  }
  for (int x = 0; x < levels.nx(); ++x) {
    for (int z = 0; z < levels.nz(); ++z) {
      if (!(cell[static_cast<std::size_t>(x * levels.nz() + z)] > 0.0)) {
        throw ValidationError("strict positivity violated: zero probability at " +
                              cell_name(levels, x, z));
      }
    }
  }
}

void ScmPair::validate() const {
  if (!(mix_p >= 0.0 && mix_p <= 1.0)) throw ValidationError("mix_p must lie in [0, 1]");
  rw.validate(levels);
  gm.validate(levels);
  rw.check_positivity(levels);
  gm.check_positivity(levels);
}

void validate_query(const Levels& levels, const PoQuery& q) {
  auto in_x = [&](int v) { return v >= 0 && v < levels.nx(); };
  if (!in_x(q.x_z) || !in_x(q.x_w) || !in_x(q.x_y)) {
    throw ValidationError("query attribute value is not a declared X level");
  }
  if (q.y_target < 0 || q.y_target >= levels.ny()) {
    throw ValidationError("query y_target is not a declared Y level");
  }
}

double eval_po_exact(const ScmPair& pair, const PoQuery& q) {
  validate_query(pair.levels, q);
  const ScmEnvironment& exz = pair.env(q.stage.z);
  const ScmEnvironment& ew = pair.env(q.stage.w);
  const ScmEnvironment& ey = pair.env(q.stage.y);

  double mass = 0.0;
  double hit = 0.0;
  for (std::size_t uxz = 0; uxz < exz.noise_xz.size(); ++uxz) {
    const XZ unit = exz.xz(uxz);
    if (unit.x != q.x_z) continue;
    const double p_xz = exz.noise_xz[uxz];
    mass += p_xz;
    double inner = 0.0;
    for (std::size_t uw = 0; uw < ew.noise_w.size(); ++uw) {
      const int w = ew.w(q.x_w, unit.z, uw);
      double p_y = 0.0;
      for (std::size_t uy = 0; uy < ey.noise_y.size(); ++uy) {
        if (ey.y(q.x_y, unit.z, w, uy) == q.y_target) p_y += ey.noise_y[uy];
      }
      inner += ew.noise_w[uw] * p_y;
    }
    hit += p_xz * inner;
  }
  if (!(mass > 0.0)) {
    throw UnsupportedConditioning("unsupported conditioning: P(X = " +
                                  pair.levels.x[static_cast<std::size_t>(q.x_z)] +
                                  ") = 0 in environment " + std::string(to_string(q.stage.z)));
  }
  return hit / mass;
}

double eval_po_idformula(const ScmPair& pair, const PoQuery& q) {
  validate_query(pair.levels, q);
  const JointTable jz(pair.levels, pair.env(q.stage.z));
  const JointTable jw(pair.levels, pair.env(q.stage.w));
  const JointTable jy(pair.levels, pair.env(q.stage.y));
  double total = 0.0;
  for (int z = 0; z < pair.levels.nz(); ++z) {
    const double pz = jz.z_given_x(z, q.x_z);
    if (pz == 0.0) continue;
    for (int w = 0; w < pair.levels.nw(); ++w) {
      const double pw = jw.w_given_xz(w, q.x_w, z);
      if (pw == 0.0) continue;
      total += jy.y_given_xzw(q.y_target, q.x_y, z, w) * pw * pz;
    }
  }
  return total;
}

JointTable::JointTable(const Levels& levels, const ScmEnvironment& env)
    : levels_(levels),
      p_(static_cast<std::size_t>(levels.nx() * levels.nz() * levels.nw() * levels.ny()), 0.0) {
  for (std::size_t uxz = 0; uxz < env.noise_xz.size(); ++uxz) {
    const XZ unit = env.xz(uxz);
    for (std::size_t uw = 0; uw < env.noise_w.size(); ++uw) {
      const int w = env.w(unit.x, unit.z, uw);
      const double p_xzw = env.noise_xz[uxz] * env.noise_w[uw];
      for (std::size_t uy = 0; uy < env.noise_y.size(); ++uy) {
        p_[index(unit.x, unit.z, w, env.y(unit.x, unit.z, w, uy))] += p_xzw * env.noise_y[uy];
      }
    }
  }
}

double JointTable::p_x(int x) const {
  double s = 0.0;
  for (int z = 0; z < levels_.nz(); ++z) s += p_xz(x, z);
  return s;
}

double JointTable::p_xz(int x, int z) const {
  double s = 0.0;
  for (int w = 0; w < levels_.nw(); ++w) s += p_xzw(x, z, w);
  return s;
}

double JointTable::p_xzw(int x, int z, int w) const {
  double s = 0.0;
  for (int y = 0; y < levels_.ny(); ++y) s += (*this)(x, z, w, y);
  return s;
}

double JointTable::z_given_x(int z, int x) const {
  const double px = p_x(x);
  if (!(px > 0.0)) {
    throw UnsupportedConditioning("unsupported conditioning: P(x=" + levels_.x[static_cast<std::size_t>(x)] + ") = 0");
  }
  return p_xz(x, z) / px;
}

double JointTable::w_given_xz(int w, int x, int z) const {
  const double pxz = p_xz(x, z);
  if (!(pxz > 0.0)) {
    throw UnsupportedConditioning("unsupported conditioning: zero probability at " +
                                  cell_name(levels_, x, z));
  }
  return p_xzw(x, z, w) / pxz;
}

double JointTable::y_given_xzw(int y, int x, int z, int w) const {
  const double pxzw = p_xzw(x, z, w);
  if (!(pxzw > 0.0)) {
    throw UnsupportedConditioning("unsupported conditioning: zero probability at (x=" +
                                  levels_.x[static_cast<std::size_t>(x)] + ", z=" +
                                  levels_.z[static_cast<std::size_t>(z)] + ", w=" +
                                  levels_.w[static_cast<std::size_t>(w)] + ")");
  }
  return (*this)(x, z, w, y) / pxzw;
}

double JointTable::y_given_x(int y, int x) const {
  const double px = p_x(x);
  if (!(px > 0.0)) {
    throw UnsupportedConditioning("unsupported conditioning: P(x=" + levels_.x[static_cast<std::size_t>(x)] + ") = 0");
  }
  double s = 0.0;
  for (int z = 0; z < levels_.nz(); ++z) {
    for (int w = 0; w < levels_.nw(); ++w) s += (*this)(x, z, w, y);
  }
  return s / px;
}

Sample sample_env(const Levels& levels, const ScmEnvironment& env, std::size_t n,
                  std::uint64_t seed) {
  env.validate(levels);
  return sample_blocks(env, env, env, n, seed);
}

Sample sample_staged(const ScmPair& pair, const StageTriple& stage, std::size_t n,
                     std::uint64_t seed) {
  require_monotone(stage);
  pair.rw.validate(pair.levels);
  pair.gm.validate(pair.levels);
  return sample_blocks(pair.env(stage.z), pair.env(stage.w), pair.env(stage.y), n, seed);
}

}  // namespace fga
