#pragma once

// Discrete two-environment structural causal models over the blocks
// {X,Z} -> W -> Y. Every variable is finite-categorical; multivariate Z and W
// are product-coded into a single categorical at this level.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fga/common.hpp"

namespace fga {

/// Ordered level names for each block.
struct Levels {
  std::vector<std::string> x;
  std::vector<std::string> z;
  std::vector<std::string> w;
  std::vector<std::string> y;

  int nx() const { return static_cast<int>(x.size()); }
  int nz() const { return static_cast<int>(z.size()); }
  int nw() const { return static_cast<int>(w.size()); }
  int ny() const { return static_cast<int>(y.size()); }

  friend bool operator==(const Levels&, const Levels&) = default;
};

struct XZ {
  int x = 0;
  int z = 0;
  friend bool operator==(const XZ&, const XZ&) = default;
};

/// One environment: exogenous noise over finite supports plus deterministic
/// mechanisms. mech_w and mech_y are dense tables indexed in row-major order
/// over (x, z, u_w) and (x, z, w, u_y).
class ScmEnvironment {
 public:
  std::vector<double> noise_xz;
  std::vector<double> noise_w;
  std::vector<double> noise_y;
  std::vector<XZ> mech_xz;
  std::vector<int> mech_w;
  std::vector<int> mech_y;

  /// Allocates mechanism tables sized for `levels` and the given noise
  /// support sizes; all outputs default to level 0.
  static ScmEnvironment shaped(const Levels& levels, std::size_t n_uxz, std::size_t n_uw,
                               std::size_t n_uy);

  XZ xz(std::size_t u) const { return mech_xz[u]; }
  int w(int x, int z, std::size_t u) const { return mech_w[w_index(x, z, u)]; }
  int y(int x, int z, int w, std::size_t u) const { return mech_y[y_index(x, z, w, u)]; }

  int& w_at(int x, int z, std::size_t u) { return mech_w[w_index(x, z, u)]; }
  int& y_at(int x, int z, int w, std::size_t u) { return mech_y[y_index(x, z, w, u)]; }

  /// Structural checks: noise sums to one, tables total and in range.
  void validate(const Levels& levels) const;
  /// Every (x, z) cell carries positive probability.
  void check_positivity(const Levels& levels) const;

  friend bool operator==(const ScmEnvironment&, const ScmEnvironment&) = default;

 private:
  std::size_t w_index(int x, int z, std::size_t u) const {
    return (static_cast<std::size_t>(x) * nz_ + static_cast<std::size_t>(z)) * noise_w.size() + u;
  }
  std::size_t y_index(int x, int z, int w, std::size_t u) const {
    return ((static_cast<std::size_t>(x) * nz_ + static_cast<std::size_t>(z)) * nw_ +
            static_cast<std::size_t>(w)) *
               noise_y.size() +
           u;
  }
  std::size_t nz_ = 0;
  std::size_t nw_ = 0;
};

struct ScmPair {
  Levels levels;
  ScmEnvironment rw;
  ScmEnvironment gm;
  /// P(S = rw). Carried for completeness; no estimand depends on it.
  double mix_p = 0.5;

  const ScmEnvironment& env(Env e) const { return e == Env::rw ? rw : gm; }
  ScmEnvironment& env(Env e) { return e == Env::rw ? rw : gm; }

  /// Validates both environments, shared levels, mix_p and strict positivity.
  void validate() const;

  friend bool operator==(const ScmPair&, const ScmPair&) = default;
};

/// A nested S-modified potential outcome
///   E[ 1{Y^{s_y}_{x_y, W^{s_w}_{x_w}} = y_target} | X = x_z, S = s_z ].
struct PoQuery {
  int x_z = 0;
  int x_w = 0;
  int x_y = 0;
  StageTriple stage;
  int y_target = 1;

  friend bool operator==(const PoQuery&, const PoQuery&) = default;
};

void validate_query(const Levels& levels, const PoQuery& q);

/// Exact value by enumeration over the exogenous supports of each block.
double eval_po_exact(const ScmPair& pair, const PoQuery& q);

/// Value of the identification formula
///   sum_{z,w} P^{s_y}(y | x_y, z, w) P^{s_w}(w | x_w, z) P^{s_z}(z | x_z)
/// computed from the observational joint of each environment.
double eval_po_idformula(const ScmPair& pair, const PoQuery& q);

/// Dense observational joint P(x, z, w, y) of one environment.
class JointTable {
 public:
  JointTable(const Levels& levels, const ScmEnvironment& env);

  double operator()(int x, int z, int w, int y) const { return p_[index(x, z, w, y)]; }
  double p_x(int x) const;
  double p_xz(int x, int z) const;
  double p_xzw(int x, int z, int w) const;

  /// P(z | x); throws UnsupportedConditioning when P(x) = 0.
  double z_given_x(int z, int x) const;
  /// P(w | x, z); throws when P(x, z) = 0.
  double w_given_xz(int w, int x, int z) const;
  /// P(y | x, z, w); throws when P(x, z, w) = 0.
  double y_given_xzw(int y, int x, int z, int w) const;
  /// P(y | x); throws when P(x) = 0.
  double y_given_x(int y, int x) const;

  const Levels& levels() const { return levels_; }

 private:
  std::size_t index(int x, int z, int w, int y) const {
    return ((static_cast<std::size_t>(x) * levels_.nz() + z) * levels_.nw() + w) * levels_.ny() + y;
  }
  Levels levels_;
  std::vector<double> p_;
};

/// Rows of product-coded block values.
struct Sample {
  std::vector<int> x;
  std::vector<int> z;
  std::vector<int> w;
  std::vector<int> y;

  std::size_t size() const { return x.size(); }
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// n i.i.d. rows by ancestral sampling from one environment.
Sample sample_env(const Levels& levels, const ScmEnvironment& env, std::size_t n,
                  std::uint64_t seed);

/// n rows from P^{s_y}(y | x,z,w) P^{s_w}(w | x,z) P^{s_z}(x,z). Requires a
/// monotone stage.
Sample sample_staged(const ScmPair& pair, const StageTriple& stage, std::size_t n,
                     std::uint64_t seed);

}  // namespace fga
