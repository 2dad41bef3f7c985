#pragma once

// Test-only oracles and generators. Nothing here calls the library's own
// evaluators; values are recomputed from the mechanism tables directly.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fga/analysis.hpp"
#include "fga/effects.hpp"
#include "fga/endpoint.hpp"
#include "fga/estimation.hpp"
#include "fga/scm.hpp"
#include "fga/spec.hpp"

namespace fga::testing {

/// Random pair with 2..max_levels levels per block. Every (x, z) cell and
/// every w given (x, z) has positive probability in both environments.
ScmPair random_pair(std::uint64_t seed, int max_levels = 4);

/// Random pair whose model environment keeps the real-world {X,Z} and W
/// blocks and replaces only the outcome mechanism.
ScmPair random_ml_pair(std::uint64_t seed, int max_levels = 4);

/// Dense P(x, z, w, y) of one environment by flat enumeration of
/// (u_xz, u_w, u_y). Index ((x*nz + z)*nw + w)*ny + y.
std::vector<double> env_joint(const Levels& l, const ScmEnvironment& env);

/// Staged joint P^{sy}(y|x,z,w) P^{sw}(w|x,z) P^{sz}(x,z), same indexing.
std::vector<double> staged_joint(const ScmPair& pair, const StageTriple& stage);

/// Nested counterfactual by enumerating the joint noise of the three
/// environments involved and conditioning on X = x_z.
double oracle_po(const ScmPair& pair, const PoQuery& q);
double oracle_effect(const ScmPair& pair, EffectKind kind, const StageTriple& stage, Transition t, int y);
double oracle_tv(const ScmPair& pair, Env env, Transition t, int y);

/// Exact conditionals of a staged joint.
struct StagedTables {
  Levels levels;
  std::vector<double> joint;
  double p(int x, int z, int w, int y) const;
  double p_x(int x) const;
  double p_z(int z) const;
  double p_xz(int x, int z) const;
  double p_zw(int z, int w) const;
  double p_xzw(int x, int z, int w) const;
  double x_given_z(int x, int z) const { return p_xz(x, z) / p_z(z); }
  double x_given_zw(int x, int z, int w) const { return p_xzw(x, z, w) / p_zw(z, w); }
  double w_given_xz(int w, int x, int z) const { return p_xzw(x, z, w) / p_xz(x, z); }
  double y_given_xzw(int y, int x, int z, int w) const { return p(x, z, w, y) / p_xzw(x, z, w); }
};

StagedTables staged_tables(const ScmPair& pair, const StageTriple& stage);

/// E_P~[f] where f uses the library's influence_term with nuisances built
/// from the callbacks at every (z, w).
double population_if_mean(const StagedTables& t, const PoQuery& q,
                          const std::function<NuisanceValues(int z, int w)>& nuisances);

/// Correct nuisances at (z, w).
NuisanceValues exact_nuisances(const StagedTables& t, const PoQuery& q, int z, int w);

/// O(n^3)-per-step agglomeration that recomputes Ward's criterion from the
/// member sets at every step.
std::vector<Merge> naive_ward(const Matrix& d, bool squared);

/// Deterministic stand-in for a generator and an annotator. Stories read
/// "name = level; ..." for every unknown variable, with levels drawn from a
/// hash of the prompt, row and attempt. The annotator finds the variable
/// from the question text and puts most mass on the right letter.
struct FixtureModel {
  const SfmSpec* spec = nullptr;
  /// Rows with row % k == 0 answer without story tags on attempt 0.
  int untagged_every = 0;
  /// Annotations of rows with row % k == 1 come back without log-probs.
  int no_logprobs_every = 0;
  /// Annotations of rows with row % k == 2 carry no option letters.
  int inconclusive_every = 0;

  ChatResponse operator()(const ChatRequest& req) const;
};

/// Wraps a response in the chat-completions JSON shape.
nlohmann::json completion_json(const ChatResponse& r);

/// All 8 stage triples.
std::vector<StageTriple> all_stages();

}  // namespace fga::testing
