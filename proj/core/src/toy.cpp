#include "fga/scm_io.hpp"

namespace fga {
namespace {

constexpr std::size_t kThresholdStates = 20;

struct ToyTables {
  double p_xz[2][2];   // P(x, z)
  int w_thresh[2][2];  // P(w = 1 | x, z) = w_thresh / 20
  int y_thresh[2][2][2];  // P(y = 1 | x, z, w) = y_thresh / 20
};

// Binary blocks; W and Y are threshold mechanisms over 20 equiprobable noise
// states, so every conditional is a multiple of 0.05.
ScmEnvironment build(const Levels& levels, const ToyTables& t) {
  ScmEnvironment env = ScmEnvironment::shaped(levels, 4, kThresholdStates, kThresholdStates);
  std::size_t u = 0;
  for (int x = 0; x < 2; ++x) {
    for (int z = 0; z < 2; ++z) {
      env.noise_xz[u] = t.p_xz[x][z];
      env.mech_xz[u] = XZ{x, z};
      ++u;
    }
  }
  for (int x = 0; x < 2; ++x) {
    for (int z = 0; z < 2; ++z) {
      for (std::size_t uw = 0; uw < kThresholdStates; ++uw) {
        env.w_at(x, z, uw) = static_cast<int>(uw) < t.w_thresh[x][z] ? 1 : 0;
      }
      for (int w = 0; w < 2; ++w) {
        for (std::size_t uy = 0; uy < kThresholdStates; ++uy) {
          env.y_at(x, z, w, uy) = static_cast<int>(uy) < t.y_thresh[x][z][w] ? 1 : 0;
        }
      }
    }
  }
  return env;
}

Levels toy_levels() { return Levels{{"x0", "x1"}, {"z0", "z1"}, {"w0", "w1"}, {"y0", "y1"}}; }

constexpr ToyTables kRealWorld{
    {{0.30, 0.20}, {0.15, 0.35}},
    {{5, 10}, {8, 13}},
    {{{2, 6}, {4, 9}}, {{4, 8}, {7, 12}}},
};

constexpr ToyTables kModel{
    {{0.25, 0.25}, {0.10, 0.40}},
    {{6, 9}, {12, 16}},
    {{{3, 5}, {6, 8}}, {{7, 11}, {10, 15}}},
};

}  // namespace

ScmPair toy_a() {
  ScmPair pair;
  pair.levels = toy_levels();
  pair.rw = build(pair.levels, kRealWorld);
  pair.gm = build(pair.levels, kModel);
  pair.mix_p = 0.5;
  pair.validate();
  return pair;
}

ScmPair toy_a_ml() {
  ScmPair pair = toy_a();
  ScmEnvironment gm = pair.rw;
  gm.noise_y = pair.gm.noise_y;
  gm.mech_y = pair.gm.mech_y;
  pair.gm = std::move(gm);
  pair.validate();
  return pair;
}

}  // namespace fga
