#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fga/elicitation.hpp"

namespace fga::testing {
namespace {

std::vector<double> random_simplex(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(n);
  for (double& v : p) v = u(g);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= s;
  return p;
}

int pick(std::mt19937_64& g, int n) { return std::uniform_int_distribution<int>(0, n - 1)(g); }

ScmEnvironment random_env(std::mt19937_64& g, const Levels& l) {
  const int nx = l.nx(), nz = l.nz(), nw = l.nw(), ny = l.ny();
  const std::size_t n_uxz = static_cast<std::size_t>(nx * nz) + static_cast<std::size_t>(pick(g, 3));
  const std::size_t n_uw = static_cast<std::size_t>(nw) + static_cast<std::size_t>(pick(g, 3));
  const std::size_t n_uy = static_cast<std::size_t>(ny) + static_cast<std::size_t>(pick(g, 4));
  ScmEnvironment env = ScmEnvironment::shaped(l, n_uxz, n_uw, n_uy);
  env.noise_xz = random_simplex(g, n_uxz);
  env.noise_w = random_simplex(g, n_uw);
  env.noise_y = random_simplex(g, n_uy);

  std::vector<XZ> cells;
  for (int x = 0; x < nx; ++x) {
    for (int z = 0; z < nz; ++z) cells.push_back(XZ{x, z});
  }
  std::shuffle(cells.begin(), cells.end(), g);
  for (std::size_t u = 0; u < n_uxz; ++u) {
    env.mech_xz[u] = u < cells.size() ? cells[u] : XZ{pick(g, nx), pick(g, nz)};
  }
  for (int x = 0; x < nx; ++x) {
    for (int z = 0; z < nz; ++z) {
      std::vector<int> perm(static_cast<std::size_t>(nw));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), g);
      for (std::size_t u = 0; u < n_uw; ++u) {
        env.w_at(x, z, u) = u < perm.size() ? perm[u] : pick(g, nw);
      }
      for (int w = 0; w < nw; ++w) {
        for (std::size_t u = 0; u < n_uy; ++u) env.y_at(x, z, w, u) = pick(g, ny);
      }
    }
  }
  return env;
}

Levels random_levels(std::mt19937_64& g, int max_levels) {
  auto names = [&](const char* p) {
    const int n = 2 + pick(g, max_levels - 1);
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back(std::string(p) + std::to_string(i));
    return v;
  };
  Levels l;
  l.x = names("x");
  l.z = names("z");
  l.w = names("w");
  l.y = names("y");
  return l;
}

std::size_t idx(const Levels& l, int x, int z, int w, int y) {
  return ((static_cast<std::size_t>(x) * l.nz() + z) * l.nw() + w) * l.ny() + y;
}

}  // namespace

ScmPair random_pair(std::uint64_t seed, int max_levels) {
  std::mt19937_64 g(seed);
  ScmPair p;
  p.levels = random_levels(g, max_levels);
  p.rw = random_env(g, p.levels);
  p.gm = random_env(g, p.levels);
  p.mix_p = std::uniform_real_distribution<double>(0.1, 0.9)(g);
  p.validate();
  return p;
}

ScmPair random_ml_pair(std::uint64_t seed, int max_levels) {
  ScmPair p = random_pair(seed, max_levels);
  ScmEnvironment gm = p.rw;
  gm.noise_y = p.gm.noise_y;
  gm.mech_y = p.gm.mech_y;
  p.gm = std::move(gm);
  p.validate();
  return p;
}

std::vector<double> env_joint(const Levels& l, const ScmEnvironment& env) {
  std::vector<double> p(static_cast<std::size_t>(l.nx() * l.nz() * l.nw() * l.ny()), 0.0);
  for (std::size_t a = 0; a < env.noise_xz.size(); ++a) {
    const XZ xz = env.mech_xz[a];
    for (std::size_t b = 0; b < env.noise_w.size(); ++b) {
      const int w = env.w(xz.x, xz.z, b);
      for (std::size_t c = 0; c < env.noise_y.size(); ++c) {
        const int y = env.y(xz.x, xz.z, w, c);
        p[idx(l, xz.x, xz.z, w, y)] += env.noise_xz[a] * env.noise_w[b] * env.noise_y[c];
      }
    }
  }
  return p;
}

std::vector<double> staged_joint(const ScmPair& pair, const StageTriple& stage) {
  const Levels& l = pair.levels;
  const auto jz = env_joint(l, pair.env(stage.z));
  const auto jw = env_joint(l, pair.env(stage.w));
  const auto jy = env_joint(l, pair.env(stage.y));
  auto sum = [&](const std::vector<double>& j, int x, int z, int w) {
    double s = 0.0;
    for (int wi = 0; wi < l.nw(); ++wi) {
      if (w >= 0 && wi != w) continue;
      for (int y = 0; y < l.ny(); ++y) s += j[idx(l, x, z, wi, y)];
    }
    return s;
  };
  std::vector<double> out(jz.size(), 0.0);
  for (int x = 0; x < l.nx(); ++x) {
    for (int z = 0; z < l.nz(); ++z) {
      const double pxz = sum(jz, x, z, -1);
      for (int w = 0; w < l.nw(); ++w) {
        const double pw = sum(jw, x, z, w) / sum(jw, x, z, -1);
        const double den_y = sum(jy, x, z, w);
        for (int y = 0; y < l.ny(); ++y) {
          out[idx(l, x, z, w, y)] = pxz * pw * jy[idx(l, x, z, w, y)] / den_y;
        }
      }
    }
  }
  return out;
}

double oracle_po(const ScmPair& pair, const PoQuery& q) {
  const ScmEnvironment& ez = pair.env(q.stage.z);
  const ScmEnvironment& ew = pair.env(q.stage.w);
  const ScmEnvironment& ey = pair.env(q.stage.y);
  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < ez.noise_xz.size(); ++a) {
    const XZ xz = ez.mech_xz[a];
    if (xz.x != q.x_z) continue;
    for (std::size_t b = 0; b < ew.noise_w.size(); ++b) {
      const int w = ew.w(q.x_w, xz.z, b);
      for (std::size_t c = 0; c < ey.noise_y.size(); ++c) {
        const double pr = ez.noise_xz[a] * ew.noise_w[b] * ey.noise_y[c];
        den += pr;
        if (ey.y(q.x_y, xz.z, w, c) == q.y_target) num += pr;
      }
    }
  }
  return num / den;
}

double oracle_effect(const ScmPair& pair, EffectKind kind, const StageTriple& s, Transition t, int y) {
  auto po = [&](int a, int b, int c) { return oracle_po(pair, PoQuery{a, b, c, s, y}); };
  switch (kind) {
    case EffectKind::DE: return po(t.x0, t.x0, t.x1) - po(t.x0, t.x0, t.x0);
    case EffectKind::IE: return po(t.x0, t.x0, t.x1) - po(t.x0, t.x1, t.x1);
    case EffectKind::SE: return po(t.x0, t.x1, t.x1) - po(t.x1, t.x1, t.x1);
    case EffectKind::TV: return oracle_tv(pair, s.z, t, y);
  }
  return 0.0;
}

double oracle_tv(const ScmPair& pair, Env env, Transition t, int y) {
  const Levels& l = pair.levels;
  const auto j = env_joint(l, pair.env(env));
  auto cond = [&](int x) {
    double num = 0.0, den = 0.0;
    for (int z = 0; z < l.nz(); ++z) {
      for (int w = 0; w < l.nw(); ++w) {
        for (int yy = 0; yy < l.ny(); ++yy) {
          den += j[idx(l, x, z, w, yy)];
          if (yy == y) num += j[idx(l, x, z, w, yy)];
        }
      }
    }
    return num / den;
  };
  return cond(t.x1) - cond(t.x0);
}

double StagedTables::p(int x, int z, int w, int y) const { return joint[idx(levels, x, z, w, y)]; }
double StagedTables::p_xzw(int x, int z, int w) const {
  double s = 0.0;
  for (int y = 0; y < levels.ny(); ++y) s += p(x, z, w, y);
  return s;
}
double StagedTables::p_xz(int x, int z) const {
  double s = 0.0;
  for (int w = 0; w < levels.nw(); ++w) s += p_xzw(x, z, w);
  return s;
}
double StagedTables::p_x(int x) const {
  double s = 0.0;
  for (int z = 0; z < levels.nz(); ++z) s += p_xz(x, z);
  return s;
}
double StagedTables::p_z(int z) const {
  double s = 0.0;
  for (int x = 0; x < levels.nx(); ++x) s += p_xz(x, z);
  return s;
}
double StagedTables::p_zw(int z, int w) const {
  double s = 0.0;
  for (int x = 0; x < levels.nx(); ++x) s += p_xzw(x, z, w);
  return s;
}

StagedTables staged_tables(const ScmPair& pair, const StageTriple& stage) {
  return StagedTables{pair.levels, staged_joint(pair, stage)};
}

NuisanceValues exact_nuisances(const StagedTables& t, const PoQuery& q, int z, int w) {
  NuisanceValues v;
  v.mu = t.y_given_xzw(q.y_target, q.x_y, z, w);
  double eta = 0.0;
  for (int wi = 0; wi < t.levels.nw(); ++wi) {
    eta += t.y_given_xzw(q.y_target, q.x_y, z, wi) * t.w_given_xz(wi, q.x_w, z);
  }
  v.eta = eta;
  v.p_xz = t.p_x(q.x_z);
  v.p_xz_given_z = t.x_given_z(q.x_z, z);
  v.p_xw_given_z = t.x_given_z(q.x_w, z);
  v.p_xw_given_zw = t.x_given_zw(q.x_w, z, w);
  v.p_xy_given_zw = t.x_given_zw(q.x_y, z, w);
  return v;
}

double population_if_mean(const StagedTables& t, const PoQuery& q,
                          const std::function<NuisanceValues(int z, int w)>& nuisances) {
  const Levels& l = t.levels;
  double s = 0.0;
  for (int z = 0; z < l.nz(); ++z) {
    for (int w = 0; w < l.nw(); ++w) {
      const NuisanceValues nv = nuisances(z, w);
      for (int x = 0; x < l.nx(); ++x) {
        for (int y = 0; y < l.ny(); ++y) {
          const double pr = t.p(x, z, w, y);
          if (pr == 0.0) continue;
          s += pr * influence_term(q, x, y == q.y_target ? 1.0 : 0.0, nv);
        }
      }
    }
  }
  return s;
}

std::vector<Merge> naive_ward(const Matrix& d, bool squared) {
  const std::size_t n = d.size();
  std::vector<std::vector<std::size_t>> members(n);
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    members[i] = {i};
    ids[i] = static_cast<int>(i);
  }
  auto D = [&](std::size_t i, std::size_t j) { return squared ? d[i][j] * d[i][j] : d[i][j]; };
  auto block = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double s = 0.0;
    for (std::size_t i : a) {
      for (std::size_t j : b) s += D(i, j);
    }
    return s;
  };
  auto ward = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double cross = block(a, b) / (na * nb);
    const double inner_a = block(a, a) / (2.0 * na * na);
    const double inner_b = block(b, b) / (2.0 * nb * nb);
    return 2.0 * na * nb / (na + nb) * (cross - inner_a - inner_b);
  };
  std::vector<Merge> out;
  int next = static_cast<int>(n);
  while (members.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        const double v = ward(members[i], members[j]);
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    Merge m;
    m.a = std::min(ids[bi], ids[bj]);
    m.b = std::max(ids[bi], ids[bj]);
    m.height = squared ? std::sqrt(std::max(best, 0.0)) : best;
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    m.size = static_cast<int>(members[bi].size());
    ids[bi] = next++;
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(bj));
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(bj));
    out.push_back(m);
  }
  return out;
}

namespace {

std::uint64_t hash_text(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool every(int k, std::size_t row, std::size_t rem) { return k > 0 && row % static_cast<std::size_t>(k) == rem; }

}  // namespace

ChatResponse FixtureModel::operator()(const ChatRequest& req) const {
  const std::string& p = req.prompt;
  const std::size_t row = req.tag.row;
  ChatResponse out;
  if (p.rfind("Based on the following text:", 0) != 0) {
    std::string story;
    std::size_t pos = p.find("unknown facts to be mentioned:\n");
    std::uint64_t h = hash_text(p + "#" + std::to_string(row) + "#" + std::to_string(req.tag.attempt));
    while ((pos = p.find("\n- ", pos)) != std::string::npos) {
      pos += 3;
      const std::size_t end = p.find(" (possible values:", pos);
      if (end == std::string::npos) break;
      const VariableSpec& v = spec->variable(p.substr(pos, end - pos));
      const std::size_t level = static_cast<std::size_t>(h % v.levels.size());
      h = h * 6364136223846793005ULL + 1442695040888963407ULL;
      story += (story.empty() ? "" : "; ") + v.name + " = " + v.levels[level];
    }
    if (every(untagged_every, row, 0) && req.tag.attempt == 0) {
      out.content = story;
    } else {
      out.content = "<story>\nFixture person. " + story + "\n</story>";
    }
    return out;
  }

  const std::size_t q = p.find("determine the person's ");
  const std::size_t q_end = p.find(". Begin your answer", q);
  const std::string question = p.substr(q + 23, q_end - q - 23);
  const VariableSpec* var = nullptr;
  for (const VariableSpec& v : spec->variables) {
    if (v.question == question) var = &v;
  }
  const std::string narrative = p.substr(p.find('"') + 1, p.rfind("\"\n\ndetermine") - p.find('"') - 1);
  int level = -1;
  const std::string key = var->name + " = ";
  const std::size_t at = narrative.find(key);
  if (at != std::string::npos) {
    std::size_t stop = narrative.find(';', at);
    if (stop == std::string::npos) stop = narrative.size();
    level = var->level_index(narrative.substr(at + key.size(), stop - at - key.size()));
  }
  const char right = level >= 0 ? static_cast<char>('A' + level) : 'A';
  const char other = right == 'A' ? 'B' : 'A';
  if (every(no_logprobs_every, row, 1)) {
    out.content = std::string(1, right) + ". " + var->annotator_labels[static_cast<std::size_t>(right - 'A')];
    return out;
  }
  out.content = std::string(1, right) + ".";
  if (every(inconclusive_every, row, 2)) {
    out.first_token_logprobs = TokenLogprobs{{"The", std::log(0.7)}, {"I", std::log(0.2)}};
    return out;
  }
  out.first_token_logprobs =
      TokenLogprobs{{std::string(1, right), std::log(0.45)}, {" " + std::string(1, other), std::log(0.35)},
                    {std::string(1, right) + ".", std::log(0.15)}, {"Answer", std::log(0.05)}};
  return out;
}

nlohmann::json completion_json(const ChatResponse& r) {
  nlohmann::json choice{{"index", 0}, {"message", {{"role", "assistant"}, {"content", r.content}}},
                        {"finish_reason", "stop"}};
  if (r.first_token_logprobs && !r.first_token_logprobs->empty()) {
    nlohmann::json top = nlohmann::json::array();
    for (const auto& [tok, lp] : *r.first_token_logprobs) top.push_back({{"token", tok}, {"logprob", lp}});
    choice["logprobs"] = {{"content", {{{"token", r.first_token_logprobs->front().first},
                                        {"logprob", r.first_token_logprobs->front().second},
                                        {"top_logprobs", top}}}}};
  }
  return {{"id", "fixture"}, {"object", "chat.completion"}, {"choices", {choice}}};
}

std::vector<StageTriple> all_stages() {
  std::vector<StageTriple> out;
  for (int c = 0; c < 8; ++c) {
    out.push_back(StageTriple{(c & 4) ? s1 : s0, (c & 2) ? s1 : s0, (c & 1) ? s1 : s0});
  }
  return out;
}

}  // namespace fga::testing
