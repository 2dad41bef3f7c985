#include "fga/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fga {

std::string_view to_string(Stereotype s) {
  switch (s) {
    case Stereotype::amplify: return "amplify";
    case Stereotype::dampen: return "dampen";
    case Stereotype::reverse: return "reverse";
  }
  return "?";
}

Stereotype classify_stereotype(double ce_real, double ce_model) {
  if (ce_real == 0.0) return ce_model == 0.0 ? Stereotype::dampen : Stereotype::reverse;
  if (ce_model == 0.0) return Stereotype::dampen;
  if ((ce_real > 0) != (ce_model > 0)) return Stereotype::reverse;
  return std::abs(ce_model) > std::abs(ce_real) ? Stereotype::amplify : Stereotype::dampen;
}

std::vector<double> BiasSignature::vector() const {
  std::vector<double> v;
  for (const auto& d : datasets) v.insert(v.end(), d.model.begin(), d.model.end());
  return v;
}

std::vector<StereotypeLabel> label_signature(const BiasSignature& sig) {
  std::vector<StereotypeLabel> out;
  for (const auto& d : sig.datasets) {
    for (int s = 0; s < 3; ++s) {
      for (int k = 0; k < 3; ++k) {
        StereotypeLabel l;
        l.dataset = d.dataset;
        l.kind = kPathwayKinds[k];
        l.stage = kSignatureStages[s];
        l.real = d.real[static_cast<std::size_t>(k)];
        l.model = d.model[static_cast<std::size_t>(s * 3 + k)];
        l.label = classify_stereotype(l.real, l.model);
        l.disadvantage = l.real > 0;
        out.push_back(l);
      }
    }
  }
  return out;
}

double StereotypeSummary::percent(Stereotype s) const {
  const std::size_t t = total();
  if (t == 0) return 0.0;
  const std::size_t c = s == Stereotype::amplify ? amplify : s == Stereotype::dampen ? dampen : reverse;
  return 100.0 * static_cast<double>(c) / static_cast<double>(t);
}

std::vector<StereotypeSummary> stereotype_summary(const std::vector<BiasSignature>& signatures,
                                                  SummaryScope scope) {
  std::vector<StereotypeSummary> out;
  for (const auto& sig : signatures) {
    if (sig.datasets.empty()) throw ValidationError("signature for '" + sig.model + "' has no datasets");
    for (const auto& d : sig.datasets) {
      for (double v : d.real) {
        if (!std::isfinite(v)) throw ValidationError("missing real-world effect in " + d.dataset);
      }
      for (double v : d.model) {
        if (!std::isfinite(v)) throw ValidationError("missing model effect for " + sig.model + " on " + d.dataset);
      }
    }
    StereotypeSummary s;
    s.model = sig.model;
    for (const auto& l : label_signature(sig)) {
      if (scope == SummaryScope::disadvantage && !l.disadvantage) continue;
      switch (l.label) {
        case Stereotype::amplify: ++s.amplify; break;
        case Stereotype::dampen: ++s.dampen; break;
        case Stereotype::reverse: ++s.reverse; break;
      }
    }
    out.push_back(s);
  }
  return out;
}

Matrix l1_matrix(const std::vector<std::vector<double>>& signatures) {
  const std::size_t n = signatures.size();
  Matrix d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (signatures[i].size() != signatures.front().size()) {
      throw ValidationError("signature lengths differ");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < signatures[i].size(); ++k) s += std::abs(signatures[i][k] - signatures[j][k]);
      d[i][j] = d[j][i] = s;
    }
  }
  return d;
}

namespace {

void check_square_symmetric(const Matrix& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i].size() != n) throw ValidationError("distance matrix is not square");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(d[i][j])) throw ValidationError("distance matrix has a non-finite entry");
      const double tol = 1e-12 * std::max(1.0, std::abs(d[i][j]));
      if (std::abs(d[i][j] - d[j][i]) > tol) throw ValidationError("distance matrix is not symmetric");
    }
  }
}

}  // namespace

std::vector<Merge> ward_cluster(const Matrix& input, WardMode mode) {
  check_square_symmetric(input);
  const std::size_t n = input.size();
  std::vector<Merge> merges;
  if (n < 2) return merges;

  // Work matrix indexed by slot; slot i holds cluster id ids[i].
  Matrix d = input;
  if (mode == WardMode::squared) {
    for (auto& row : d) {
      for (double& v : row) v *= v;
    }
  }
  std::vector<int> ids(n);
  std::vector<int> sizes(n, 1);
  std::vector<bool> active(n, true);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    std::pair<int, int> best_key{std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const std::pair<int, int> key{std::min(ids[i], ids[j]), std::max(ids[i], ids[j])};
        if (d[i][j] < best || (d[i][j] == best && key < best_key)) {
          best = d[i][j];
          best_key = key;
          bi = i;
          bj = j;
        }
      }
    }
    const double ni = sizes[bi], nj = sizes[bj];
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double nk = sizes[k];
      const double v = ((ni + nk) * d[bi][k] + (nj + nk) * d[bj][k] - nk * d[bi][bj]) / (ni + nj + nk);
      d[bi][k] = d[k][bi] = v;
    }
    Merge m;
    m.a = best_key.first;
    m.b = best_key.second;
    m.height = mode == WardMode::squared ? std::sqrt(std::max(best, 0.0)) : best;
    m.size = sizes[bi] + sizes[bj];
    merges.push_back(m);
    ids[bi] = static_cast<int>(n + step);
    sizes[bi] = m.size;
    active[bj] = false;
  }
  return merges;
}

PermutationResult family_permutation_test(const Matrix& d, const std::vector<std::string>& families,
                                          int n_perm, std::uint64_t seed) {
  check_square_symmetric(d);
  const std::size_t n = d.size();
  if (families.size() != n) throw ValidationError("family labels do not match the matrix size");
  if (n_perm < 1) throw ValidationError("permutation count must be positive");

  auto stat = [&](const std::vector<std::string>& lab, std::size_t* pairs) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (lab[i] == lab[j]) {
          s += d[i][j];
          ++c;
        }
      }
    }
    if (pairs) *pairs = c;
    return c ? s / static_cast<double>(c) : 0.0;
  };

  PermutationResult r;
  r.n_perm = n_perm;
  r.observed_mean = stat(families, &r.within_pairs);
  if (r.within_pairs == 0) throw ValidationError("no within-family pairs");

  const double tol = 1e-12 * std::max(1.0, std::abs(r.observed_mean));
  std::size_t at_most = 0;
  double sum = 0.0;
  for (int p = 0; p < n_perm; ++p) {
    std::vector<std::string> lab = families;
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(p));
    for (std::size_t i = n; i > 1; --i) std::swap(lab[i - 1], lab[uniform_index(rng, i)]);
    const double v = stat(lab, nullptr);
    sum += v;
    if (v <= r.observed_mean + tol) ++at_most;
  }
  r.null_mean = sum / n_perm;
  r.p_value = static_cast<double>(1 + at_most) / static_cast<double>(n_perm + 1);
  return r;
}

Waterfall waterfall_from_terms(EffectKind kind, const std::array<double, 5>& values,
                               const std::array<std::optional<double>, 5>& ses, double tol) {
  static const char* labels[5] = {"CE^s0", "T_fY", "T_fW", "T_fXZ", "CE^s1"};
  Waterfall w;
  w.kind = kind;
  double running = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    WaterfallBar b;
    b.label = labels[i];
    b.value = values[i];
    b.se = ses[i];
    if (b.se) b.band = Interval{b.value - 1.96 * *b.se, b.value + 1.96 * *b.se};
    if (i == 0 || i == 4) {
      b.start = 0.0;
      b.end = b.value;
      running = i == 0 ? b.value : running;
    } else {
      b.start = running;
      running += b.value;
      b.end = running;
    }
    w.bars.push_back(b);
  }
  w.residual = values[4] - (values[0] + values[1] + values[2] + values[3]);
  double scale = 1.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  w.consistent = std::abs(w.residual) <= tol * scale;
  return w;
}

Waterfall waterfall(const std::map<StageTriple, EffectValue>& effects_by_stage, EffectKind kind, double tol) {
  std::array<const EffectValue*, 4> ce{};
  for (int i = 0; i < 4; ++i) {
    auto it = effects_by_stage.find(kDataStages[i]);
    if (it == effects_by_stage.end()) {
      throw ValidationError("waterfall needs the effect at stage " + to_string(kDataStages[i]));
    }
    if (it->second.kind != kind) throw ValidationError("waterfall inputs mix effect kinds");
    ce[static_cast<std::size_t>(i)] = &it->second;
  }
  auto se_diff = [&](int a, int b) -> std::optional<double> {
    if (!ce[static_cast<std::size_t>(a)]->se || !ce[static_cast<std::size_t>(b)]->se) return std::nullopt;
    return std::hypot(*ce[static_cast<std::size_t>(a)]->se, *ce[static_cast<std::size_t>(b)]->se);
  };
  const std::array<double, 5> values{ce[0]->value, ce[1]->value - ce[0]->value, ce[2]->value - ce[1]->value,
                                     ce[3]->value - ce[2]->value, ce[3]->value};
  const std::array<std::optional<double>, 5> ses{ce[0]->se, se_diff(1, 0), se_diff(2, 1), se_diff(3, 2), ce[3]->se};
  return waterfall_from_terms(kind, values, ses, tol);
}

nlohmann::json to_json(const Waterfall& w) {
  nlohmann::json bars = nlohmann::json::array();
  for (const auto& b : w.bars) {
    nlohmann::json j{{"label", b.label}, {"value", b.value}, {"start", b.start}, {"end", b.end}};
    j["se"] = b.se ? nlohmann::json(*b.se) : nlohmann::json(nullptr);
    j["band"] = b.band ? nlohmann::json{b.band->lo, b.band->hi} : nlohmann::json(nullptr);
    bars.push_back(std::move(j));
  }
  return {{"kind", std::string(to_string(w.kind))},
          {"bars", bars},
          {"residual", w.residual},
          {"consistent", w.consistent}};
}

nlohmann::json to_json(const std::vector<Merge>& merges) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : merges) out.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
  return out;
}

nlohmann::json to_json(const PermutationResult& r) {
  return {{"observed_mean", r.observed_mean},
          {"null_mean", r.null_mean},
          {"p_value", r.p_value},
          {"n_perm", r.n_perm},
          {"within_pairs", r.within_pairs}};
}

}  // namespace fga
