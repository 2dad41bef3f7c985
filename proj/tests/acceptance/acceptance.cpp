// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fga/analysis.hpp"
#include "fga/audit.hpp"
#include "fga/dataset.hpp"
#include "fga/effects.hpp"
#include "fga/elicitation.hpp"
#include "fga/estimation.hpp"
#include "fga/scm.hpp"
#include "fga/scm_io.hpp"
#include "support.hpp"

using namespace fga;
namespace fs = std::filesystem;
namespace ft = fga::testing;

namespace {

const fs::path kFixtures = FGA_FIXTURE_DIR;
constexpr Transition kT{0, 1};

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::vector<PoQuery> queries_at(const StageTriple& st) {
  std::vector<PoQuery> out;
  for (int k = 0; k < 8; ++k) out.push_back(PoQuery{k & 1, (k >> 1) & 1, (k >> 2) & 1, st, 1});
  return out;
}

Outcome identification() {
  double worst = 0.0;
  double worst_oracle = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const ScmPair pair = ft::random_pair(seed, 4);
    for (const StageTriple& st : ft::all_stages()) {
      for (const PoQuery& q : queries_at(st)) {
        const double exact = eval_po_exact(pair, q);
        worst = std::max(worst, std::abs(eval_po_idformula(pair, q) - exact));
        worst_oracle = std::max(worst_oracle, std::abs(ft::oracle_po(pair, q) - exact));
        ++checked;
      }
    }
  }
  return verdict(worst <= 1e-10 && worst_oracle <= 1e-10,
                 fmt("%d queries on 200 pairs, max |idformula - exact| = %.2e, max |oracle - exact| = %.2e", checked,
                     worst, worst_oracle));
}

Outcome identities() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const ScmPair pair = ft::random_pair(seed, 4);
    for (Env e : {s0, s1}) {
      worst = std::max(worst, std::abs(tv_decompose(pair, e, kT, 1).residual()));
      // the same identity from the enumeration oracle alone
      const StageTriple st = StageTriple::constant(e);
      const double de = ft::oracle_effect(pair, EffectKind::DE, st, kT, 1);
      const double ie = ft::oracle_effect(pair, EffectKind::IE, st, kT, 1);
      const double se = ft::oracle_effect(pair, EffectKind::SE, st, kT, 1);
      worst = std::max(worst, std::abs(ft::oracle_tv(pair, e, kT, 1) - (de - ie - se)));
    }
    worst = std::max(worst, std::abs(delta_tv_decompose(pair, kT, 1).residual()));
    for (EffectKind k : kPathwayKinds) {
      const StageTerms terms = delta_ce_stages(pair, k, kT, 1);
      worst = std::max(worst, std::abs(terms.residual()));
      const double total = ft::oracle_effect(pair, k, kModelStage, kT, 1) -
                           ft::oracle_effect(pair, k, kRealWorldStage, kT, 1);
      worst = std::max(worst, std::abs(total - terms.total));
    }
  }
  int nonzero = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const ScmPair pair = ft::random_ml_pair(seed, 4);
    for (EffectKind k : kPathwayKinds) {
      const StageTerms terms = delta_ce_stages(pair, k, kT, 1);
      if (terms.mediator != 0.0 || terms.context != 0.0) ++nonzero;
    }
  }
  return verdict(worst <= 1e-12 && nonzero == 0,
                 fmt("max identity residual %.2e on 200 pairs; %d nonzero mediator/context terms on 200 ML pairs",
                     worst, nonzero));
}

Outcome double_robustness() {
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> prop(0.05, 0.95);
  std::uniform_real_distribution<double> outcome(0.0, 1.0);
  double worst_i = 0.0;
  double worst_ii = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 1001; seed <= 1060; ++seed) {
    const ScmPair pair = ft::random_pair(seed, 4);
    for (const StageTriple& st : kDataStages) {
      const ft::StagedTables t = ft::staged_tables(pair, st);
      const int nz = t.levels.nz();
      const int nw = t.levels.nw();
      for (const PoQuery& q : queries_at(st)) {
        const double target = ft::oracle_po(pair, q);

        // (i) exact outcome regressions, every propensity replaced; the
        // P(x | Z) ones stay functions of Z alone
        std::vector<std::array<double, 2>> bad_z(static_cast<std::size_t>(nz));
        std::vector<std::array<double, 2>> bad_zw(static_cast<std::size_t>(nz * nw));
        for (auto& b : bad_z) b = {prop(g), prop(g)};
        for (auto& b : bad_zw) b = {prop(g), prop(g)};
        const double mean_i = ft::population_if_mean(t, q, [&](int z, int w) {
          NuisanceValues nv = ft::exact_nuisances(t, q, z, w);
          const auto& bz = bad_z[static_cast<std::size_t>(z)];
          const auto& bzw = bad_zw[static_cast<std::size_t>(z * nw + w)];
          nv.p_xz_given_z = bz[0];
          nv.p_xw_given_z = q.x_w == q.x_z ? bz[0] : bz[1];
          nv.p_xw_given_zw = bzw[0];
          nv.p_xy_given_zw = q.x_y == q.x_w ? bzw[0] : bzw[1];
          return nv;
        });
        worst_i = std::max(worst_i, std::abs(mean_i - target));

        // (ii) exact propensities, arbitrary mu and its nested mean
        std::vector<double> mu(static_cast<std::size_t>(nz * nw));
        for (double& m : mu) m = outcome(g);
        const double mean_ii = ft::population_if_mean(t, q, [&](int z, int w) {
          NuisanceValues nv = ft::exact_nuisances(t, q, z, w);
          nv.mu = mu[static_cast<std::size_t>(z * nw + w)];
          double eta = 0.0;
          for (int wi = 0; wi < nw; ++wi) eta += mu[static_cast<std::size_t>(z * nw + wi)] * t.w_given_xz(wi, q.x_w, z);
          nv.eta = eta;
          return nv;
        });
        worst_ii = std::max(worst_ii, std::abs(mean_ii - target));
        ++checked;
      }
    }
  }
  return verdict(worst_i <= 1e-10 && worst_ii <= 1e-10,
                 fmt("%d queries on 60 pairs; max error (i) %.2e, (ii) %.2e", checked, worst_i, worst_ii));
}

StagedSample toy_sample(const ScmPair& pair, const StageTriple& st, std::size_t n, std::uint64_t seed) {
  return make_staged_sample(pair.levels, sample_staged(pair, st, n, seed), st);
}

Outcome calibration() {
  const ScmPair pair = resolve_pair("toyA");
  const StageTriple st = kOutcomeStage;
  std::array<int, 3> covered{};
  std::array<double, 3> truth{};
  for (std::size_t k = 0; k < 3; ++k) truth[k] = ft::oracle_effect(pair, kPathwayKinds[k], st, kT, 1);
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    StageDatasets data;
    data.emplace(st, toy_sample(pair, st, 20000, 50000 + static_cast<std::uint64_t>(r)));
    EstimatorOptions opts;
    opts.seed = static_cast<std::uint64_t>(r);
    for (std::size_t k = 0; k < 3; ++k) {
      const EffectValue e = estimate_effect(data, kPathwayKinds[k], st, kT, 1, opts).effect;
      if (e.ci95 && e.ci95->lo <= truth[k] && truth[k] <= e.ci95->hi) ++covered[k];
    }
  }
  bool ok = true;
  std::string detail = "coverage over 500 reps at n = 20000:";
  for (std::size_t k = 0; k < 3; ++k) {
    const double c = covered[k] / static_cast<double>(reps);
    ok = ok && c >= 0.93 && c <= 0.97;
    detail += fmt(" %s %.3f", std::string(to_string(kPathwayKinds[k])).c_str(), c);
  }
  return verdict(ok, detail);
}

Outcome consistency() {
  const ScmPair pair = resolve_pair("toyA");
  const StageTriple st = kOutcomeStage;
  // the distinct queries behind DE, IE and SE at this stage
  std::vector<PoQuery> qs;
  for (EffectKind k : kPathwayKinds) {
    const EffectQueries eq = effect_queries(k, st, kT, 1);
    for (const PoQuery& q : {eq.first, eq.second}) {
      if (std::find(qs.begin(), qs.end(), q) == qs.end()) qs.push_back(q);
    }
  }
  std::vector<double> truth;
  for (const PoQuery& q : qs) truth.push_back(ft::oracle_po(pair, q));
  std::vector<int> in_plugin(qs.size(), 0), in_dr(qs.size(), 0);
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const StagedSample data = toy_sample(pair, st, 100000, 90000 + static_cast<std::uint64_t>(r));
    EstimatorOptions opts;
    opts.seed = static_cast<std::uint64_t>(r);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const EstimateWithIF p = estimate_plugin(data, qs[i], opts);
      const EstimateWithIF d = estimate_po(data, qs[i], opts);
      if (std::abs(p.theta_hat - truth[i]) <= 3.0 * p.se) ++in_plugin[i];
      if (std::abs(d.theta_hat - truth[i]) <= 3.0 * d.se) ++in_dr[i];
    }
  }
  const double min_plugin = *std::min_element(in_plugin.begin(), in_plugin.end()) / static_cast<double>(reps);
  const double min_dr = *std::min_element(in_dr.begin(), in_dr.end()) / static_cast<double>(reps);
  return verdict(min_plugin >= 0.95 && min_dr >= 0.95,
                 fmt("%zu queries, 200 reps at n = 100000; worst share within 3 SE: plug-in %.3f, DR %.3f", qs.size(),
                     min_plugin, min_dr));
}

const Waterfall& find_waterfall(const AuditReport& r, EffectKind k) {
  return *std::find_if(r.waterfalls.begin(), r.waterfalls.end(), [&](const Waterfall& w) { return w.kind == k; });
}

bool series_matches(const Waterfall& w, const std::array<double, 5>& pct) {
  if (w.bars.size() != 5) return false;
  for (std::size_t i = 0; i < 5; ++i) {
    if (std::abs(w.bars[i].value * 100.0 - pct[i]) > 1e-9) return false;
  }
  return true;
}

Outcome analysis_fixtures() {
  std::vector<AuditReport> gemma;
  for (const char* f : {"gemma3-27b_nsduh.json", "gemma3-27b_brfss.json", "gemma3-27b_acs.json"}) {
    gemma.push_back(load_report(kFixtures / "reports" / f));
  }
  const auto rows = stereotype_summary(signatures_from_reports(gemma), SummaryScope::all);
  bool ok = rows.size() == 1;
  std::string detail;
  if (ok) {
    const auto& row = rows[0];
    const long a = std::lround(row.percent(Stereotype::amplify));
    const long d = std::lround(row.percent(Stereotype::dampen));
    const long v = std::lround(row.percent(Stereotype::reverse));
    ok = a == 44 && d == 30 && v == 26;
    detail = fmt("%s %ld/%ld/%ld of %zu effects", row.model.c_str(), a, d, v, row.total());
  }

  const AuditReport nsduh = gemma[0];
  const AuditReport qwen = load_report(kFixtures / "reports" / "qwen35-27b_brfss.json");
  const bool de_ok = series_matches(find_waterfall(nsduh, EffectKind::DE), {-3.8, 2.0, 6.1, -5.3, -1.0});
  const bool ie_ok = series_matches(find_waterfall(qwen, EffectKind::IE), {2.7, 0.5, -3.3, -6.2, -6.3});
  ok = ok && de_ok && ie_ok;

  int waterfalls = 0;
  int broken = 0;
  for (const AuditReport& r : {gemma[0], gemma[1], gemma[2], qwen}) {
    for (const Waterfall& w : r.waterfalls) {
      ++waterfalls;
      if (!w.consistent || std::abs(w.residual) > 1e-9) ++broken;
    }
  }
  for (const auto& [kind, seq] : {std::pair{EffectKind::DE, std::array<double, 5>{-3.8, 2.0, 6.1, -5.3, -1.0}},
                                  std::pair{EffectKind::IE, std::array<double, 5>{2.7, 0.5, -3.3, -6.2, -6.3}}}) {
    ++waterfalls;
    if (!waterfall_from_terms(kind, seq).consistent) ++broken;
  }
  ok = ok && broken == 0;
  detail += fmt("; DE series %s, IE series %s; %d/%d waterfalls telescope", de_ok ? "match" : "differ",
                ie_ok ? "match" : "differ", waterfalls - broken, waterfalls);
  return verdict(ok, detail);
}

Outcome clustering() {
  std::mt19937_64 g(77);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  auto random_matrix = [&](std::size_t n) {
    Matrix d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = u(g);
    }
    return d;
  };
  int mismatches = 0;
  int matrices = 0;
  for (int trial = 0; trial < 110; ++trial) {
    const Matrix d = random_matrix(2 + static_cast<std::size_t>(trial % 11));
    ++matrices;
    for (bool squared : {true, false}) {
      const auto a = ward_cluster(d, squared ? WardMode::squared : WardMode::linear);
      const auto b = ft::naive_ward(d, squared);
      bool same = a.size() == b.size();
      for (std::size_t k = 0; same && k < a.size(); ++k) {
        same = a[k].a == b[k].a && a[k].b == b[k].b && a[k].size == b[k].size &&
               std::abs(a[k].height - b[k].height) <= 1e-10 * std::max(1.0, std::abs(b[k].height));
      }
      if (!same) ++mismatches;
    }
  }

  // Null: distances carry no family information.
  const std::vector<std::string> families{"a", "a", "b", "b", "c", "c", "d", "d", "e", "f"};
  int rejections = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const Matrix d = random_matrix(families.size());
    const PermutationResult pr = family_permutation_test(d, families, 999, 3000 + static_cast<std::uint64_t>(t));
    if (pr.p_value < 0.05) ++rejections;
  }
  const double rate = rejections / static_cast<double>(trials);
  return verdict(mismatches == 0 && rate <= 0.08,
                 fmt("ward: %d mismatches over %d matrices x 2 modes; null trials with p < 0.05: %d/%d (%.3f)",
                     mismatches, matrices, rejections, trials, rate));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ArgmaxCase {
  std::vector<std::pair<std::string, double>> probs;
  int n_options;
  char want;  // '-' when no option letter is present
};

Outcome elicitation() {
  const SfmSpec spec = load_spec(kFixtures / "nsduh_spec.json");
  const fs::path dir = fs::temp_directory_path() / "fga_acceptance_elicit";
  fs::remove_all(dir);
  fs::create_directories(dir);

  StagedDataset base = empty_dataset(spec, kRealWorldStage);
  for (std::size_t r = 0; r < 100; ++r) {
    for (std::size_t v = 0; v < base.columns.size(); ++v) {
      base.columns[v].push_back(static_cast<int>((r * 11 + v * 5 + r / 7) % base.levels[v].size()));
    }
  }
  base.meta.attempted = 100;

  ft::FixtureModel model{&spec, 9, 7, 13};
  ScriptedEndpoint live([model](const ChatRequest& r) { return model(r); });
  RecordingEndpoint rec(live);
  GenerationJob job;
  job.spec = &spec;
  job.base = base;
  job.target_stage = kMediatorStage;
  job.retry.retries = 2;
  job.retry.base_delay = std::chrono::milliseconds(0);
  job.concurrency = 4;
  const StagedDataset first = elicit_stage(job, rec, rec);
  save_dataset(first, dir / "live.csv");
  rec.save(dir / "t.jsonl");

  ReplayEndpoint replay = ReplayEndpoint::load(dir / "t.jsonl");
  job.concurrency = 1;
  save_dataset(elicit_stage(job, replay, replay), dir / "replay.csv");
  const bool same = slurp(dir / "live.csv") == slurp(dir / "replay.csv") && first.size() > 0;
  const std::size_t rows = first.size();
  fs::remove_all(dir);

  const std::vector<ArgmaxCase> cases{
      {{{"A", 0.6}, {"B", 0.3}}, 4, 'A'},
      {{{"B", 0.5}, {"A", 0.4}}, 4, 'B'},
      {{{"A", 0.4}, {" B", 0.25}, {"B.", 0.2}}, 4, 'B'},
      {{{"C", 0.3}, {"B", 0.3}}, 4, 'B'},
      {{{"E", 0.8}, {"A)", 0.1}}, 3, 'A'},
      {{{"The", 0.9}, {"AB", 0.05}}, 3, '-'},
      {{{" D", 0.35}, {"D", 0.1}, {"C", 0.4}}, 4, 'D'},
      {{{"F", 0.2}, {"E", 0.19}}, 6, 'F'},
      {{{"F", 0.2}, {"E", 0.19}}, 5, 'E'},
      {{{"a", 0.7}, {"B", 0.2}}, 4, 'B'},
      {{{"A", 0.25}, {"B", 0.25}, {"C", 0.25}, {"D", 0.25}}, 4, 'A'},
      {{{"D", 0.2}, {"C", 0.2}, {" D", 0.05}}, 4, 'D'},
      {{{"G", 0.3}, {" G.", 0.3}, {"A", 0.35}}, 7, 'G'},
      {{{"G", 0.3}, {" G.", 0.3}, {"A", 0.35}}, 6, 'A'},
      {{{"B)", 0.15}, {"B.", 0.15}, {" B", 0.15}, {"C", 0.4}}, 3, 'B'},
      {{{"\n", 0.5}, {"Answer", 0.3}, {"I", 0.2}}, 6, '-'},
      {{{"I", 0.5}, {"A", 0.1}}, 6, 'A'},
      {{{"I", 0.5}, {"A", 0.1}}, 9, 'I'},
      {{{"yes", 0.6}, {"B", 0.01}}, 2, 'B'},
      {{{"A", 0.3}, {"B", 0.29}, {" B", 0.02}}, 2, 'B'},
      {{{"C.", 0.33}, {"A", 0.33}}, 3, 'A'},
      {{{" E ", 0.4}, {"B", 0.39}}, 5, 'E'},
  };
  int argmax_ok = 0;
  for (const ArgmaxCase& c : cases) {
    TokenLogprobs top;
    for (const auto& [tok, p] : c.probs) top.push_back({tok, std::log(p)});
    const AnnotationResult a = choose_letter(top, c.n_options);
    const bool good = c.want == '-' ? (a.inconclusive && !a.letter) : (a.letter == c.want && a.level == c.want - 'A');
    if (good) ++argmax_ok;
  }

  // hand tallies: 140 pairs, 7 inconclusive, 128 of 133 agree; and 144
  // pairs, 7 inconclusive, 132 of 137 agree
  auto tally = [](int pairs, int inconclusive, int agree) {
    std::vector<std::optional<std::string>> human, ann;
    for (int i = 0; i < pairs; ++i) {
      if (i < inconclusive) {
        human.push_back(std::nullopt);
        ann.push_back("A");
      } else if (i < inconclusive + agree) {
        human.push_back("B");
        ann.push_back("B");
      } else {
        human.push_back("B");
        ann.push_back(i % 2 ? std::optional<std::string>("C") : std::nullopt);
      }
    }
    return validate_annotator(human, ann);
  };
  const AnnotatorValidation v140 = tally(140, 7, 128);
  const AnnotatorValidation v144 = tally(144, 7, 132);
  auto round1 = [](double x) { return std::round(x * 1000.0) / 10.0; };
  const bool tallies = v140.pairs == 140 && v140.conclusive == 133 && v140.agree == 128 &&
                       round1(v140.inconclusive_rate) == 5.0 && round1(*v140.agreement_rate) == 96.2 &&
                       round1(v144.inconclusive_rate) == 4.9 && round1(*v144.agreement_rate) == 96.4;

  return verdict(same && argmax_ok == static_cast<int>(cases.size()) && tallies,
                 fmt("replay of a 100-row job %s (%zu rows kept); argmax %d/%zu fixtures; tallies %.1f%%/%.1f%% "
                     "and %.1f%%/%.1f%% %s",
                     same ? "byte-identical" : "differs", rows, argmax_ok, cases.size(),
                     100 * v140.inconclusive_rate, 100 * *v140.agreement_rate, 100 * v144.inconclusive_rate,
                     100 * *v144.agreement_rate, tallies ? "match" : "differ"));
}

Outcome survey_baselines() {
  return {Status::skip, "needs NSDUH, BRFSS and ACS 2023 extracts, which are not bundled"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"identification equivalence", identification},
      {"decomposition identities", identities},
      {"double robustness", double_robustness},
      {"CI calibration", calibration},
      {"estimator consistency", consistency},
      {"analysis fixtures", analysis_fixtures},
      {"clustering and permutation", clustering},
      {"elicitation determinism", elicitation},
      {"real-world baselines", survey_baselines},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
    if (o.status == Status::fail) ++failed;
    std::printf("%s %zu %s: %s (%.1fs)\n", tag, i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
