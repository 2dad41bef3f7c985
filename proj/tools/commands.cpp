#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "fga/audit.hpp"
#include "fga/dataset.hpp"
#include "fga/elicitation.hpp"
#include "fga/scm_io.hpp"

namespace fs = std::filesystem;

namespace fga::cli {
namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * v);
  return buf;
}

std::string stage_code(const StageTriple& s) {
  std::string out;
  for (Env e : {s.z, s.w, s.y}) out += std::string(to_string(e));
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void attach_config(nlohmann::json& meta, const RunContext& ctx) {
  if (!ctx.config_text.empty()) meta["run_config"] = ctx.config_text;
}

SfmSpec spec_for_pair(const ScmPair& pair, const std::string& name) {
  SfmSpec spec;
  spec.name = name;
  const std::pair<const char*, Role> blocks[] = {{"X", Role::X}, {"Z", Role::Z}, {"W", Role::W}, {"Y", Role::Y}};
  const std::vector<std::string>* lv[] = {&pair.levels.x, &pair.levels.z, &pair.levels.w, &pair.levels.y};
  for (int i = 0; i < 4; ++i) {
    VariableSpec v;
    v.name = blocks[i].first;
    v.role = blocks[i].second;
    v.levels = *lv[i];
    v.annotator_labels = v.levels;
    v.mention = v.name;
    v.question = v.name;
    spec.variables.push_back(std::move(v));
  }
  spec.x0 = pair.levels.x.at(0);
  spec.x1 = pair.levels.x.at(1);
  spec.y_positive = pair.levels.y.back();
  spec.population_context = "Simulated population.";
  spec.validate();
  return spec;
}

void print_report(const AuditReport& r) {
  std::cout << "model: " << (r.model.empty() ? "-" : r.model) << "  dataset: " << (r.dataset.empty() ? "-" : r.dataset)
            << '\n';
  std::cout << "stage          kind   value      95% CI                 sig\n";
  for (const auto& [stage, by_kind] : r.effects) {
    for (const auto& [kind, e] : by_kind) {
      char line[160];
      if (e.se) {
        std::snprintf(line, sizeof line, "%-14s %-6s %-10s [%s, %s]  %s", to_string(stage).c_str(),
                      std::string(to_string(kind)).c_str(), pct(e.value).c_str(), pct(e.ci95->lo).c_str(),
                      pct(e.ci95->hi).c_str(), e.significant() ? "*" : "");
      } else {
        std::snprintf(line, sizeof line, "%-14s %-6s %-10s", to_string(stage).c_str(),
                      std::string(to_string(kind)).c_str(), pct(e.value).c_str());
      }
      std::cout << line << '\n';
    }
  }
  for (const Waterfall& w : r.waterfalls) {
    std::cout << "waterfall " << to_string(w.kind) << ":";
    for (const auto& b : w.bars) std::cout << ' ' << b.label << '=' << pct(b.value);
    std::cout << (w.consistent ? "" : "  (does not telescope)") << '\n';
  }
}

}  // namespace

int cmd_simulate(const SimulateArgs& a, const RunContext& ctx) {
  const ScmPair pair = resolve_pair(a.pair);
  std::vector<StageTriple> stages;
  for (const std::string& s : a.stages) {
    if (s == "all") {
      stages.insert(stages.end(), std::begin(kDataStages), std::end(kDataStages));
      continue;
    }
    const StageTriple st = parse_stage(s);
    require_monotone(st);
    stages.push_back(st);
  }
  const SfmSpec spec = spec_for_pair(pair, a.pair);
  fs::create_directories(a.out);
  save_spec(spec, fs::path(a.out) / "spec.json");

  for (const StageTriple& st : stages) {
    Rng derive = make_stream(a.seed, static_cast<std::uint64_t>(st.code()));
    const std::uint64_t stage_seed = derive();
    const Sample rows = sample_staged(pair, st, a.n, stage_seed);
    StagedDataset ds = empty_dataset(spec, st);
    ds.columns = {rows.x, rows.z, rows.w, rows.y};
    ds.meta.model_id = "scm:" + a.pair;
    ds.meta.seed = a.seed;
    ds.meta.attempted = rows.size();
    ds.meta.settings = {{"n", a.n}, {"pair", a.pair}};
    ds.meta.provenance = {{"source", "simulate"}, {"stage_seed", stage_seed}};
    attach_config(ds.meta.provenance, ctx);
    const fs::path path = fs::path(a.out) / ("D_" + stage_code(st) + ".csv");
    save_dataset(ds, path);
    std::cout << path.string() << ": " << ds.size() << " rows at stage " << to_string(st) << '\n';
  }
  return kOk;
}

int cmd_elicit(const ElicitArgs& a, const RunContext& ctx) {
  const SfmSpec spec = load_spec(a.spec);
  const StageTriple stage = parse_stage(a.stage);
  require_monotone(stage);
  if (stage == kRealWorldStage) throw ValidationError("the real-world stage is not elicited");

  GenerationJob job;
  job.spec = &spec;
  job.target_stage = stage;
  if (!a.base.empty()) {
    job.base = load_dataset(a.base);
    if (job.base.meta.stage != kRealWorldStage) {
      throw ValidationError("base dataset must be at stage " + to_string(kRealWorldStage));
    }
  } else if (stage != kModelStage) {
    throw ValidationError("--base is required for stage " + to_string(stage));
  }
  job.rows = a.rows;
  if (stage == kModelStage && job.base.size() == 0 && a.rows == 0) {
    throw ValidationError("--rows is required for the full-replacement stage without --base");
  }
  job.generation.model = a.model;
  job.annotator.model = a.annotator_model.empty() ? a.model : a.annotator_model;
  job.retry.retries = a.retries;
  job.retry.base_delay = std::chrono::milliseconds(a.backoff_ms);
  job.concurrency = a.concurrency;
  job.seed = a.seed;

  std::unique_ptr<ChatEndpoint> inner;
  if (!a.replay.empty()) {
    inner = std::make_unique<ReplayEndpoint>(ReplayEndpoint::load(a.replay));
  } else {
    inner = std::make_unique<OpenAIEndpoint>(endpoint_config_from_env(a.model));
  }
  RecordingEndpoint recorder(*inner);

  JobResult result;
  StagedDataset ds = elicit_stage(job, recorder, recorder, &result);
  attach_config(ds.meta.provenance, ctx);
  save_dataset(ds, a.out);

  const std::string transcript = !a.record.empty() ? a.record
                                 : a.replay.empty() ? a.out + ".transcript.jsonl"
                                                    : std::string{};
  if (!transcript.empty()) recorder.save(transcript);

  std::cout << a.out << ": " << ds.size() << " rows at stage " << to_string(stage) << ", "
            << ds.meta.dropped << " dropped\n";
  std::cout << result.report.dump(2) << '\n';
  return kOk;
}

int cmd_decompose(const DecomposeArgs& a, const RunContext& ctx) {
  const fs::path spec_path = !a.spec.empty() ? fs::path(a.spec) : fs::path(a.data.front()).parent_path() / "spec.json";
  const SfmSpec spec = load_spec(spec_path);
  StageDatasets datasets;
  std::string model = a.model;
  for (const std::string& path : a.data) {
    const StagedDataset ds = load_dataset(path);
    const StageTriple st = ds.meta.stage;
    require_monotone(st);
    if (datasets.count(st)) throw ValidationError("two datasets at stage " + to_string(st));
    if (model.empty() && st == kModelStage) model = ds.meta.model_id;
    datasets.emplace(st, encode(ds, spec));
  }
  DecomposeOptions opts;
  opts.estimator.folds = a.folds;
  opts.estimator.seed = a.seed;
  opts.estimator.alpha = a.alpha;
  opts.real_only = a.real_only;
  opts.model = model;
  opts.family = a.family;
  opts.dataset = a.dataset.empty() ? spec.name : a.dataset;
  AuditReport r = decompose(datasets, spec.transition(), spec.y_target(), opts);
  attach_config(r.provenance, ctx);
  if (!a.out.empty()) {
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    save_report(r, a.out);
  }
  print_report(r);
  return kOk;
}

int cmd_analyze(const AnalyzeArgs& a, const RunContext& ctx) {
  std::vector<AuditReport> reports;
  for (const std::string& p : a.reports) reports.push_back(load_report(p));
  for (const std::string& f : a.families) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw ValidationError("--family expects MODEL=FAMILY, got '" + f + "'");
    for (AuditReport& r : reports) {
      if (r.model == f.substr(0, eq)) r.family = f.substr(eq + 1);
    }
  }
  const std::vector<BiasSignature> sigs = signatures_from_reports(reports);
  std::map<std::string, std::string> family_of;
  for (const AuditReport& r : reports) family_of[r.model] = r.family.empty() ? r.model : r.family;

  fs::create_directories(a.out);
  const fs::path out(a.out);

  nlohmann::json sig_json = nlohmann::json::array();
  std::vector<std::vector<double>> vectors;
  std::vector<std::string> families;
  for (const auto& s : sigs) {
    nlohmann::json ds = nlohmann::json::array();
    for (const auto& d : s.datasets) ds.push_back(d.dataset);
    sig_json.push_back({{"model", s.model}, {"family", family_of[s.model]}, {"datasets", ds}, {"signature", s.vector()}});
    vectors.push_back(s.vector());
    families.push_back(family_of[s.model]);
  }
  write_json(out / "signatures.json", sig_json);

  const SummaryScope scope = a.scope == "disadvantage" ? SummaryScope::disadvantage : SummaryScope::all;
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& s : sigs) {
    for (const auto& l : label_signature(s)) {
      labels.push_back({{"model", s.model},
                        {"dataset", l.dataset},
                        {"kind", std::string(to_string(l.kind))},
                        {"stage", to_string(l.stage)},
                        {"real", l.real},
                        {"model_value", l.model},
                        {"label", std::string(to_string(l.label))},
                        {"direction", l.disadvantage ? "disadvantage" : "advantage"}});
    }
  }
  nlohmann::json summary = nlohmann::json::array();
  std::cout << "model                     amplify  dampen  reverse  (n)\n";
  for (const auto& row : stereotype_summary(sigs, scope)) {
    summary.push_back({{"model", row.model},
                       {"amplify", row.percent(Stereotype::amplify)},
                       {"dampen", row.percent(Stereotype::dampen)},
                       {"reverse", row.percent(Stereotype::reverse)},
                       {"effects", row.total()}});
    char line[160];
    std::snprintf(line, sizeof line, "%-25s %6.0f%% %6.0f%% %7.0f%%  (%zu)", row.model.c_str(),
                  row.percent(Stereotype::amplify), row.percent(Stereotype::dampen),
                  row.percent(Stereotype::reverse), row.total());
    std::cout << line << '\n';
  }
  write_json(out / "stereotypes.json", {{"scope", a.scope}, {"summary", summary}, {"labels", labels}});

  const Matrix d = l1_matrix(vectors);
  nlohmann::json models = nlohmann::json::array();
  for (const auto& s : sigs) models.push_back(s.model);
  write_json(out / "distances.json", {{"models", models}, {"l1", d}});

  const WardMode mode = a.ward == "linear" ? WardMode::linear : WardMode::squared;
  const auto merges = ward_cluster(d, mode);
  write_json(out / "ward.json", {{"models", models}, {"mode", a.ward}, {"merges", to_json(merges)}});

  nlohmann::json perm;
  std::set<std::string> seen;
  bool has_pair = false;
  for (const auto& f : families) has_pair = has_pair || !seen.insert(f).second;
  if (has_pair) {
    const PermutationResult pr = family_permutation_test(d, families, a.perm, a.seed);
    perm = to_json(pr);
    perm["seed"] = a.seed;
    std::printf("family permutation test: observed %.4f, null %.4f, p = %.4f\n", pr.observed_mean, pr.null_mean,
                pr.p_value);
  } else {
    perm = {{"skipped", "no within-family pairs"}};
  }
  write_json(out / "permutation.json", perm);

  nlohmann::json meta{{"reports", a.reports}, {"ward_mode", a.ward}, {"scope", a.scope},
                      {"perm", a.perm},       {"seed", a.seed}};
  attach_config(meta, ctx);
  write_json(out / "analysis.json", meta);
  return kOk;
}

int cmd_report(const ReportArgs& a) {
  for (const std::string& p : a.reports) {
    print_report(load_report(p));
    std::cout << '\n';
  }
  return kOk;
}

}  // namespace fga::cli
