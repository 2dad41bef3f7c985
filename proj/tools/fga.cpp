#include <fstream>
#include <iostream>
#include <iterator>

#include <CLI11.hpp>

#include "commands.hpp"
#include "fga/elicitation.hpp"

using namespace fga::cli;

int main(int argc, char** argv) {
  CLI::App app{"fga: causal fairness audits of generative models"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Run-config file (TOML/INI) with per-command sections");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Sample staged datasets from a two-environment SCM");
  s->add_option("--pair", sim.pair, "toyA, toyA-ml or a path to an scm_pair JSON file");
  s->add_option("--stage", sim.stages, "Stage triple(s), e.g. s0,s0,s1; 'all' for the four data stages")
      ->delimiter(';');
  s->add_option("--n", sim.n, "Rows per stage")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "Sampling seed");
  s->add_option("--out", sim.out, "Output directory");

  ElicitArgs el;
  auto* e = app.add_subcommand("elicit", "Generate a staged dataset from a model endpoint");
  e->add_option("--spec", el.spec, "Spec JSON")->required();
  e->add_option("--base", el.base, "Real-world dataset supplying known facts");
  e->add_option("--stage", el.stage, "Target stage");
  e->add_option("--model", el.model, "Generator model id")->required();
  e->add_option("--annotator-model", el.annotator_model, "Annotator model id (defaults to --model)");
  e->add_option("--out", el.out, "Output CSV path")->required();
  e->add_option("--replay", el.replay, "Serve responses from a recorded transcript");
  e->add_option("--record", el.record, "Transcript path (default: <out>.transcript.jsonl)");
  e->add_option("--rows", el.rows, "Rows to generate for the full-replacement stage without --base");
  e->add_option("--concurrency", el.concurrency, "Concurrent requests")->check(CLI::PositiveNumber);
  e->add_option("--retries", el.retries, "Retry budget per request")->check(CLI::NonNegativeNumber);
  e->add_option("--backoff-ms", el.backoff_ms, "Initial retry backoff")->check(CLI::NonNegativeNumber);
  e->add_option("--seed", el.seed, "Job ordering seed");

  DecomposeArgs de;
  auto* d = app.add_subcommand("decompose", "Estimate effects and stage-wise decompositions");
  d->add_option("data", de.data, "Staged dataset CSV files")->required();
  d->add_option("--spec", de.spec, "Spec JSON (default: spec.json next to the first dataset)");
  d->add_flag("--real-only", de.real_only, "Only estimate real-world effects");
  d->add_option("--model", de.model, "Model id recorded in the report");
  d->add_option("--family", de.family, "Model family recorded in the report");
  d->add_option("--dataset", de.dataset, "Dataset name recorded in the report");
  d->add_option("--folds", de.folds, "Cross-fitting folds")->check(CLI::Range(2, 1000));
  d->add_option("--seed", de.seed, "Fold seed");
  d->add_option("--alpha", de.alpha, "Laplace smoothing")->check(CLI::NonNegativeNumber);
  d->add_option("--out", de.out, "Report JSON path");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Signatures, stereotype labels, distances, clustering");
  a->add_option("reports", an.reports, "Report JSON files")->required();
  a->add_option("--family", an.families, "MODEL=FAMILY overrides");
  a->add_option("--out", an.out, "Output directory");
  a->add_option("--perm", an.perm, "Permutations")->check(CLI::PositiveNumber);
  a->add_option("--seed", an.seed, "Permutation seed");
  a->add_option("--ward", an.ward, "Ward recurrence on squared or linear dissimilarities")
      ->check(CLI::IsMember({"squared", "linear"}));
  a->add_option("--scope", an.scope, "Stereotype summary over all effects or disadvantage ones")
      ->check(CLI::IsMember({"all", "disadvantage"}));

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Print reports as text tables");
  r->add_option("reports", rp.reports, "Report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kValidation;
  }

  RunContext ctx;
  if (auto* cfg = app.get_config_ptr(); cfg && cfg->count() > 0) {
    std::ifstream in(cfg->as<std::string>());
    ctx.config_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  try {
    if (*s) return cmd_simulate(sim, ctx);
    if (*e) return cmd_elicit(el, ctx);
    if (*d) return cmd_decompose(de, ctx);
    if (*a) return cmd_analyze(an, ctx);
    if (*r) return cmd_report(rp);
  } catch (const fga::ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kEnvironment;
  } catch (const fga::AuthError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kEnvironment;
  } catch (const fga::EndpointError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kEndpoint;
  } catch (const fga::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kValidation;
  }
  return kOk;
}
