#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fga::cli {

enum ExitCode { kOk = 0, kValidation = 2, kEnvironment = 3, kEndpoint = 4 };

struct SimulateArgs {
  std::string pair = "toyA";
  std::vector<std::string> stages{"s0,s0,s0"};
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out = ".";
};

struct ElicitArgs {
  std::string spec;
  std::string base;
  std::string stage = "s0,s1,s1";
  std::string model;
  std::string annotator_model;
  std::string out;
  std::string replay;
  std::string record;
  std::size_t rows = 0;
  int concurrency = 4;
  int retries = 3;
  int backoff_ms = 500;
  std::uint64_t seed = 0;
};

struct DecomposeArgs {
  std::vector<std::string> data;
  std::string spec;
  bool real_only = false;
  std::string model;
  std::string family;
  std::string dataset;
  int folds = 5;
  std::uint64_t seed = 0;
  double alpha = 0.5;
  std::string out;
};

struct AnalyzeArgs {
  std::vector<std::string> reports;
  std::vector<std::string> families;
  std::string out = ".";
  int perm = 5000;
  std::uint64_t seed = 1;
  std::string ward = "squared";
  std::string scope = "all";
};

struct ReportArgs {
  std::vector<std::string> reports;
};

/// Echo of the run configuration, stored in output metadata.
struct RunContext {
  std::string config_text;
};

int cmd_simulate(const SimulateArgs& a, const RunContext& ctx);
int cmd_elicit(const ElicitArgs& a, const RunContext& ctx);
int cmd_decompose(const DecomposeArgs& a, const RunContext& ctx);
int cmd_analyze(const AnalyzeArgs& a, const RunContext& ctx);
int cmd_report(const ReportArgs& a);

}  // namespace fga::cli
