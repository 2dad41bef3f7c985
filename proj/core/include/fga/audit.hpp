#pragma once

// Effect reports for one (model, dataset) audit and the glue that turns a
// set of reports into bias signatures.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/analysis.hpp"
#include "fga/estimation.hpp"

namespace fga {

struct DecomposeOptions {
  EstimatorOptions estimator;
  /// Only the real-world stage is required and estimated.
  bool real_only = false;
  std::string model;
  std::string family;
  std::string dataset;
};

struct AuditReport {
  std::string model;
  std::string family;
  std::string dataset;
  Transition transition;
  int y_target = 1;
  /// Reported-convention effects per stage.
  std::map<StageTriple, std::map<EffectKind, EffectValue>> effects;
  std::vector<Waterfall> waterfalls;
  nlohmann::json provenance = nlohmann::json::object();

  const EffectValue& effect(const StageTriple& stage, EffectKind kind) const;
};

AuditReport decompose(const StageDatasets& datasets, Transition t, int y_target, const DecomposeOptions& opts);

nlohmann::json to_json(const AuditReport& r);
AuditReport audit_report_from_json(const nlohmann::json& j);
AuditReport load_report(const std::filesystem::path& path);
void save_report(const AuditReport& r, const std::filesystem::path& path);

/// Real-world and signature-stage values of one report.
DatasetSignature dataset_signature(const AuditReport& r);

/// Groups reports by model; datasets are ordered by name and every model
/// must cover the same datasets.
std::vector<BiasSignature> signatures_from_reports(const std::vector<AuditReport>& reports);

}  // namespace fga
