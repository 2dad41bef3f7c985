#pragma once

// Survey ingestion, weighted row sampling, staged dataset assembly and
// persistence (CSV plus a JSON metadata sidecar).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/csv.hpp"
#include "fga/estimation.hpp"
#include "fga/spec.hpp"

namespace fga {

struct DatasetMeta {
  StageTriple stage;
  std::string model_id;
  std::uint64_t seed = 0;
  nlohmann::json settings = nlohmann::json::object();
  std::string prompt_hash;
  std::size_t attempted = 0;
  std::size_t dropped = 0;
  /// Free-form chain of where the rows came from.
  nlohmann::json provenance = nlohmann::json::object();

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Level indices per variable, column-major, in spec declaration order.
struct StagedDataset {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> levels;
  std::vector<std::vector<int>> columns;
  DatasetMeta meta;

  std::size_t size() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t column_index(std::string_view name) const;
  void validate() const;

  friend bool operator==(const StagedDataset&, const StagedDataset&) = default;
};

StagedDataset empty_dataset(const SfmSpec& spec, const StageTriple& stage);

struct WeightedTable {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> levels;
  std::vector<std::vector<int>> columns;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Reads a CSV whose header names every spec variable. An empty
/// weight_column gives every row weight 1.
WeightedTable load_survey(const std::filesystem::path& path, const SfmSpec& spec,
                          const std::string& weight_column);
WeightedTable survey_from_csv(const CsvTable& table, const SfmSpec& spec,
                              const std::string& weight_column);

/// n draws with replacement, probability proportional to weight.
StagedDataset weighted_sample(const WeightedTable& table, std::size_t n, std::uint64_t seed);

/// Generated level indices for one variable; nullopt marks an inconclusive
/// annotation.
using GeneratedColumn = std::vector<std::optional<int>>;
using GeneratedColumns = std::map<std::string, GeneratedColumn>;

/// Replaces the columns that flip to s1 at target_stage and drops rows with
/// an inconclusive generated value.
StagedDataset assemble_stage(const StagedDataset& base, const GeneratedColumns& generated,
                             const StageTriple& target_stage, const SfmSpec& spec);

/// Product-codes Z and W for estimation.
StagedSample encode(const StagedDataset& ds, const SfmSpec& spec);

std::filesystem::path meta_path(const std::filesystem::path& csv_path);
void save_dataset(const StagedDataset& ds, const std::filesystem::path& csv_path);
StagedDataset load_dataset(const std::filesystem::path& csv_path);

nlohmann::json to_json(const DatasetMeta& m);
DatasetMeta meta_from_json(const nlohmann::json& j);

}  // namespace fga
