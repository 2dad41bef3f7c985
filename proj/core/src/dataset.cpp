#include "fga/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace fga {

std::size_t StagedDataset::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw ValidationError("dataset has no column '" + std::string(name) + "'");
}

void StagedDataset::validate() const {
  if (names.size() != levels.size() || names.size() != columns.size()) {
    throw ValidationError("dataset names, levels and columns disagree in count");
  }
  const std::size_t n = size();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != n) throw ValidationError("column '" + names[c] + "' has a different length");
    for (std::size_t r = 0; r < n; ++r) {
      const int v = columns[c][r];
      if (v < 0 || v >= static_cast<int>(levels[c].size())) {
        throw ValidationError("row " + std::to_string(r + 1) + ", column '" + names[c] +
                              "': level code out of range");
      }
    }
  }
  if (meta.attempted != n + meta.dropped) {
    throw ValidationError("dataset bookkeeping: rows + dropped != attempted");
  }
}

StagedDataset empty_dataset(const SfmSpec& spec, const StageTriple& stage) {
  StagedDataset ds;
  for (const VariableSpec& v : spec.variables) {
    ds.names.push_back(v.name);
    ds.levels.push_back(v.levels);
    ds.columns.emplace_back();
  }
  ds.meta.stage = stage;
  return ds;
}

WeightedTable survey_from_csv(const CsvTable& table, const SfmSpec& spec, const std::string& weight_column) {
  WeightedTable out;
  std::vector<std::size_t> col_of;
  for (const VariableSpec& v : spec.variables) {
    auto it = std::find(table.header.begin(), table.header.end(), v.name);
    if (it == table.header.end()) throw ValidationError("missing column '" + v.name + "'");
    col_of.push_back(static_cast<std::size_t>(it - table.header.begin()));
    out.names.push_back(v.name);
    out.levels.push_back(v.levels);
    out.columns.emplace_back();
    out.columns.back().reserve(table.rows.size());
  }
  std::optional<std::size_t> wcol;
  if (!weight_column.empty()) {
    auto it = std::find(table.header.begin(), table.header.end(), weight_column);
    if (it == table.header.end()) throw ValidationError("missing weight column '" + weight_column + "'");
    wcol = static_cast<std::size_t>(it - table.header.begin());
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& rec = table.rows[r];
    for (std::size_t v = 0; v < spec.variables.size(); ++v) {
      const std::string& cell = rec[col_of[v]];
      const int idx = spec.variables[v].level_index(cell);
      if (idx < 0) {
        throw ValidationError("row " + std::to_string(r + 1) + ", column '" + spec.variables[v].name +
                              "': undeclared level '" + cell + "'");
      }
      out.columns[v].push_back(idx);
    }
    double w = 1.0;
    if (wcol) {
      const std::string& cell = rec[*wcol];
      std::size_t used = 0;
      try {
        w = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw ValidationError("row " + std::to_string(r + 1) + ": weight '" + cell + "' is not a number");
      }
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw ValidationError("row " + std::to_string(r + 1) + ": nonpositive weight " + cell);
      }
    }
    out.weights.push_back(w);
  }
  return out;
}

WeightedTable load_survey(const std::filesystem::path& path, const SfmSpec& spec,
                          const std::string& weight_column) {
  if (!std::filesystem::exists(path)) throw ValidationError("no such file " + path.string());
  try {
    return survey_from_csv(read_csv(path), spec, weight_column);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

StagedDataset weighted_sample(const WeightedTable& table, std::size_t n, std::uint64_t seed) {
  if (table.size() == 0) throw ValidationError("cannot sample from an empty table");
  if (n == 0) throw ValidationError("sample size must be at least 1");
  std::vector<double> cum(table.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!(table.weights[i] > 0.0)) throw ValidationError("nonpositive weight at row " + std::to_string(i + 1));
    acc += table.weights[i];
    cum[i] = acc;
  }
  StagedDataset ds;
  ds.names = table.names;
  ds.levels = table.levels;
  ds.columns.assign(table.names.size(), std::vector<int>(n));
  Rng rng = make_stream(seed, 0x7765696768ULL);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const std::size_t row = std::min(static_cast<std::size_t>(it - cum.begin()), table.size() - 1);
    for (std::size_t c = 0; c < ds.columns.size(); ++c) ds.columns[c][k] = table.columns[c][row];
  }
  ds.meta.stage = kRealWorldStage;
  ds.meta.seed = seed;
  ds.meta.attempted = n;
  ds.meta.provenance = {{"source", "weighted_sample"}, {"table_rows", table.size()}, {"replacement", true}};
  return ds;
}

StagedDataset assemble_stage(const StagedDataset& base, const GeneratedColumns& generated,
                             const StageTriple& target_stage, const SfmSpec& spec) {
  require_monotone(target_stage);
  const std::vector<std::size_t> flip = generated_variables(spec, target_stage);
  std::set<std::string> expected;
  for (std::size_t i : flip) expected.insert(spec.variables[i].name);
  std::set<std::string> given;
  for (const auto& [name, col] : generated) given.insert(name);
  if (expected != given) {
    std::string want;
    for (const auto& n : expected) want += (want.empty() ? "" : ", ") + n;
    throw ValidationError("generated columns must be exactly {" + want + "} for stage " +
                          to_string(target_stage));
  }
  const bool full = target_stage == kModelStage;
  std::size_t n = full && !generated.empty() ? generated.begin()->second.size() : base.size();
  for (const auto& [name, col] : generated) {
    if (col.size() != n) {
      throw ValidationError("row-count mismatch: column '" + name + "' has " + std::to_string(col.size()) +
                            " rows, expected " + std::to_string(n));
    }
  }

  StagedDataset out = empty_dataset(spec, target_stage);
  if (!full) {
    for (std::size_t v = 0; v < spec.variables.size(); ++v) {
      if (base.names.at(v) != spec.variables[v].name) {
        throw ValidationError("base dataset columns do not follow the spec");
      }
    }
  }
  std::vector<const GeneratedColumn*> gen_of(spec.variables.size(), nullptr);
  for (std::size_t i : flip) gen_of[i] = &generated.at(spec.variables[i].name);

  std::size_t dropped = 0;
  for (std::size_t r = 0; r < n; ++r) {
    bool keep = true;
    for (std::size_t v = 0; v < gen_of.size(); ++v) {
      if (!gen_of[v]) continue;
      const auto& cell = (*gen_of[v])[r];
      if (!cell) {
        keep = false;
        continue;
      }
      if (*cell < 0 || *cell >= static_cast<int>(spec.variables[v].levels.size())) {
        throw ValidationError("row " + std::to_string(r + 1) + ", column '" + spec.variables[v].name +
                              "': generated level out of range");
      }
    }
    if (!keep) {
      ++dropped;
      continue;
    }
    for (std::size_t v = 0; v < gen_of.size(); ++v) {
      out.columns[v].push_back(gen_of[v] ? *(*gen_of[v])[r] : base.columns[v][r]);
    }
  }
  out.meta.seed = base.meta.seed;
  out.meta.attempted = n;
  out.meta.dropped = dropped;
  std::vector<std::string> gen_names;
  for (std::size_t i : flip) gen_names.push_back(spec.variables[i].name);
  out.meta.provenance = {{"base_stage", to_string(base.meta.stage)},
                         {"base_rows", base.size()},
                         {"base_provenance", base.meta.provenance},
                         {"generated", gen_names}};
  return out;
}

StagedSample encode(const StagedDataset& ds, const SfmSpec& spec) {
  const Levels lv = spec.levels();
  const std::size_t n = ds.size();
  Sample s;
  s.x.resize(n);
  s.z.assign(n, 0);
  s.w.assign(n, 0);
  s.y.resize(n);
  const std::size_t xi = ds.column_index(spec.variables[spec.x_index()].name);
  const std::size_t yi = ds.column_index(spec.variables[spec.y_index()].name);
  for (std::size_t r = 0; r < n; ++r) {
    s.x[r] = ds.columns[xi][r];
    s.y[r] = ds.columns[yi][r];
  }
  auto code = [&](Role role, std::vector<int>& out) {
    for (std::size_t v : spec.indices(role)) {
      const std::size_t c = ds.column_index(spec.variables[v].name);
      const int k = static_cast<int>(spec.variables[v].levels.size());
      for (std::size_t r = 0; r < n; ++r) out[r] = out[r] * k + ds.columns[c][r];
    }
  };
  code(Role::Z, s.z);
  code(Role::W, s.w);
  return make_staged_sample(lv, std::move(s), ds.meta.stage);
}

std::filesystem::path meta_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

nlohmann::json to_json(const DatasetMeta& m) {
  return {{"stage", to_string(m.stage)}, {"model_id", m.model_id},       {"seed", m.seed},
          {"settings", m.settings},      {"prompt_hash", m.prompt_hash}, {"attempted", m.attempted},
          {"dropped", m.dropped},        {"provenance", m.provenance}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.stage = parse_stage(j.at("stage").get<std::string>());
  m.model_id = j.value("model_id", std::string{});
  m.seed = j.value("seed", std::uint64_t{0});
  m.settings = j.value("settings", nlohmann::json::object());
  m.prompt_hash = j.value("prompt_hash", std::string{});
  m.attempted = j.value("attempted", std::size_t{0});
  m.dropped = j.value("dropped", std::size_t{0});
  m.provenance = j.value("provenance", nlohmann::json::object());
  return m;
}

void save_dataset(const StagedDataset& ds, const std::filesystem::path& csv_path) {
  ds.validate();
  CsvTable t;
  t.header = ds.names;
  t.rows.reserve(ds.size());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::vector<std::string> rec;
    for (std::size_t c = 0; c < ds.columns.size(); ++c) {
      rec.push_back(ds.levels[c][static_cast<std::size_t>(ds.columns[c][r])]);
    }
    t.rows.push_back(std::move(rec));
  }
  write_csv(t, csv_path);
  nlohmann::json side = to_json(ds.meta);
  side["format"] = "fga.dataset";
  side["version"] = 1;
  side["rows"] = ds.size();
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t c = 0; c < ds.names.size(); ++c) cols.push_back({{"name", ds.names[c]}, {"levels", ds.levels[c]}});
  side["columns"] = cols;
  std::ofstream out(meta_path(csv_path));
  if (!out) throw ValidationError("cannot write " + meta_path(csv_path).string());
  out << side.dump(2) << '\n';
}

StagedDataset load_dataset(const std::filesystem::path& csv_path) {
  const std::filesystem::path mp = meta_path(csv_path);
  std::ifstream in(mp);
  if (!in) throw ValidationError("missing metadata sidecar " + mp.string());
  nlohmann::json side;
  try {
    in >> side;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(mp.string() + ": " + e.what());
  }
  StagedDataset ds;
  try {
    ds.meta = meta_from_json(side);
    for (const auto& c : side.at("columns")) {
      ds.names.push_back(c.at("name").get<std::string>());
      ds.levels.push_back(c.at("levels").get<std::vector<std::string>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(mp.string() + ": " + e.what());
  }
  const CsvTable t = read_csv(csv_path);
  if (t.header != ds.names) throw ValidationError(csv_path.string() + ": header does not match metadata");
  ds.columns.assign(ds.names.size(), {});
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < ds.names.size(); ++c) {
      const auto& lv = ds.levels[c];
      auto it = std::find(lv.begin(), lv.end(), t.rows[r][c]);
      if (it == lv.end()) {
        throw ValidationError(csv_path.string() + ": row " + std::to_string(r + 1) + ", column '" +
                              ds.names[c] + "': undeclared level '" + t.rows[r][c] + "'");
      }
      ds.columns[c].push_back(static_cast<int>(it - lv.begin()));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace fga
