#include "fga/spec.hpp"

#include <fstream>
#include <set>

namespace fga {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::X: return "X";
    case Role::Z: return "Z";
    case Role::W: return "W";
    case Role::Y: return "Y";
  }
  return "?";
}

Role parse_role(std::string_view text) {
  if (text == "X") return Role::X;
  if (text == "Z") return Role::Z;
  if (text == "W") return Role::W;
  if (text == "Y") return Role::Y;
  throw ValidationError("unknown role '" + std::string(text) + "'");
}

int VariableSpec::level_index(std::string_view label) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

void SfmSpec::validate() const {
  if (version != 1) throw ValidationError("unsupported spec version " + std::to_string(version));
  if (indices(Role::X).size() != 1) throw ValidationError("spec needs exactly one X variable");
  if (indices(Role::Y).size() != 1) throw ValidationError("spec needs exactly one Y variable");
  std::set<std::string> names;
  for (const VariableSpec& v : variables) {
    if (v.name.empty()) throw ValidationError("variable with empty name");
    if (!names.insert(v.name).second) throw ValidationError("duplicate variable '" + v.name + "'");
    if (v.levels.empty()) throw ValidationError("variable '" + v.name + "' has no levels");
    if (v.levels.size() > 26) throw ValidationError("variable '" + v.name + "' has more than 26 levels");
    std::set<std::string> seen(v.levels.begin(), v.levels.end());
    if (seen.size() != v.levels.size()) throw ValidationError("variable '" + v.name + "' repeats a level");
    if (v.annotator_labels.size() != v.levels.size()) {
      throw ValidationError("variable '" + v.name + "': annotator options do not match its levels");
    }
  }
  const VariableSpec& x = variables[x_index()];
  if (x.level_index(x0) < 0) throw ValidationError("x0 '" + x0 + "' is not a level of " + x.name);
  if (x.level_index(x1) < 0) throw ValidationError("x1 '" + x1 + "' is not a level of " + x.name);
  if (x0 == x1) throw ValidationError("x0 and x1 must differ");
  const VariableSpec& y = variables[y_index()];
  if (y.level_index(y_positive) < 0) {
    throw ValidationError("y_positive '" + y_positive + "' is not a level of " + y.name);
  }
}

const VariableSpec& SfmSpec::variable(std::string_view n) const { return variables[variable_index(n)]; }

std::size_t SfmSpec::variable_index(std::string_view n) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == n) return i;
  }
  throw ValidationError("unknown variable '" + std::string(n) + "'");
}

std::vector<std::size_t> SfmSpec::indices(Role r) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].role == r) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::string> product_labels(const SfmSpec& spec, Role r) {
  std::vector<std::string> out{""};
  bool first = true;
  for (std::size_t i : spec.indices(r)) {
    std::vector<std::string> next;
    for (const std::string& prefix : out) {
      for (const std::string& l : spec.variables[i].levels) next.push_back(first ? l : prefix + " | " + l);
    }
    out = std::move(next);
    first = false;
  }
  if (first) return {"-"};
  return out;
}

}  // namespace

Levels SfmSpec::levels() const {
  return Levels{variables[x_index()].levels, product_labels(*this, Role::Z), product_labels(*this, Role::W),
                variables[y_index()].levels};
}

Transition SfmSpec::transition() const {
  const VariableSpec& x = variables[x_index()];
  return Transition{x.level_index(x0), x.level_index(x1)};
}

int SfmSpec::y_target() const { return variables[y_index()].level_index(y_positive); }

nlohmann::json to_json(const SfmSpec& spec) {
  nlohmann::json vars = nlohmann::json::array();
  for (const VariableSpec& v : spec.variables) {
    nlohmann::json j{{"name", v.name},
                     {"role", std::string(to_string(v.role))},
                     {"levels", v.levels},
                     {"mention", v.mention},
                     {"question", v.question}};
    if (v.annotator_labels != v.levels) j["annotator_labels"] = v.annotator_labels;
    if (!v.fact_suffix.empty()) j["fact_suffix"] = v.fact_suffix;
    vars.push_back(std::move(j));
  }
  return {{"format", "fga.spec"},
          {"version", spec.version},
          {"name", spec.name},
          {"variables", vars},
          {"x0", spec.x0},
          {"x1", spec.x1},
          {"y_positive", spec.y_positive},
          {"population_context", spec.population_context}};
}

SfmSpec spec_from_json(const nlohmann::json& doc) {
  try {
    SfmSpec s;
    s.version = doc.value("version", 1);
    s.name = doc.value("name", std::string{});
    for (const auto& v : doc.at("variables")) {
      VariableSpec var;
      var.name = v.at("name").get<std::string>();
      var.role = parse_role(v.at("role").get<std::string>());
      var.levels = v.at("levels").get<std::vector<std::string>>();
      var.annotator_labels = v.value("annotator_labels", var.levels);
      var.mention = v.value("mention", var.name);
      var.question = v.value("question", var.mention);
      var.fact_suffix = v.value("fact_suffix", std::string{});
      s.variables.push_back(std::move(var));
    }
    s.x0 = doc.at("x0").get<std::string>();
    s.x1 = doc.at("x1").get<std::string>();
    s.y_positive = doc.at("y_positive").get<std::string>();
    s.population_context = doc.value("population_context", std::string{});
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed spec: ") + e.what());
  }
}

SfmSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open spec " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return spec_from_json(doc);
}

void save_spec(const SfmSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json(spec).dump(2) << '\n';
}

std::vector<std::size_t> generated_variables(const SfmSpec& spec, const StageTriple& stage) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.variables.size(); ++i) {
    Env e = s0;
    switch (spec.variables[i].role) {
      case Role::X:
      case Role::Z: e = stage.z; break;
      case Role::W: e = stage.w; break;
      case Role::Y: e = stage.y; break;
    }
    if (e == s1) out.push_back(i);
  }
  return out;
}

}  // namespace fga
