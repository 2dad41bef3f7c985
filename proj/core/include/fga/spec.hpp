#pragma once

// Declarative audit configuration: the fairness model's variables, their
// roles and levels, and the text used when eliciting them from a model.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/effects.hpp"

namespace fga {

enum class Role { X, Z, W, Y };

std::string_view to_string(Role r);
Role parse_role(std::string_view text);

struct VariableSpec {
  std::string name;
  Role role = Role::Z;
  /// Display strings, in declared order. Generator prompts list these.
  std::vector<std::string> levels;
  /// Option texts for the annotator; same length as levels. Defaults to levels.
  std::vector<std::string> annotator_labels;
  /// Name used in the generator's rule list ("marijuana use last month").
  std::string mention;
  /// Noun phrase in "determine the person's <question>".
  std::string question;
  /// Appended after the level in a known fact ("age = 30-34 years").
  std::string fact_suffix;

  int level_index(std::string_view label) const;  // -1 when undeclared
};

struct SfmSpec {
  int version = 1;
  std::string name;
  std::vector<VariableSpec> variables;
  std::string x0;
  std::string x1;
  std::string y_positive;
  std::string population_context;

  /// Checks roles, levels and references; throws ValidationError.
  void validate() const;

  const VariableSpec& variable(std::string_view name) const;
  std::size_t variable_index(std::string_view name) const;
  /// Indices into `variables` of one role, in declaration order.
  std::vector<std::size_t> indices(Role r) const;
  std::size_t x_index() const { return indices(Role::X).front(); }
  std::size_t y_index() const { return indices(Role::Y).front(); }

  /// Block levels with Z and W product-coded; tuple labels joined by " | ".
  Levels levels() const;
  Transition transition() const;
  int y_target() const;
};

nlohmann::json to_json(const SfmSpec& spec);
SfmSpec spec_from_json(const nlohmann::json& doc);
SfmSpec load_spec(const std::filesystem::path& path);
void save_spec(const SfmSpec& spec, const std::filesystem::path& path);

/// Variables whose values come from the model at `stage`: X and Z follow
/// s_z, W follows s_w, Y follows s_y. Declaration order.
std::vector<std::size_t> generated_variables(const SfmSpec& spec, const StageTriple& stage);

}  // namespace fga
