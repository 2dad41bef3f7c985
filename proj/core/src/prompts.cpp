#include <cstdio>

#include "fga/elicitation.hpp"

namespace fga {

std::string build_generator_prompt(const SfmSpec& spec, const std::vector<Fact>& known,
                                   const std::vector<std::size_t>& unknown) {
  if (unknown.empty()) throw ValidationError("generator prompt needs at least one unknown variable");
  for (const auto& [v, level] : known) {
    if (v >= spec.variables.size() || level < 0 ||
        level >= static_cast<int>(spec.variables[v].levels.size())) {
      throw ValidationError("known fact is not a declared level");
    }
  }
  for (std::size_t v : unknown) {
    if (v >= spec.variables.size()) throw ValidationError("unknown fact names an undeclared variable");
  }

  std::string mentions;
  for (const VariableSpec& v : spec.variables) {
    if (!mentions.empty()) mentions += ", ";
    mentions += v.mention;
  }

  std::string p;
  p += "You are a data generator. Follow the rules strictly.\n";
  p += "CONTEXT: " + spec.population_context + "\n";
  p += "RULES:\n";
  p += "1) Write a single narrative enclosed in <story>...</story>.\n";
  p += "2) Do NOT include headings, lists, analysis, or any text outside the tags.\n";
  p += "3) Mention ALL facts given below exactly once (" + mentions + ").\n";
  p += "4) Keep it under 200 words.\n";
  if (!known.empty()) {
    p += "known facts to be mentioned:\n";
    for (const auto& [v, level] : known) {
      const VariableSpec& var = spec.variables[v];
      p += "- " + var.name + " = " + var.levels[static_cast<std::size_t>(level)] + var.fact_suffix + "\n";
    }
  }
  p += "unknown facts to be mentioned:\n";
  for (std::size_t v : unknown) {
    const VariableSpec& var = spec.variables[v];
    std::string values;
    for (const std::string& l : var.levels) values += (values.empty() ? "" : ", ") + l;
    p += "- " + var.name + " (possible values: " + values + ")\n";
  }
  p += "OUTPUT FORMAT:\n<story>\n(your narrative here)\n</story>";
  return p;
}

std::string build_annotator_prompt(const SfmSpec& spec, std::size_t variable, const std::string& narrative) {
  const VariableSpec& var = spec.variables.at(variable);
  std::string p = "Based on the following text:\n\n\"" + narrative + "\"\n\n";
  p += "determine the person's " + var.question +
       ". Begin your answer with the capital letter corresponding to your chosen option below, "
       "followed by a period.\n";
  for (std::size_t i = 0; i < var.annotator_labels.size(); ++i) {
    p += static_cast<char>('A' + i);
    p += ". " + var.annotator_labels[i] + "\n";
  }
  p += "Output:";
  return p;
}

std::optional<std::string> extract_story(const std::string& response) {
  static const std::string open = "<story>";
  static const std::string close = "</story>";
  const auto a = response.find(open);
  if (a == std::string::npos) return std::nullopt;
  const auto b = response.find(close, a + open.size());
  if (b == std::string::npos) return std::nullopt;
  std::string inner = response.substr(a + open.size(), b - a - open.size());
  const auto first = inner.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return std::nullopt;
  const auto last = inner.find_last_not_of(" \t\r\n");
  return inner.substr(first, last - first + 1);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string prompt_hash(const SfmSpec& spec, const StageTriple& stage) {
  return fnv1a_hex(to_json(spec).dump() + "|" + to_string(stage));
}

}  // namespace fga
