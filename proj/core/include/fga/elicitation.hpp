#pragma once

// Generator/annotator elicitation: narrative prompts, option-letter
// annotation, the batch job runner and annotator validation.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/dataset.hpp"
#include "fga/endpoint.hpp"
#include "fga/spec.hpp"

namespace fga {

/// (variable index, level index)
using Fact = std::pair<std::size_t, int>;

std::string build_generator_prompt(const SfmSpec& spec, const std::vector<Fact>& known,
                                   const std::vector<std::size_t>& unknown);

std::string build_annotator_prompt(const SfmSpec& spec, std::size_t variable, const std::string& narrative);

/// Text between the first <story> and the following </story>, trimmed.
std::optional<std::string> extract_story(const std::string& response);

/// Stable 64-bit FNV-1a digest as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Digest of the spec and stage that determine every prompt of a job.
std::string prompt_hash(const SfmSpec& spec, const StageTriple& stage);

struct GenerationSettings {
  std::string model;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 300;
};

struct AnnotatorSettings {
  std::string model;
  int top_logprobs = 20;
  int max_tokens = 4;
};

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
};

struct NarrativeResult {
  std::optional<std::string> text;
  int attempts = 0;
  int retries = 0;
  /// Last failure message when text is absent.
  std::string failure;
  /// Every attempt failed in transport.
  bool transport_exhausted = false;
};

NarrativeResult generate_narrative(ChatEndpoint& endpoint, const std::string& prompt,
                                   const GenerationSettings& settings, const RetryPolicy& retry,
                                   std::size_t row = 0);

struct AnnotationResult {
  std::string variable;
  std::optional<int> level;
  std::optional<char> letter;
  /// log of the summed probability of each option letter's token variants.
  std::map<char, double> letter_logprobs;
  bool has_logprobs = false;
  /// Letter parsed from text because the endpoint returned no log-probs.
  bool fallback = false;
  bool inconclusive = true;
  int retries = 0;
};

/// Option-letter argmax over first-token alternatives. Variants such as
/// " B" or "B." count toward B; ties go to the earlier letter.
AnnotationResult choose_letter(const TokenLogprobs& top, int n_options);

/// First capital letter in the text, if it names an option.
std::optional<char> parse_letter(const std::string& text, int n_options);

AnnotationResult annotate(ChatEndpoint& endpoint, const std::string& narrative, const SfmSpec& spec,
                          std::size_t variable, const AnnotatorSettings& settings,
                          const RetryPolicy& retry, std::size_t row = 0);

struct GenerationJob {
  const SfmSpec* spec = nullptr;
  /// Supplies known facts; may be empty for the full-replacement stage.
  StagedDataset base;
  StageTriple target_stage = kModelStage;
  /// Row count when base is empty.
  std::size_t rows = 0;
  GenerationSettings generation;
  AnnotatorSettings annotator;
  RetryPolicy retry;
  int concurrency = 4;
  std::uint64_t seed = 0;
};

struct RowOutcome {
  std::optional<std::string> narrative;
  std::vector<AnnotationResult> annotations;
  bool inconclusive = false;
  int retries = 0;
};

struct JobResult {
  GeneratedColumns columns;
  std::vector<RowOutcome> rows;
  nlohmann::json report;
};

/// Runs generation and annotation for every row under a bounded pool.
/// Results are committed in row order. Throws AuthError at once, and
/// EndpointError when every row failed in transport.
JobResult run_job(const GenerationJob& job, ChatEndpoint& generator, ChatEndpoint& annotator);

/// run_job + assemble_stage, with metadata filled in.
StagedDataset elicit_stage(const GenerationJob& job, ChatEndpoint& generator, ChatEndpoint& annotator,
                           JobResult* result_out = nullptr);

struct AnnotatorValidation {
  std::size_t pairs = 0;
  std::size_t inconclusive = 0;
  std::size_t conclusive = 0;
  std::size_t agree = 0;
  double inconclusive_rate = 0.0;
  /// Absent when there are no conclusive pairs.
  std::optional<double> agreement_rate;
};

/// human[i] absent means the human marked pair i inconclusive; an absent
/// annotation on a conclusive pair counts as disagreement.
AnnotatorValidation validate_annotator(const std::vector<std::optional<std::string>>& human,
                                       const std::vector<std::optional<std::string>>& annotations);

nlohmann::json to_json(const AnnotatorValidation& v);

}  // namespace fga
