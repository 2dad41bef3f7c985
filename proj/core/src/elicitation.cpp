#include "fga/elicitation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <thread>

namespace fga {
namespace {

void backoff(const RetryPolicy& retry, int attempt) {
  if (retry.base_delay.count() <= 0) return;
  auto d = retry.base_delay * (1LL << std::min(attempt, 20));
  if (d > retry.max_delay) d = retry.max_delay;
  std::this_thread::sleep_for(d);
}

std::optional<char> letter_of_token(const std::string& token, int n_options) {
  std::string t = token;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  while (!t.empty() && (std::isspace(static_cast<unsigned char>(t.back())) || t.back() == '.' || t.back() == ')')) {
    t.pop_back();
  }
  if (t.size() != 1) return std::nullopt;
  const char c = t[0];
  if (c < 'A' || c >= 'A' + n_options) return std::nullopt;
  return c;
}

}  // namespace

NarrativeResult generate_narrative(ChatEndpoint& endpoint, const std::string& prompt,
                                   const GenerationSettings& settings, const RetryPolicy& retry,
                                   std::size_t row) {
  NarrativeResult out;
  bool all_transport = true;
  for (int attempt = 0; attempt <= retry.retries; ++attempt) {
    ChatRequest req;
    req.model = settings.model;
    req.prompt = prompt;
    req.temperature = settings.temperature;
    req.top_p = settings.top_p;
    req.max_tokens = settings.max_tokens;
    req.tag = RequestTag{row, "generate", attempt};
    ++out.attempts;
    if (attempt > 0) ++out.retries;
    try {
      const ChatResponse r = endpoint.complete(req);
      all_transport = false;
      if (auto story = extract_story(r.content)) {
        out.text = std::move(story);
        return out;
      }
      out.failure = "response has no <story> tags";
    } catch (const AuthError&) {
      throw;
    } catch (const EndpointError& e) {
      out.failure = e.what();
      if (!e.transient()) {
        all_transport = false;
        break;
      }
      if (attempt < retry.retries) backoff(retry, attempt);
    }
  }
  out.transport_exhausted = all_transport;
  return out;
}

AnnotationResult choose_letter(const TokenLogprobs& top, int n_options) {
  AnnotationResult out;
  out.has_logprobs = true;
  std::map<char, double> prob;
  for (const auto& [token, lp] : top) {
    if (auto c = letter_of_token(token, n_options)) prob[*c] += std::exp(lp);
  }
  for (const auto& [c, p] : prob) out.letter_logprobs[c] = std::log(p);
  double best = -1.0;
  for (const auto& [c, p] : prob) {
    if (p > best) {
      best = p;
      out.letter = c;
    }
  }
  if (out.letter) {
    out.level = *out.letter - 'A';
    out.inconclusive = false;
  }
  return out;
}

std::optional<char> parse_letter(const std::string& text, int n_options) {
  for (char c : text) {
    if (c >= 'A' && c <= 'Z') {
      if (c < 'A' + n_options) return c;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

AnnotationResult annotate(ChatEndpoint& endpoint, const std::string& narrative, const SfmSpec& spec,
                          std::size_t variable, const AnnotatorSettings& settings, const RetryPolicy& retry,
                          std::size_t row) {
  const VariableSpec& var = spec.variables.at(variable);
  const int n_options = static_cast<int>(var.annotator_labels.size());
  ChatRequest req;
  req.model = settings.model;
  req.prompt = build_annotator_prompt(spec, variable, narrative);
  req.temperature = 0.0;
  req.top_p = 1.0;
  req.max_tokens = settings.max_tokens;
  req.top_logprobs = settings.top_logprobs;

  int retries = 0;
  for (int attempt = 0; attempt <= retry.retries; ++attempt) {
    req.tag = RequestTag{row, "annotate:" + var.name, attempt};
    if (attempt > 0) ++retries;
    ChatResponse r;
    try {
      r = endpoint.complete(req);
    } catch (const AuthError&) {
      throw;
    } catch (const EndpointError& e) {
      if (!e.transient()) break;
      if (attempt < retry.retries) backoff(retry, attempt);
      continue;
    }
    AnnotationResult out;
    if (r.first_token_logprobs) {
      out = choose_letter(*r.first_token_logprobs, n_options);
    } else if (auto c = parse_letter(r.content, n_options)) {
      out.letter = c;
      out.level = *c - 'A';
      out.inconclusive = false;
      out.fallback = true;
    } else {
      out.fallback = true;
    }
    out.variable = var.name;
    out.retries = retries;
    return out;
  }
  AnnotationResult out;
  out.variable = var.name;
  out.retries = retries;
  return out;
}

JobResult run_job(const GenerationJob& job, ChatEndpoint& generator, ChatEndpoint& annotator) {
  if (!job.spec) throw ValidationError("generation job has no spec");
  const SfmSpec& spec = *job.spec;
  require_monotone(job.target_stage);
  const std::vector<std::size_t> unknown = generated_variables(spec, job.target_stage);
  if (unknown.empty()) throw ValidationError("stage " + to_string(job.target_stage) + " generates nothing");
  const bool full = job.target_stage == kModelStage;
  std::size_t n = job.base.size();
  if (full && job.rows > 0) n = job.rows;
  if (!full && n == 0) throw ValidationError("partial-replacement stage needs a non-empty base dataset");
  if (job.concurrency < 1) throw ValidationError("concurrency must be at least 1");

  std::vector<std::size_t> known_vars;
  for (std::size_t v = 0; v < spec.variables.size(); ++v) {
    if (std::find(unknown.begin(), unknown.end(), v) == unknown.end()) known_vars.push_back(v);
  }

  JobResult result;
  result.rows.resize(n);
  std::vector<char> transport_failed(n, 0);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_stream(job.seed, 0x6a6f62ULL);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto work = [&] {
    while (!abort.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n) return;
      const std::size_t row = order[k];
      try {
        std::vector<Fact> known;
        for (std::size_t v : known_vars) {
          known.emplace_back(v, job.base.columns[job.base.column_index(spec.variables[v].name)][row]);
        }
        const std::string prompt = build_generator_prompt(spec, known, unknown);
        const NarrativeResult nr = generate_narrative(generator, prompt, job.generation, job.retry, row);
        RowOutcome& out = result.rows[row];
        out.retries = nr.retries;
        if (!nr.text) {
          out.inconclusive = true;
          transport_failed[row] = nr.transport_exhausted ? 1 : 0;
          continue;
        }
        out.narrative = nr.text;
        for (std::size_t v : unknown) {
          AnnotationResult a = annotate(annotator, *nr.text, spec, v, job.annotator, job.retry, row);
          out.retries += a.retries;
          if (a.inconclusive) out.inconclusive = true;
          out.annotations.push_back(std::move(a));
        }
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(job.concurrency), std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  const auto failed_transport = static_cast<std::size_t>(std::count(transport_failed.begin(), transport_failed.end(), 1));
  if (n > 0 && failed_transport == n) {
    throw EndpointError("endpoint unreachable: every row failed in transport", 0, false);
  }

  std::size_t inconclusive_rows = 0, generation_failures = 0, pairs = 0, inconclusive_pairs = 0,
              fallbacks = 0, retries = 0;
  for (std::size_t v : unknown) result.columns[spec.variables[v].name].assign(n, std::nullopt);
  for (std::size_t r = 0; r < n; ++r) {
    const RowOutcome& o = result.rows[r];
    retries += static_cast<std::size_t>(o.retries);
    if (o.inconclusive) ++inconclusive_rows;
    if (!o.narrative) {
      ++generation_failures;
      pairs += unknown.size();
      inconclusive_pairs += unknown.size();
      continue;
    }
    for (const AnnotationResult& a : o.annotations) {
      ++pairs;
      if (a.inconclusive) ++inconclusive_pairs;
      if (a.fallback) ++fallbacks;
      result.columns[a.variable][r] = a.level;
    }
  }
  result.report = {{"rows", n},
                   {"stage", to_string(job.target_stage)},
                   {"inconclusive_rows", inconclusive_rows},
                   {"inconclusive_rate", n ? static_cast<double>(inconclusive_rows) / static_cast<double>(n) : 0.0},
                   {"generation_failures", generation_failures},
                   {"annotation_pairs", pairs},
                   {"inconclusive_pairs", inconclusive_pairs},
                   {"fallback_annotations", fallbacks},
                   {"retries", retries}};
  return result;
}

StagedDataset elicit_stage(const GenerationJob& job, ChatEndpoint& generator, ChatEndpoint& annotator,
                           JobResult* result_out) {
  JobResult res = run_job(job, generator, annotator);
  const SfmSpec& spec = *job.spec;
  StagedDataset base = job.base;
  if (job.target_stage == kModelStage && base.names.empty()) base = empty_dataset(spec, kModelStage);
  StagedDataset out = assemble_stage(base, res.columns, job.target_stage, spec);
  out.meta.model_id = job.generation.model;
  out.meta.seed = job.seed;
  out.meta.prompt_hash = prompt_hash(spec, job.target_stage);
  out.meta.settings = {{"temperature", job.generation.temperature},
                       {"top_p", job.generation.top_p},
                       {"max_tokens", job.generation.max_tokens},
                       {"annotator_model", job.annotator.model},
                       {"annotator_top_logprobs", job.annotator.top_logprobs},
                       {"retries", job.retry.retries},
                       {"concurrency", job.concurrency}};
  out.meta.provenance["job"] = res.report;
  if (res.report.value("fallback_annotations", 0) > 0) {
    out.meta.provenance["annotation_fallback"] = "first capital letter parsed at temperature 0";
  }
  if (result_out) *result_out = std::move(res);
  return out;
}

AnnotatorValidation validate_annotator(const std::vector<std::optional<std::string>>& human,
                                       const std::vector<std::optional<std::string>>& annotations) {
  if (human.size() != annotations.size()) {
    throw ValidationError("human labels and annotations are misaligned (" + std::to_string(human.size()) +
                          " vs " + std::to_string(annotations.size()) + ")");
  }
  AnnotatorValidation v;
  v.pairs = human.size();
  for (std::size_t i = 0; i < human.size(); ++i) {
    if (!human[i]) {
      ++v.inconclusive;
      continue;
    }
    ++v.conclusive;
    if (annotations[i] && *annotations[i] == *human[i]) ++v.agree;
  }
  v.inconclusive_rate = v.pairs ? static_cast<double>(v.inconclusive) / static_cast<double>(v.pairs) : 0.0;
  if (v.conclusive > 0) v.agreement_rate = static_cast<double>(v.agree) / static_cast<double>(v.conclusive);
  return v;
}

nlohmann::json to_json(const AnnotatorValidation& v) {
  nlohmann::json j{{"pairs", v.pairs},
                   {"inconclusive", v.inconclusive},
                   {"conclusive", v.conclusive},
                   {"agree", v.agree},
                   {"inconclusive_rate", v.inconclusive_rate}};
  if (v.agreement_rate) {
    j["agreement_rate"] = *v.agreement_rate;
  } else {
    j["agreement_rate"] = nullptr;
    j["note"] = "no conclusive pairs";
  }
  return j;
}

}  // namespace fga
