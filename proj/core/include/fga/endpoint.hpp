#pragma once

// Chat-completion endpoints: an OpenAI-compatible HTTP client, a scripted
// in-process endpoint, and transcript record/replay wrappers.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fga/common.hpp"

namespace fga {

/// Transport or protocol failure. Transient errors are retried.
class EndpointError : public Error {
 public:
  EndpointError(const std::string& what, int status, bool transient)
      : Error(what), status_(status), transient_(transient) {}
  int status() const { return status_; }
  bool transient() const { return transient_; }

 private:
  int status_;
  bool transient_;
};

/// Rejected credentials; never retried.
class AuthError : public EndpointError {
 public:
  AuthError(const std::string& what, int status) : EndpointError(what, status, false) {}
};

/// Missing configuration such as FGA_API_KEY.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Identifies a request within a job for transcripts.
struct RequestTag {
  std::size_t row = 0;
  std::string purpose;  // "generate" or "annotate:<variable>"
  int attempt = 0;

  friend auto operator<=>(const RequestTag&, const RequestTag&) = default;
};

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 300;
  /// Number of first-token alternatives requested; 0 disables log-probs.
  int top_logprobs = 0;
  RequestTag tag;
};

using TokenLogprobs = std::vector<std::pair<std::string, double>>;

struct ChatResponse {
  std::string content;
  /// Top alternatives for the first generated token, when available.
  std::optional<TokenLogprobs> first_token_logprobs;
};

class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  /// Must be safe to call concurrently.
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

struct HttpEndpointConfig {
  std::string api_base;  // e.g. http://localhost:8000/v1
  std::string api_key;
  std::string model;
  std::chrono::seconds timeout{120};
};

/// Reads FGA_API_BASE and FGA_API_KEY; throws ConfigError when either is
/// unset or empty.
HttpEndpointConfig endpoint_config_from_env(const std::string& model);

/// POST {api_base}/chat/completions.
class OpenAIEndpoint final : public ChatEndpoint {
 public:
  explicit OpenAIEndpoint(HttpEndpointConfig cfg);
  ChatResponse complete(const ChatRequest& req) override;

  static nlohmann::json request_body(const ChatRequest& req, const std::string& model);
  static ChatResponse parse_response(const nlohmann::json& body);

 private:
  HttpEndpointConfig cfg_;
  std::string host_;
  std::string path_prefix_;
};

/// Answers from a user-supplied function; used for fixtures and tests.
class ScriptedEndpoint final : public ChatEndpoint {
 public:
  using Handler = std::function<ChatResponse(const ChatRequest&)>;
  explicit ScriptedEndpoint(Handler h) : handler_(std::move(h)) {}
  ChatResponse complete(const ChatRequest& req) override { return handler_(req); }

 private:
  Handler handler_;
};

struct TranscriptRecord {
  RequestTag tag;
  nlohmann::json request;
  std::optional<ChatResponse> response;
  /// Set when the request failed.
  std::optional<nlohmann::json> error;
  std::string timestamp;
};

nlohmann::json to_json(const TranscriptRecord& r);
TranscriptRecord transcript_record_from_json(const nlohmann::json& j);

/// Forwards to an inner endpoint and records every exchange, including
/// failures, keyed by RequestTag.
class RecordingEndpoint final : public ChatEndpoint {
 public:
  explicit RecordingEndpoint(ChatEndpoint& inner) : inner_(inner) {}
  ChatResponse complete(const ChatRequest& req) override;

  /// Records ordered by (row, purpose, attempt).
  std::vector<TranscriptRecord> records() const;
  /// One JSON object per line.
  void save(const std::filesystem::path& path) const;

 private:
  ChatEndpoint& inner_;
  mutable std::mutex mu_;
  std::map<RequestTag, TranscriptRecord> records_;
};

/// Serves responses from a transcript; unknown tags are a non-transient
/// EndpointError.
class ReplayEndpoint final : public ChatEndpoint {
 public:
  explicit ReplayEndpoint(std::vector<TranscriptRecord> records);
  static ReplayEndpoint load(const std::filesystem::path& path);
  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::map<RequestTag, TranscriptRecord> records_;
};

std::vector<TranscriptRecord> load_transcript(const std::filesystem::path& path);

}  // namespace fga
