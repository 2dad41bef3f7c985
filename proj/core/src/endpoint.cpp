#include "fga/endpoint.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>

#include <httplib.h>

namespace fga {
namespace {

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json response_json(const ChatResponse& r) {
  nlohmann::json j{{"content", r.content}};
  if (r.first_token_logprobs) {
    nlohmann::json lp = nlohmann::json::array();
    for (const auto& [tok, v] : *r.first_token_logprobs) lp.push_back({{"token", tok}, {"logprob", v}});
    j["first_token_logprobs"] = lp;
  } else {
    j["first_token_logprobs"] = nullptr;
  }
  return j;
}

ChatResponse response_from_json(const nlohmann::json& j) {
  ChatResponse r;
  r.content = j.at("content").get<std::string>();
  if (j.contains("first_token_logprobs") && !j["first_token_logprobs"].is_null()) {
    TokenLogprobs lp;
    for (const auto& e : j["first_token_logprobs"]) {
      lp.emplace_back(e.at("token").get<std::string>(), e.at("logprob").get<double>());
    }
    r.first_token_logprobs = std::move(lp);
  }
  return r;
}

nlohmann::json tag_json(const RequestTag& t) {
  return {{"row", t.row}, {"purpose", t.purpose}, {"attempt", t.attempt}};
}

}  // namespace

HttpEndpointConfig endpoint_config_from_env(const std::string& model) {
  const char* base = std::getenv("FGA_API_BASE");
  const char* key = std::getenv("FGA_API_KEY");
  if (!base || !*base) throw ConfigError("FGA_API_BASE is not set");
  if (!key || !*key) throw ConfigError("FGA_API_KEY is not set");
  HttpEndpointConfig cfg;
  cfg.api_base = base;
  cfg.api_key = key;
  cfg.model = model;
  return cfg;
}

OpenAIEndpoint::OpenAIEndpoint(HttpEndpointConfig cfg) : cfg_(std::move(cfg)) {
  const std::string& url = cfg_.api_base;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("FGA_API_BASE must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  host_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

nlohmann::json OpenAIEndpoint::request_body(const ChatRequest& req, const std::string& model) {
  nlohmann::json body{{"model", req.model.empty() ? model : req.model},
                      {"messages", {{{"role", "user"}, {"content", req.prompt}}}},
                      {"temperature", req.temperature},
                      {"top_p", req.top_p},
                      {"max_tokens", req.max_tokens}};
  if (req.top_logprobs > 0) {
    body["logprobs"] = true;
    body["top_logprobs"] = req.top_logprobs;
  }
  return body;
}

ChatResponse OpenAIEndpoint::parse_response(const nlohmann::json& body) {
  try {
    const auto& choice = body.at("choices").at(0);
    ChatResponse r;
    const auto& content = choice.at("message").at("content");
    r.content = content.is_null() ? std::string{} : content.get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
      const auto& lp = choice["logprobs"];
      if (lp.contains("content") && lp["content"].is_array() && !lp["content"].empty()) {
        TokenLogprobs top;
        const auto& first = lp["content"][0];
        if (first.contains("top_logprobs") && first["top_logprobs"].is_array()) {
          for (const auto& t : first["top_logprobs"]) {
            top.emplace_back(t.at("token").get<std::string>(), t.at("logprob").get<double>());
          }
        } else {
          top.emplace_back(first.at("token").get<std::string>(), first.at("logprob").get<double>());
        }
        r.first_token_logprobs = std::move(top);
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(std::string("malformed completion response: ") + e.what(), 0, true);
  }
}

ChatResponse OpenAIEndpoint::complete(const ChatRequest& req) {
  httplib::Client cli(host_);
  cli.set_bearer_token_auth(cfg_.api_key);
  cli.set_connection_timeout(static_cast<time_t>(cfg_.timeout.count()));
  cli.set_read_timeout(static_cast<time_t>(cfg_.timeout.count()));
  cli.set_write_timeout(static_cast<time_t>(cfg_.timeout.count()));
  const std::string body = request_body(req, cfg_.model).dump();
  auto res = cli.Post(path_prefix_ + "/chat/completions", body, "application/json");
  if (!res) throw EndpointError("transport error: " + httplib::to_string(res.error()), 0, true);
  if (res->status == 401 || res->status == 403) {
    throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")", res->status);
  }
  if (res->status == 429 || res->status >= 500) {
    throw EndpointError("HTTP " + std::to_string(res->status), res->status, true);
  }
  if (res->status != 200) {
    throw EndpointError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), res->status,
                        false);
  }
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(std::string("response is not JSON: ") + e.what(), res->status, true);
  }
  return parse_response(parsed);
}

nlohmann::json to_json(const TranscriptRecord& r) {
  nlohmann::json j = tag_json(r.tag);
  j["request"] = r.request;
  j["response"] = r.response ? response_json(*r.response) : nlohmann::json(nullptr);
  j["error"] = r.error ? *r.error : nlohmann::json(nullptr);
  j["timestamp"] = r.timestamp;
  return j;
}

TranscriptRecord transcript_record_from_json(const nlohmann::json& j) {
  TranscriptRecord r;
  r.tag.row = j.at("row").get<std::size_t>();
  r.tag.purpose = j.at("purpose").get<std::string>();
  r.tag.attempt = j.at("attempt").get<int>();
  r.request = j.value("request", nlohmann::json::object());
  if (j.contains("response") && !j["response"].is_null()) r.response = response_from_json(j["response"]);
  if (j.contains("error") && !j["error"].is_null()) r.error = j["error"];
  r.timestamp = j.value("timestamp", std::string{});
  return r;
}

ChatResponse RecordingEndpoint::complete(const ChatRequest& req) {
  TranscriptRecord rec;
  rec.tag = req.tag;
  rec.request = OpenAIEndpoint::request_body(req, req.model);
  rec.timestamp = now_utc();
  try {
    ChatResponse r = inner_.complete(req);
    rec.response = r;
    std::lock_guard lock(mu_);
    records_[req.tag] = std::move(rec);
    return r;
  } catch (const EndpointError& e) {
    rec.error = nlohmann::json{{"message", e.what()},
                               {"status", e.status()},
                               {"transient", e.transient()},
                               {"auth", dynamic_cast<const AuthError*>(&e) != nullptr}};
    std::lock_guard lock(mu_);
    records_[req.tag] = std::move(rec);
    throw;
  }
}

std::vector<TranscriptRecord> RecordingEndpoint::records() const {
  std::lock_guard lock(mu_);
  std::vector<TranscriptRecord> out;
  out.reserve(records_.size());
  for (const auto& [tag, rec] : records_) out.push_back(rec);
  return out;
}

void RecordingEndpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const TranscriptRecord& r : records()) out << to_json(r).dump() << '\n';
}

std::vector<TranscriptRecord> load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open transcript " + path.string());
  std::vector<TranscriptRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(transcript_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ReplayEndpoint::ReplayEndpoint(std::vector<TranscriptRecord> records) {
  for (auto& r : records) records_[r.tag] = std::move(r);
}

ReplayEndpoint ReplayEndpoint::load(const std::filesystem::path& path) {
  return ReplayEndpoint(load_transcript(path));
}

ChatResponse ReplayEndpoint::complete(const ChatRequest& req) {
  auto it = records_.find(req.tag);
  if (it == records_.end()) {
    throw EndpointError("transcript has no record for row " + std::to_string(req.tag.row) + ", " +
                            req.tag.purpose + ", attempt " + std::to_string(req.tag.attempt),
                        0, false);
  }
  const TranscriptRecord& r = it->second;
  if (r.error) {
    const auto& e = *r.error;
    const std::string msg = e.value("message", std::string("recorded failure"));
    const int status = e.value("status", 0);
    if (e.value("auth", false)) throw AuthError(msg, status);
    throw EndpointError(msg, status, e.value("transient", true));
  }
  return *r.response;
}

}  // namespace fga
