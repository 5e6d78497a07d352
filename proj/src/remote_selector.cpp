#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "citebias/selectors.hpp"
#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {

struct RemoteSelector::Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

namespace {

bool Retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

RemoteSelector::RemoteSelector(SelectorConfig config)
    : config_(std::move(config)),
      endpoint_(std::make_unique<Endpoint>()),
      in_flight_(std::max(1, std::min(config_.max_in_flight, 1024))) {
  const auto& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("remote selector: endpoint '" + url + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  endpoint_->origin = url.substr(0, path_start);
  endpoint_->path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw RuntimeFailure("remote selector: credential variable " + config_.api_key_env +
                           " is not set");
    }
    credential_ = key;
  }
}

RemoteSelector::~RemoteSelector() = default;

std::string RemoteSelector::RequestBody(const RenderedPrompt& prompt) const {
  nlohmann::json body = {
      {"model", config_.model_id},
      {"messages", nlohmann::json::array({{{"role", "system"}, {"content", prompt.system_text}}})},
      {"temperature", config_.temperature}};
  return body.dump();
}

std::string ExtractCompletionText(std::string_view body) {
  auto doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw RuntimeFailure("remote selector: response body is not JSON");
  try {
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw RuntimeFailure("remote selector: response has no choices[0].message.content");
  }
}

std::string RemoteSelector::Select(const SelectionRequest& request) {
  const std::string body = RequestBody(request.prompt);
  httplib::Headers headers;
  if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);

  const int attempts = std::max(1, config_.retry.max_attempts);
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      stats_.retries++;
      const auto& sched = config_.retry.backoff_ms;
      const int wait = sched.empty() ? 0 : sched[std::min<std::size_t>(attempt - 1, sched.size() - 1)];
      spdlog::warn("{}: retry {} after {} ({} ms)", config_.model_id, attempt, last_error, wait);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }
    httplib::Result res;
    {
      in_flight_.acquire();
      httplib::Client client(endpoint_->origin);
      client.set_connection_timeout(config_.timeout_seconds, 0);
      client.set_read_timeout(config_.timeout_seconds, 0);
      stats_.requests++;
      res = client.Post(endpoint_->path, headers, body, "application/json");
      in_flight_.release();
    }
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return ExtractCompletionText(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    if (!Retryable(res->status)) break;
  }
  stats_.failures++;
  throw RuntimeFailure("remote selector " + config_.model_id + ": " + last_error);
}

}  // namespace citebias
