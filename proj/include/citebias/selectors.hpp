#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "citebias/design.hpp"
#include "citebias/prompting.hpp"

namespace citebias {

enum class SelectorKind { kRemote, kSimulated };

struct RetrySchedule {
  int max_attempts = 4;
  std::vector<int> backoff_ms = {500, 1000, 2000};
};

// Score-unit biases for the simulated ranker. All zero gives a pure
// relevance ranker.
struct SimulatedSelectorParams {
  double beta_male = 0.0;
  double gamma_majority = 0.0;
  std::uint64_t relevance_seed = 0;
  double noise_sigma = 0.0;
};

struct SelectorConfig {
  SelectorKind kind = SelectorKind::kSimulated;
  std::string model_id;
  double temperature = 0.0;
  // remote only
  std::string endpoint;  // e.g. https://api.openai.com/v1/chat/completions
  std::string api_key_env;
  int timeout_seconds = 120;
  int max_in_flight = 4;
  RetrySchedule retry;
  std::filesystem::path cache_dir;
  SimulatedSelectorParams simulated;
};

struct SelectionRequest {
  const RenderedPrompt& prompt;
  const Subgroup& subgroup;
  const FocalArticle& article;
  int t;
  PromptVariant variant;
};

class Selector {
 public:
  virtual ~Selector() = default;
  // Returns the raw response text. Throws RuntimeFailure when the backend
  // cannot produce one.
  virtual std::string Select(const SelectionRequest& request) = 0;
};

// Latent, gender-independent relevance of a reference (standard normal).
double RelevanceScore(std::uint64_t relevance_seed, std::string_view ref_id);
// Unit-variance pseudo-noise for one presentation; scaled by noise_sigma.
double PresentationNoise(std::uint64_t relevance_seed, std::string_view ref_id, int subgroup_index);

// Top-t by relevance + beta*[male] + gamma*[majority gender] + noise,
// descending, ties broken by candidate order.
SelectionResponse SimulateSelect(const SimulatedSelectorParams& params, const Subgroup& subgroup,
                                 const FocalArticle& article, int t);

class SimulatedSelector : public Selector {
 public:
  explicit SimulatedSelector(SimulatedSelectorParams params) : params_(params) {}
  std::string Select(const SelectionRequest& request) override;

 private:
  SimulatedSelectorParams params_;
};

struct TransportStats {
  std::atomic<std::int64_t> requests{0};  // HTTP attempts actually sent
  std::atomic<std::int64_t> retries{0};
  std::atomic<std::int64_t> failures{0};  // calls that exhausted the schedule
};

// Chat-completion client: one system message, fixed temperature. Reads the
// bearer credential from the environment variable named in the config.
class RemoteSelector : public Selector {
 public:
  explicit RemoteSelector(SelectorConfig config);
  ~RemoteSelector() override;
  std::string Select(const SelectionRequest& request) override;

  // The request document sent for a prompt; exposed for protocol tests.
  std::string RequestBody(const RenderedPrompt& prompt) const;
  const TransportStats& stats() const { return stats_; }

 private:
  struct Endpoint;
  SelectorConfig config_;
  std::string credential_;
  std::unique_ptr<Endpoint> endpoint_;
  std::counting_semaphore<1024> in_flight_;
  TransportStats stats_;
};

// Extracts the assistant text from a chat-completion response body.
std::string ExtractCompletionText(std::string_view body);

// Hex SHA-256 over the length-prefixed fields; stable across platforms.
std::string CacheKey(std::string_view model_id, std::string_view prompt_digest,
                     PromptVariant variant, double temperature);

// One file per key under the cache directory; content is the raw text.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> Get(const std::string& key) const;
  // Failures are logged and reported, never thrown.
  bool Put(const std::string& key, std::string_view raw_text);
  bool Contains(const std::string& key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex write_mu_;
};

// Serves repeated prompts from the cache; misses go to the wrapped backend.
class CachingSelector : public Selector {
 public:
  CachingSelector(Selector& inner, ResponseCache& cache, std::string model_id, double temperature)
      : inner_(inner), cache_(cache), model_id_(std::move(model_id)), temperature_(temperature) {}

  std::string Select(const SelectionRequest& request) override;
  std::string Select(const SelectionRequest& request, bool& served_from_cache);
  // Skips the cache read (used for the single retry) and overwrites the entry.
  std::string SelectFresh(const SelectionRequest& request);

  std::string KeyFor(const SelectionRequest& request) const;
  std::int64_t hits() const { return hits_.load(); }
  std::int64_t misses() const { return misses_.load(); }

 private:
  Selector& inner_;
  ResponseCache& cache_;
  std::string model_id_;
  double temperature_;
  std::atomic<std::int64_t> hits_{0};
  std::atomic<std::int64_t> misses_{0};
};

}  // namespace citebias
