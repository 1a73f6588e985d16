#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "alm/corpus.hpp"
#include "alm/error.hpp"

namespace alm {

/// Slot values for the structured labeling prompt.
struct PromptTemplate {
  std::string expertise;    // "You are an expert in {expertise}."
  std::string task;         // "Now you have a {task}."
  std::string instruction;  // "Please {instruction}:'{query}'."

  /// Throws ValidationError on an empty slot or a missing label code.
  void validate(std::size_t label_count) const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// Built-in slot values for the three benchmark tasks: "imdb", "agnews", "jigsaw".
PromptTemplate preset_template(const std::string& task);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

std::vector<ChatMessage> render_prompt(const PromptTemplate& tmpl, const std::string& query);

/// Chat-completion request body: {"model", "messages", "temperature": 0}.
std::string build_chat_request(const std::string& model, const std::vector<ChatMessage>& messages);

/// Bare integer, else the first (optionally signed) decimal integer substring;
/// accepted only when in [0, label_count).
std::optional<int> parse_label(const std::string& response, std::size_t label_count);

/// FNV-1a 64 of the request body, as 16 lowercase hex digits.
std::string request_hash(const std::string& body);

enum class LabelSource { ground_truth, llm, cache };
const char* to_string(LabelSource source) noexcept;

struct LabelResult {
  int label = 0;
  std::string raw_text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double latency_seconds = 0.0;
  LabelSource source = LabelSource::ground_truth;
  bool tokens_estimated = false;
};

struct Prices {
  double usd_per_1k_prompt_tokens = 0.0;
  double usd_per_1k_completion_tokens = 0.0;

  friend bool operator==(const Prices&, const Prices&) = default;
};

struct UsageTotals {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long requests = 0;
  double oracle_seconds = 0.0;
  double cost_usd = 0.0;
};

/// Thread-safe cumulative oracle usage.
class UsageMeter {
 public:
  explicit UsageMeter(Prices prices = {}) : prices_(prices) {}

  void record(long long prompt_tokens, long long completion_tokens, long long requests, double seconds);
  UsageTotals totals() const;
  const Prices& prices() const noexcept { return prices_; }

  /// prompt * (in / 1000) + completion * (out / 1000).
  static double cost(long long prompt_tokens, long long completion_tokens, const Prices& prices);

 private:
  Prices prices_;
  mutable std::mutex mutex_;
  UsageTotals totals_;
};

/// Thrown when an oracle cannot produce a label after its retries.
class LabelingFailed : public Error {
 public:
  LabelingFailed(const std::string& what, std::vector<std::string> raw_responses)
      : Error(what), raw_responses_(std::move(raw_responses)) {}
  const std::vector<std::string>& raw_responses() const noexcept { return raw_responses_; }

 private:
  std::vector<std::string> raw_responses_;
};

/// A label source. Implementations are safe for concurrent calls.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual LabelResult label(const Instance& instance, UsageMeter& meter) = 0;
  virtual std::size_t label_count() const noexcept = 0;
  /// Bytes that, together with the query text, identify a cacheable request.
  virtual std::string cache_scope() const { return {}; }
};

using OraclePtr = std::shared_ptr<Oracle>;

/// Returns gold labels at zero cost (simulated human annotation).
class GroundTruthOracle final : public Oracle {
 public:
  explicit GroundTruthOracle(std::size_t label_count) : label_count_(label_count) {}
  LabelResult label(const Instance& instance, UsageMeter& meter) override;
  std::size_t label_count() const noexcept override { return label_count_; }

 private:
  std::size_t label_count_;
};

struct LlmOptions {
  std::string endpoint;
  std::string model = "gpt-4o";
  int retry_limit = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::milliseconds min_interval{0};
  std::size_t max_in_flight = 4;
  std::chrono::seconds timeout{60};
  /// Bearer token; defaults to $AL_LLM_API_KEY when unset.
  std::optional<std::string> api_key;
};

/// Labels through a chat-completion endpoint using the structured prompt.
class LlmOracle final : public Oracle {
 public:
  LlmOracle(LlmOptions options, PromptTemplate tmpl, std::size_t label_count);
  LabelResult label(const Instance& instance, UsageMeter& meter) override;
  std::size_t label_count() const noexcept override { return label_count_; }
  std::string cache_scope() const override;

 private:
  void pace();

  LlmOptions options_;
  PromptTemplate template_;
  std::size_t label_count_;
  std::string api_key_;
  std::counting_semaphore<1024> in_flight_;
  std::mutex pace_mutex_;
  std::chrono::steady_clock::time_point last_request_{};
};

/// Memoizes an inner oracle by (cache scope bytes, query bytes). Hits are
/// free; failures are not cached. Optionally persisted as JSONL.
class CachedOracle final : public Oracle {
 public:
  explicit CachedOracle(OraclePtr inner, std::optional<std::filesystem::path> cache_file = std::nullopt);
  LabelResult label(const Instance& instance, UsageMeter& meter) override;
  std::size_t label_count() const noexcept override { return inner_->label_count(); }
  std::string cache_scope() const override { return inner_->cache_scope(); }

  std::size_t size() const;
  std::size_t inner_calls() const;

 private:
  OraclePtr inner_;
  std::optional<std::filesystem::path> cache_file_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, LabelResult> entries_;
  std::size_t inner_calls_ = 0;
};

}  // namespace alm
