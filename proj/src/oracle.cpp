#include "alm/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "alm/http.hpp"
#include "alm/text.hpp"

namespace alm {
namespace {

bool mentions_code(const std::string& s, const std::string& code) {
  for (std::size_t pos = s.find(code); pos != std::string::npos; pos = s.find(code, pos + 1)) {
    const bool left_ok = pos == 0 || !std::isdigit(static_cast<unsigned char>(s[pos - 1]));
    const std::size_t end = pos + code.size();
    const bool right_ok = end >= s.size() || !std::isdigit(static_cast<unsigned char>(s[end]));
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::optional<long long> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) return std::nullopt;
  long long v = 0;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    if (v > 1'000'000'000LL) return std::nullopt;  // far outside any label range
    v = v * 10 + (s[i] - '0');
  }
  return neg ? -v : v;
}

long long estimate_tokens(std::string_view s) {
  return static_cast<long long>((text::codepoint_count(s) + 3) / 4);
}

std::string cache_key(const std::string& scope, const std::string& query) {
  std::string key = scope;
  key.push_back('\x1f');
  key += query;
  return key;
}

}  // namespace

void PromptTemplate::validate(std::size_t label_count) const {
  if (expertise.empty() || task.empty() || instruction.empty()) throw ValidationError("prompt slots A, B and C must be non-empty");
  for (std::size_t c = 0; c < label_count; ++c) {
    if (!mentions_code(instruction, std::to_string(c))) {
      throw ValidationError("prompt instruction does not mention label code " + std::to_string(c));
    }
  }
}

PromptTemplate preset_template(const std::string& task) {
  if (task == "imdb") {
    return {"user reviews sentiment classification", "binary sentiment classification task",
            "classify the following user review into positive sentiment or negative sentiment, use 1 for positive and 0 "
            "for negative"};
  }
  if (task == "agnews") {
    return {"news article classification", "four-class news topic classification task",
            "classify the following news article into one of the following categories: 0 for World, 1 for Sports, 2 "
            "for Business, or 3 for Sci/Tech"};
  }
  if (task == "jigsaw") {
    return {"toxic comment classification", "binary classification task",
            "classify the following comment into toxic or non-toxic, use 1 for toxic and 0 for non-toxic"};
  }
  throw ValidationError("unknown prompt preset '" + task + "' (expected imdb, agnews or jigsaw)");
}

std::vector<ChatMessage> render_prompt(const PromptTemplate& tmpl, const std::string& query) {
  if (query.empty()) throw ValidationError("render_prompt: empty query");
  return {
      {"system", "You are an expert in " + tmpl.expertise + "."},
      {"user", "Now you have a " + tmpl.task + ". Please " + tmpl.instruction + ":'" + query +
                   "'. Please only return the label."},
  };
}

std::string build_chat_request(const std::string& model, const std::vector<ChatMessage>& messages) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    nlohmann::ordered_json msg;
    msg["role"] = m.role;
    msg["content"] = m.content;
    body["messages"].push_back(std::move(msg));
  }
  body["temperature"] = 0;
  return body.dump();
}

std::optional<int> parse_label(const std::string& response, std::size_t label_count) {
  const auto in_range = [&](long long v) -> std::optional<int> {
    if (v >= 0 && v < static_cast<long long>(label_count)) return static_cast<int>(v);
    return std::nullopt;
  };
  const std::string_view stripped = text::trim(response);
  if (const auto bare = parse_int(stripped)) return in_range(*bare);
  for (std::size_t i = 0; i < stripped.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(stripped[i]))) continue;
    std::size_t start = i;
    if (i > 0 && stripped[i - 1] == '-') start = i - 1;
    std::size_t end = i;
    while (end < stripped.size() && std::isdigit(static_cast<unsigned char>(stripped[end]))) ++end;
    const auto v = parse_int(stripped.substr(start, end - start));
    return v ? in_range(*v) : std::nullopt;
  }
  return std::nullopt;
}

std::string request_hash(const std::string& body) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : body) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* to_string(LabelSource source) noexcept {
  switch (source) {
    case LabelSource::ground_truth: return "ground_truth";
    case LabelSource::llm: return "llm";
    case LabelSource::cache: return "cache";
  }
  return "unknown";
}

void UsageMeter::record(long long prompt_tokens, long long completion_tokens, long long requests, double seconds) {
  std::lock_guard lock(mutex_);
  totals_.prompt_tokens += prompt_tokens;
  totals_.completion_tokens += completion_tokens;
  totals_.requests += requests;
  totals_.oracle_seconds += seconds;
}

UsageTotals UsageMeter::totals() const {
  std::lock_guard lock(mutex_);
  UsageTotals t = totals_;
  t.cost_usd = cost(t.prompt_tokens, t.completion_tokens, prices_);
  return t;
}

double UsageMeter::cost(long long prompt_tokens, long long completion_tokens, const Prices& prices) {
  return static_cast<double>(prompt_tokens) * (prices.usd_per_1k_prompt_tokens / 1000.0) +
         static_cast<double>(completion_tokens) * (prices.usd_per_1k_completion_tokens / 1000.0);
}

LabelResult GroundTruthOracle::label(const Instance& instance, UsageMeter&) {
  if (!instance.gold_label) {
    throw LabelingFailed("instance " + std::to_string(instance.id) + " has no gold label", {});
  }
  LabelResult r;
  r.label = *instance.gold_label;
  r.raw_text = std::to_string(r.label);
  r.source = LabelSource::ground_truth;
  return r;
}

LlmOracle::LlmOracle(LlmOptions options, PromptTemplate tmpl, std::size_t label_count)
    : options_(std::move(options)),
      template_(std::move(tmpl)),
      label_count_(label_count),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options_.max_in_flight, 1, 1024))) {
  if (options_.retry_limit < 0) throw ValidationError("retry_limit must be >= 0");
  http::parse_url(options_.endpoint);
  template_.validate(label_count_);
  if (options_.api_key) {
    api_key_ = *options_.api_key;
  } else if (const char* env = std::getenv("AL_LLM_API_KEY")) {
    api_key_ = env;
  }
}

std::string LlmOracle::cache_scope() const {
  return template_.expertise + '\x1f' + template_.task + '\x1f' + template_.instruction;
}

void LlmOracle::pace() {
  if (options_.min_interval.count() <= 0) return;
  std::unique_lock lock(pace_mutex_);
  const auto now = std::chrono::steady_clock::now();
  const auto ready = last_request_ + options_.min_interval;
  if (now < ready) std::this_thread::sleep_until(ready);
  last_request_ = std::chrono::steady_clock::now();
}

LabelResult LlmOracle::label(const Instance& instance, UsageMeter& meter) {
  const auto messages = render_prompt(template_, instance.text);
  const std::string body = build_chat_request(options_.model, messages);
  std::vector<std::pair<std::string, std::string>> headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

  LabelResult result;
  result.source = LabelSource::llm;
  std::vector<std::string> raw_responses;
  int transport_failures = 0;
  for (int attempt = 0; attempt <= options_.retry_limit; ++attempt) {
    if (transport_failures > 0) std::this_thread::sleep_for(options_.backoff * (1LL << (transport_failures - 1)));
    pace();
    const auto start = std::chrono::steady_clock::now();
    http::Response res;
    {
      in_flight_.acquire();
      res = http::post_json(options_.endpoint, body, headers, options_.timeout);
      in_flight_.release();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.latency_seconds += seconds;
    if (res.status != 200) {
      raw_responses.push_back(res.status == 0 ? "transport error: " + res.transport_error
                                              : "HTTP " + std::to_string(res.status) + ": " + res.body);
      meter.record(0, 0, 1, seconds);
      ++transport_failures;
      continue;
    }
    const auto parsed = nlohmann::json::parse(res.body, nullptr, false);
    std::string content;
    bool ok = !parsed.is_discarded() && parsed.contains("choices") && parsed["choices"].is_array() &&
              !parsed["choices"].empty() && parsed["choices"][0].contains("message") &&
              parsed["choices"][0]["message"].contains("content") && parsed["choices"][0]["message"]["content"].is_string();
    if (ok) content = parsed["choices"][0]["message"]["content"].get<std::string>();

    long long pt = 0, ct = 0;
    bool estimated = false;
    if (ok && parsed.contains("usage") && parsed["usage"].is_object() && parsed["usage"].contains("prompt_tokens") &&
        parsed["usage"].contains("completion_tokens")) {
      pt = parsed["usage"]["prompt_tokens"].get<long long>();
      ct = parsed["usage"]["completion_tokens"].get<long long>();
    } else {
      pt = estimate_tokens(messages[0].content) + estimate_tokens(messages[1].content);
      ct = estimate_tokens(content);
      estimated = true;
    }
    meter.record(pt, ct, 1, seconds);
    result.prompt_tokens += pt;
    result.completion_tokens += ct;
    result.tokens_estimated = result.tokens_estimated || estimated;
    raw_responses.push_back(ok ? content : res.body);
    if (!ok) continue;
    if (const auto label = parse_label(content, label_count_)) {
      result.label = *label;
      result.raw_text = content;
      return result;
    }
  }
  throw LabelingFailed("labeling failed for instance " + std::to_string(instance.id) + " after " +
                           std::to_string(options_.retry_limit + 1) + " attempts",
                       std::move(raw_responses));
}

CachedOracle::CachedOracle(OraclePtr inner, std::optional<std::filesystem::path> cache_file)
    : inner_(std::move(inner)), cache_file_(std::move(cache_file)) {
  if (!cache_file_ || !std::filesystem::exists(*cache_file_)) return;
  std::ifstream in(*cache_file_);
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded()) throw ValidationError("corrupt cache file " + cache_file_->string());
    LabelResult r;
    r.label = row.at("label").get<int>();
    r.raw_text = row.at("raw_text").get<std::string>();
    r.prompt_tokens = row.at("tokens").at("prompt").get<long long>();
    r.completion_tokens = row.at("tokens").at("completion").get<long long>();
    r.source = LabelSource::llm;
    entries_[cache_key(row.at("template").get<std::string>(), row.at("query").get<std::string>())] = r;
  }
}

LabelResult CachedOracle::label(const Instance& instance, UsageMeter& meter) {
  const std::string scope = inner_->cache_scope();
  const std::string key = cache_key(scope, instance.text);
  {
    std::shared_lock lock(mutex_);
    if (const auto it = entries_.find(key); it != entries_.end()) {
      LabelResult hit = it->second;
      hit.source = LabelSource::cache;
      hit.latency_seconds = 0.0;
      return hit;
    }
  }
  LabelResult fresh = inner_->label(instance, meter);
  std::unique_lock lock(mutex_);
  ++inner_calls_;
  if (entries_.emplace(key, fresh).second && cache_file_) {
    nlohmann::ordered_json row;
    row["key_hash"] = request_hash(key);
    row["template"] = scope;
    row["query"] = instance.text;
    row["label"] = fresh.label;
    row["raw_text"] = fresh.raw_text;
    row["tokens"] = {{"prompt", fresh.prompt_tokens}, {"completion", fresh.completion_tokens}};
    std::ofstream out(*cache_file_, std::ios::app);
    out << row.dump() << '\n';
  }
  return fresh;
}

std::size_t CachedOracle::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t CachedOracle::inner_calls() const {
  std::shared_lock lock(mutex_);
  return inner_calls_;
}

}  // namespace alm
