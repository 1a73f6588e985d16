#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace alm {

/// One scripted reply of the mock chat endpoint.
struct MockReply {
  int status = 200;
  std::string content;
  std::optional<long long> prompt_tokens;
  std::optional<long long> completion_tokens;
  int delay_ms = 0;
};

/// Script of replies. Lookup order for a request: `by_hash` (request_hash of
/// the raw body), then `sequence` by arrival number, then `fallback`.
/// Unmatched requests get HTTP 500.
///
/// JSON form:
///   {"by_hash": {"<hex>": reply, ...}, "sequence": [reply, ...], "default": reply}
///   reply = {"content": "1", "prompt_tokens": 42, "completion_tokens": 1,
///            "delay_ms": 0, "status": 200}
struct MockScript {
  std::unordered_map<std::string, MockReply> by_hash;
  std::vector<MockReply> sequence;
  std::optional<MockReply> fallback;

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Local server speaking the chat-completion wire protocol from a script.
/// Accepts POST on any path. Runs on a background thread until destroyed.
class MockChatServer {
 public:
  explicit MockChatServer(MockScript script, std::string host = "127.0.0.1", int port = 0);
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  int port() const noexcept { return port_; }
  /// Base URL for the chat endpoint, e.g. http://127.0.0.1:PORT/v1/chat/completions
  std::string url() const;
  std::size_t requests() const noexcept { return requests_.load(); }
  std::size_t unmatched() const noexcept { return unmatched_.load(); }
  std::vector<std::string> received_bodies() const;

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  MockScript script_;
  std::string host_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> unmatched_{0};
  mutable std::mutex bodies_mutex_;
  std::vector<std::string> bodies_;
  std::thread thread_;
};

}  // namespace alm
