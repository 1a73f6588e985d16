#include "alm/mock_server.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include <httplib.h>

#include "alm/error.hpp"
#include "alm/oracle.hpp"

namespace alm {
namespace {

MockReply reply_from_json(const nlohmann::json& j) {
  static const char* kKeys[] = {"status", "content", "prompt_tokens", "completion_tokens", "delay_ms"};
  if (!j.is_object()) throw ValidationError("mock reply must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), k) == std::end(kKeys)) {
      throw ValidationError("unknown mock reply key '" + k + "'");
    }
  }
  MockReply r;
  r.status = j.value("status", 200);
  r.content = j.value("content", std::string{});
  if (j.contains("prompt_tokens")) r.prompt_tokens = j["prompt_tokens"].get<long long>();
  if (j.contains("completion_tokens")) r.completion_tokens = j["completion_tokens"].get<long long>();
  r.delay_ms = j.value("delay_ms", 0);
  return r;
}

nlohmann::json reply_to_json(const MockReply& r) {
  nlohmann::json j;
  j["status"] = r.status;
  j["content"] = r.content;
  if (r.prompt_tokens) j["prompt_tokens"] = *r.prompt_tokens;
  if (r.completion_tokens) j["completion_tokens"] = *r.completion_tokens;
  j["delay_ms"] = r.delay_ms;
  return j;
}

}  // namespace

MockScript MockScript::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("mock script must be a JSON object");
  MockScript s;
  for (const auto& [k, v] : j.items()) {
    if (k == "by_hash") {
      for (const auto& [h, r] : v.items()) s.by_hash.emplace(h, reply_from_json(r));
    } else if (k == "sequence") {
      for (const auto& r : v) s.sequence.push_back(reply_from_json(r));
    } else if (k == "default") {
      s.fallback = reply_from_json(v);
    } else {
      throw ValidationError("unknown mock script key '" + k + "'");
    }
  }
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open mock script " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("mock script is not valid JSON: " + path.string());
  return from_json(j);
}

nlohmann::json MockScript::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (!by_hash.empty()) {
    j["by_hash"] = nlohmann::json::object();
    for (const auto& [h, r] : by_hash) j["by_hash"][h] = reply_to_json(r);
  }
  if (!sequence.empty()) {
    j["sequence"] = nlohmann::json::array();
    for (const auto& r : sequence) j["sequence"].push_back(reply_to_json(r));
  }
  if (fallback) j["default"] = reply_to_json(*fallback);
  return j;
}

struct MockChatServer::Impl {
  httplib::Server server;
};

MockChatServer::MockChatServer(MockScript script, std::string host, int port)
    : impl_(std::make_unique<Impl>()), script_(std::move(script)), host_(std::move(host)) {
  impl_->server.Post(R"(.*)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::size_t seq = requests_.fetch_add(1);
    {
      std::lock_guard lock(bodies_mutex_);
      bodies_.push_back(req.body);
    }
    const std::string hash = request_hash(req.body);
    const MockReply* reply = nullptr;
    if (const auto it = script_.by_hash.find(hash); it != script_.by_hash.end()) {
      reply = &it->second;
    } else if (seq < script_.sequence.size()) {
      reply = &script_.sequence[seq];
    } else if (script_.fallback) {
      reply = &*script_.fallback;
    }
    if (reply == nullptr) {
      unmatched_.fetch_add(1);
      std::cerr << "mock-llm: unmatched request #" << seq << " hash " << hash << '\n';
      res.status = 500;
      res.set_content(R"({"error":"no scripted reply"})", "application/json");
      return;
    }
    if (reply->delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(reply->delay_ms));
    res.status = reply->status;
    if (reply->status != 200) {
      res.set_content(R"({"error":"scripted failure"})", "application/json");
      return;
    }
    std::string model = "mock";
    const auto parsed = nlohmann::json::parse(req.body, nullptr, false);
    if (!parsed.is_discarded() && parsed.contains("model") && parsed["model"].is_string()) model = parsed["model"];
    nlohmann::ordered_json body;
    body["id"] = "mock-" + std::to_string(seq);
    body["object"] = "chat.completion";
    body["model"] = model;
    body["choices"] = nlohmann::ordered_json::array(
        {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply->content}}}, {"finish_reason", "stop"}}});
    if (reply->prompt_tokens || reply->completion_tokens) {
      const long long pt = reply->prompt_tokens.value_or(0), ct = reply->completion_tokens.value_or(0);
      body["usage"] = {{"prompt_tokens", pt}, {"completion_tokens", ct}, {"total_tokens", pt + ct}};
    }
    res.set_content(body.dump(), "application/json");
  });

  port_ = port == 0 ? impl_->server.bind_to_any_port(host_) : (impl_->server.bind_to_port(host_, port) ? port : -1);
  if (port_ <= 0) throw Error("mock-llm: cannot bind " + host_ + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockChatServer::~MockChatServer() {
  stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockChatServer::url() const {
  return "http://" + host_ + ":" + std::to_string(port_) + "/v1/chat/completions";
}

std::vector<std::string> MockChatServer::received_bodies() const {
  std::lock_guard lock(bodies_mutex_);
  return bodies_;
}

void MockChatServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void MockChatServer::stop() { impl_->server.stop(); }

}  // namespace alm
