#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alm/mock_server.hpp"
#include "alm/oracle.hpp"
#include "test_support.hpp"

using namespace alm;
namespace fs = std::filesystem;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(fs::path(ALM_TEST_DATA_DIR) / "golden" / name, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Instance item(const std::string& text, int label = 0) { return Instance{0, text, label, 0}; }

LlmOptions mock_options(const MockChatServer& srv) {
  LlmOptions o;
  o.endpoint = srv.url();
  o.backoff = std::chrono::milliseconds(1);
  o.api_key = "test";
  return o;
}

MockReply reply(const std::string& content, int status = 200) {
  MockReply r;
  r.content = content;
  r.status = status;
  r.prompt_tokens = 50;
  r.completion_tokens = 2;
  return r;
}

}  // namespace

TEST_CASE("request bodies match the golden files byte for byte") {
  CHECK(build_chat_request("gpt-4o", render_prompt(preset_template("imdb"), "A slow start, but the last hour is wonderful.")) ==
        golden("imdb_request.json"));
  CHECK(build_chat_request("gpt-4o", render_prompt(preset_template("agnews"),
                                                   "Stocks rallied on Tuesday after the central bank held rates steady.")) ==
        golden("agnews_request.json"));
  CHECK(build_chat_request("gpt-4o", render_prompt(preset_template("jigsaw"), "Thanks for fixing the citation on this page.")) ==
        golden("jigsaw_request.json"));
}

TEST_CASE("prompt templates") {
  CHECK_NOTHROW(preset_template("imdb").validate(2));
  CHECK_NOTHROW(preset_template("agnews").validate(4));
  CHECK_THROWS_AS(preset_template("imdb").validate(3), ValidationError);
  CHECK_THROWS_AS(preset_template("yelp"), ValidationError);
  CHECK_THROWS_AS((PromptTemplate{"", "b", "use 0 or 1"}.validate(2)), ValidationError);
  const auto msgs = render_prompt(preset_template("jigsaw"), "hi there");
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].role == "system");
  CHECK(msgs[1].content.size() > 30);
  CHECK(msgs[1].content.substr(msgs[1].content.size() - 29) == "Please only return the label.");
}

TEST_CASE("label parsing") {
  struct Case {
    const char* text;
    std::size_t classes;
    std::optional<int> want;
  };
  const Case cases[] = {
      {"1", 2, 1},
      {" 0\n", 2, 0},
      {"Label: 1", 2, 1},
      {"The answer is 3.", 4, 3},
      {"2", 2, std::nullopt},
      {"-1", 2, std::nullopt},
      {"positive", 2, std::nullopt},
      {"", 2, std::nullopt},
      {"1 (positive)", 2, 1},
      {"0 or 1", 2, 0},
      {"Category 12", 4, std::nullopt},
      {"+1", 2, 1},
  };
  for (const auto& c : cases) {
    CAPTURE(c.text);
    CHECK(parse_label(c.text, c.classes) == c.want);
  }
}

TEST_CASE("usage meter cost is the closed-form product") {
  UsageMeter meter(Prices{2.5, 10.0});
  meter.record(1000, 10, 1, 0.5);
  meter.record(234, 1, 1, 0.25);
  const auto t = meter.totals();
  CHECK(t.prompt_tokens == 1234);
  CHECK(t.completion_tokens == 11);
  CHECK(t.requests == 2);
  CHECK(t.cost_usd == 1234.0 * (2.5 / 1000.0) + 11.0 * (10.0 / 1000.0));
}

TEST_CASE("ground truth oracle") {
  GroundTruthOracle o(2);
  UsageMeter meter;
  CHECK(o.label(item("x", 1), meter).label == 1);
  CHECK(meter.totals().requests == 0);
  CHECK_THROWS_AS(o.label(Instance{0, "x", std::nullopt, 0}, meter), LabelingFailed);
}

TEST_CASE("llm oracle against the mock endpoint") {
  SUBCASE("scripted 1 gives label 1 and exact usage") {
    MockScript s;
    s.fallback = reply("1");
    MockChatServer srv(s);
    LlmOracle o(mock_options(srv), preset_template("imdb"), 2);
    UsageMeter meter(Prices{1.0, 2.0});
    const auto r = o.label(item("great"), meter);
    CHECK(r.label == 1);
    CHECK(r.source == LabelSource::llm);
    CHECK(r.prompt_tokens == 50);
    CHECK(meter.totals().completion_tokens == 2);
    CHECK(meter.totals().cost_usd == 50.0 * (1.0 / 1000.0) + 2.0 * (2.0 / 1000.0));
    REQUIRE(srv.received_bodies().size() == 1);
    CHECK(srv.received_bodies()[0] == build_chat_request("gpt-4o", render_prompt(preset_template("imdb"), "great")));
  }
  SUBCASE("two failures then success") {
    MockScript s;
    s.sequence = {reply("", 500), reply("I am not sure"), reply("0")};
    MockChatServer srv(s);
    LlmOracle o(mock_options(srv), preset_template("imdb"), 2);
    UsageMeter meter;
    CHECK(o.label(item("meh"), meter).label == 0);
    CHECK(srv.requests() == 3);
    CHECK(meter.totals().requests == 3);
    CHECK(meter.totals().prompt_tokens == 100);
  }
  SUBCASE("exhausted retries keep the raw responses") {
    MockScript s;
    s.fallback = reply("neither");
    MockChatServer srv(s);
    auto opts = mock_options(srv);
    opts.retry_limit = 2;
    LlmOracle o(opts, preset_template("imdb"), 2);
    UsageMeter meter;
    try {
      o.label(item("x"), meter);
      FAIL("expected LabelingFailed");
    } catch (const LabelingFailed& e) {
      CHECK(e.raw_responses().size() == 3);
      CHECK(e.raw_responses()[0] == "neither");
    }
  }
  SUBCASE("unmatched requests get 500") {
    MockScript s;
    s.sequence = {reply("1")};
    MockChatServer srv(s);
    auto opts = mock_options(srv);
    opts.retry_limit = 0;
    LlmOracle o(opts, preset_template("imdb"), 2);
    UsageMeter meter;
    CHECK(o.label(item("a"), meter).label == 1);
    CHECK_THROWS_AS(o.label(item("b"), meter), LabelingFailed);
    CHECK(srv.unmatched() == 1);
  }
  SUBCASE("latency injection") {
    MockScript s;
    auto r = reply("1");
    r.delay_ms = 150;
    s.fallback = r;
    MockChatServer srv(s);
    LlmOracle o(mock_options(srv), preset_template("imdb"), 2);
    UsageMeter meter;
    const auto start = std::chrono::steady_clock::now();
    o.label(item("slow"), meter);
    CHECK(std::chrono::steady_clock::now() - start >= std::chrono::milliseconds(150));
    CHECK(meter.totals().oracle_seconds >= 0.15);
  }
  SUBCASE("missing usage falls back to an estimate") {
    MockScript s;
    MockReply r;
    r.content = "1";
    s.fallback = r;
    MockChatServer srv(s);
    LlmOracle o(mock_options(srv), preset_template("imdb"), 2);
    UsageMeter meter;
    const auto res = o.label(item("abcd"), meter);
    CHECK(res.tokens_estimated);
    CHECK(res.completion_tokens == 1);
    CHECK(res.prompt_tokens > 0);
  }
  SUBCASE("by-hash lookup") {
    const Corpus c = testing::numbered_corpus(6, 3);
    const auto tmpl = testing::numbered_template(3);
    MockChatServer srv(testing::gold_script(c, tmpl));
    LlmOracle o(mock_options(srv), tmpl, 3);
    UsageMeter meter;
    for (const auto& inst : c.instances()) CHECK(o.label(inst, meter).label == *inst.gold_label);
    CHECK(srv.unmatched() == 0);
  }
}

TEST_CASE("mock script json") {
  const auto j = nlohmann::json::parse(R"({"sequence": [{"content": "1", "prompt_tokens": 3}], "default": {"content": "0"}})");
  const auto s = MockScript::from_json(j);
  CHECK(s.sequence.size() == 1);
  CHECK(s.fallback->content == "0");
  CHECK(MockScript::from_json(s.to_json()).sequence[0].prompt_tokens == 3);
  CHECK_THROWS(MockScript::from_json(nlohmann::json::parse(R"({"sequnce": []})")));
}

TEST_CASE("cached oracle") {
  const fs::path file = fs::temp_directory_path() / "alm_tests" / "cache.jsonl";
  fs::create_directories(file.parent_path());
  fs::remove(file);
  MockScript s;
  s.fallback = reply("1");
  MockChatServer srv(s);
  auto inner = std::make_shared<LlmOracle>(mock_options(srv), preset_template("imdb"), 2);
  {
    CachedOracle cache(inner, file);
    UsageMeter meter(Prices{1.0, 1.0});
    CHECK(cache.label(item("same text"), meter).source == LabelSource::llm);
    const double cost = meter.totals().cost_usd;
    const auto hit = cache.label(item("same text"), meter);
    CHECK(hit.source == LabelSource::cache);
    CHECK(hit.label == 1);
    CHECK(meter.totals().cost_usd == cost);
    CHECK(cache.inner_calls() == 1);
    CHECK(cache.size() == 1);
  }
  CachedOracle reloaded(inner, file);
  UsageMeter meter;
  CHECK(reloaded.size() == 1);
  CHECK(reloaded.label(item("same text"), meter).source == LabelSource::cache);
  CHECK(srv.requests() == 1);
}
