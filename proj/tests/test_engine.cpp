#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <set>

#include "alm/engine.hpp"
#include "alm/synthetic.hpp"
#include "test_support.hpp"

using namespace alm;

namespace {

SyntheticData small_blobs(std::size_t n = 700) {
  SyntheticSpec s;
  s.n = n;
  s.classes = 3;
  s.dim = 8;
  s.rng_seed = 4;
  return make_blobs(s);
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v;
  for (std::size_t i = a; i < b; ++i) v.push_back(i);
  return v;
}

/// Fails with LabelingFailed on the listed ids, otherwise returns gold.
class FlakyOracle final : public Oracle {
 public:
  explicit FlakyOracle(std::set<std::size_t> bad) : bad_(std::move(bad)) {}
  LabelResult label(const Instance& inst, UsageMeter& meter) override {
    meter.record(10, 1, 1, 0.0);
    if (bad_.count(inst.id)) throw LabelingFailed("scripted failure", {"???"});
    LabelResult r;
    r.label = *inst.gold_label;
    return r;
  }
  std::size_t label_count() const noexcept override { return 3; }

 private:
  std::set<std::size_t> bad_;
};

/// Throws a transport-style error after `ok` successful calls.
class BrokenOracle final : public Oracle {
 public:
  explicit BrokenOracle(int ok) : ok_(ok) {}
  LabelResult label(const Instance& inst, UsageMeter&) override {
    if (calls_++ >= ok_) throw Error("connection refused");
    LabelResult r;
    r.label = *inst.gold_label;
    return r;
  }
  std::size_t label_count() const noexcept override { return 3; }

 private:
  int ok_;
  std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("default protocol acquires 550 labels and conserves the pool") {
  const auto data = small_blobs();
  const auto pool = range(0, 600), test = range(600, 700);
  LoopConfig cfg;
  cfg.rng_seed = 3;
  cfg.timing = false;
  GroundTruthOracle gt(3);
  UsageMeter meter;
  std::size_t streamed = 0;
  const auto r = run_loop(data.corpus, data.embeddings, cfg, pool, test, gt, gt, meter,
                          [&](const IterationRecord&) { ++streamed; });
  REQUIRE(r.records.size() == 101);
  CHECK(streamed == 101);
  for (const auto& rec : r.records) CHECK(rec.labeled_count == 50 + 5 * rec.iteration);
  CHECK(r.final_pool.labeled().size() == 550);
  CHECK(r.final_pool.unlabeled().size() == 50);
  std::set<std::size_t> all(r.final_pool.labeled().begin(), r.final_pool.labeled().end());
  all.insert(r.final_pool.unlabeled().begin(), r.final_pool.unlabeled().end());
  CHECK(all.size() == 600);
  CHECK(*all.rbegin() == 599);
  CHECK(r.records.back().queried.empty());
  CHECK(r.records.back().metrics.accuracy > r.records.front().metrics.accuracy - 0.05);
}

TEST_CASE("loop is deterministic for every strategy") {
  const auto data = small_blobs(300);
  const auto pool = range(0, 240), test = range(240, 300);
  for (auto kind : {StrategyKind::qbc, StrategyKind::entropy_diversity, StrategyKind::coreset, StrategyKind::info_density,
                    StrategyKind::random}) {
    CAPTURE(to_string(kind));
    LoopConfig cfg;
    cfg.seed_size = 10;
    cfg.iterations = 6;
    cfg.strategy.kind = kind;
    cfg.rng_seed = 11;
    cfg.timing = false;
    cfg.classifier.forest.trees = 10;
    GroundTruthOracle gt(3);
    UsageMeter m1, m2;
    const auto a = run_loop(data.corpus, data.embeddings, cfg, pool, test, gt, gt, m1);
    const auto b = run_loop(data.corpus, data.embeddings, cfg, pool, test, gt, gt, m2);
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.seed_indices == b.seed_indices);
    for (std::size_t t = 0; t < a.records.size(); ++t) {
      CHECK(a.records[t].queried == b.records[t].queried);
      CHECK(a.records[t].metrics.accuracy == b.records[t].metrics.accuracy);
      CHECK(a.records[t].metrics.f1 == b.records[t].metrics.f1);
    }
    CHECK(a.final_pool.labeled().size() == 40);
  }
}

TEST_CASE("seed set depends only on rng_seed, not on strategy") {
  const auto data = small_blobs(200);
  const auto pool = range(0, 150), test = range(150, 200);
  GroundTruthOracle gt(3);
  LoopConfig a, b;
  a.seed_size = b.seed_size = 20;
  a.iterations = b.iterations = 1;
  a.rng_seed = b.rng_seed = 5;
  b.strategy.kind = StrategyKind::coreset;
  UsageMeter m;
  CHECK(run_loop(data.corpus, data.embeddings, a, pool, test, gt, gt, m).seed_indices ==
        run_loop(data.corpus, data.embeddings, b, pool, test, gt, gt, m).seed_indices);
}

TEST_CASE("failed labels are replaced by the next-ranked candidates") {
  const auto data = small_blobs(300);
  const auto pool = range(0, 240), test = range(240, 300);
  LoopConfig cfg;
  cfg.seed_size = 10;
  cfg.iterations = 5;
  cfg.rng_seed = 2;
  std::set<std::size_t> bad;
  for (std::size_t i = 0; i < 240; i += 4) bad.insert(i);
  FlakyOracle flaky(bad);
  UsageMeter meter;
  const auto r = run_loop(data.corpus, data.embeddings, cfg, pool, test, flaky, flaky, meter);
  std::size_t failures = 0;
  for (const auto& rec : r.records) {
    CHECK(rec.labeled_count == 10 + 5 * rec.iteration);
    for (const auto& f : rec.failures) {
      CHECK(bad.count(f.index) == 1);
      CHECK(f.raw_responses == std::vector<std::string>{"???"});
      ++failures;
    }
    for (auto q : rec.queried) CHECK(bad.count(q) == 0);
  }
  CHECK(failures > 0);
  for (auto i : r.final_pool.labeled()) CHECK(bad.count(i) == 0);
}

TEST_CASE("replacement policy hands out each backup once") {
  QuerySelection sel;
  sel.indices = {4, 5};
  sel.backups = {7, 8};
  ReplacementPolicy p(sel);
  CHECK(p.substitute(4) == std::optional<std::size_t>(7));
  CHECK(p.substitute(5) == std::optional<std::size_t>(8));
  CHECK(p.substitute(7) == std::nullopt);
}

TEST_CASE("non-labeling oracle errors abort with partial records") {
  const auto data = small_blobs(200);
  const auto pool = range(0, 150), test = range(150, 200);
  LoopConfig cfg;
  cfg.seed_size = 10;
  cfg.iterations = 5;
  BrokenOracle broken(17);
  UsageMeter meter;
  try {
    run_loop(data.corpus, data.embeddings, cfg, pool, test, broken, broken, meter);
    FAIL("expected LoopAborted");
  } catch (const LoopAborted& e) {
    CHECK(e.partial().size() == 1);
    CHECK(std::string(e.what()).find("connection refused") != std::string::npos);
  }
}

TEST_CASE("usage snapshots cover the labels the model was trained on") {
  const auto data = small_blobs(200);
  const auto pool = range(0, 150), test = range(150, 200);
  LoopConfig cfg;
  cfg.seed_size = 10;
  cfg.iterations = 3;
  FlakyOracle counting({});
  UsageMeter meter;
  const auto r = run_loop(data.corpus, data.embeddings, cfg, pool, test, counting, counting, meter);
  for (const auto& rec : r.records) CHECK(rec.usage.requests == static_cast<long long>(rec.labeled_count));
}

TEST_CASE("loop input validation") {
  const auto data = small_blobs(100);
  GroundTruthOracle gt(3);
  UsageMeter meter;
  LoopConfig cfg;
  CHECK_THROWS_AS(run_loop(data.corpus, data.embeddings, cfg, range(0, 40), range(40, 100), gt, gt, meter), ValidationError);
  cfg.seed_size = 5;
  CHECK_THROWS_AS(run_loop(data.corpus, data.embeddings, cfg, range(0, 60), range(50, 100), gt, gt, meter), ValidationError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
