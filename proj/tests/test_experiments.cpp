#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "alm/experiments.hpp"
#include "alm/mock_server.hpp"
#include "alm/synthetic.hpp"
#include "test_support.hpp"

using namespace alm;

namespace {

SyntheticData data(std::size_t n = 250) {
  SyntheticSpec s;
  s.n = n;
  s.classes = 3;
  s.dim = 6;
  s.rng_seed = 2;
  return make_blobs(s);
}

ExperimentSetup setup_for(const SyntheticData& d, OraclePtr oracle) {
  ExperimentSetup s;
  s.task = "blobs";
  s.corpus = &d.corpus;
  s.embeddings = &d.embeddings;
  s.loop.seed_size = 10;
  s.loop.batch_size = 5;
  s.loop.iterations = 4;
  s.loop.rng_seed = 9;
  s.loop.timing = false;
  s.folds = 3;
  s.oracle = std::move(oracle);
  return s;
}

LlmOptions options(const MockChatServer& srv) {
  LlmOptions o;
  o.endpoint = srv.url();
  o.api_key = "test";
  o.backoff = std::chrono::milliseconds(1);
  return o;
}

}  // namespace

TEST_CASE("averaged curve is the per-iteration fold mean") {
  const auto d = data();
  auto s = setup_for(d, std::make_shared<GroundTruthOracle>(3));
  const auto r = run_rq1(s);
  REQUIRE(r.runs.size() == 1);
  const auto& run = r.runs[0];
  REQUIRE(run.folds.size() == 3);
  for (std::size_t t = 0; t < run.average.size(); ++t) {
    double sum = 0.0;
    for (const auto& f : run.folds) sum += f.records[t].metrics.accuracy;
    CHECK(std::abs(run.average[t].accuracy - sum / 3) <= 1e-12);
  }
  CHECK(run.report_iteration == 4);
  CHECK(run.report_average.accuracy == doctest::Approx(run.average.back().accuracy).epsilon(1e-12));
}

TEST_CASE("parallel folds give the same result as sequential ones") {
  const auto d = data();
  auto s = setup_for(d, std::make_shared<GroundTruthOracle>(3));
  const auto a = run_rq1(s);
  s.parallel_folds = 3;
  const auto b = run_rq1(s);
  CHECK(to_json(a, s).dump() == to_json(b, s).dump());
}

TEST_CASE("rq2 collapses when the LLM returns gold labels") {
  const auto d = data();
  const auto tmpl = testing::numbered_template(3);
  MockChatServer srv(testing::gold_script(d.corpus, tmpl));
  auto s = setup_for(d, std::make_shared<LlmOracle>(options(srv), tmpl, 3));
  const auto r = run_rq2(s);
  REQUIRE(r.strategies.size() == 1);
  const auto& st = r.strategies[0];
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(st.full_llm.folds[f].seed_indices == st.full_ground_truth.folds[f].seed_indices);
    CHECK(st.hybrid.folds[f].seed_indices == st.full_ground_truth.folds[f].seed_indices);
  }
  for (std::size_t t = 0; t < st.full_llm.average.size(); ++t) {
    CHECK(st.full_llm.average[t].accuracy == st.full_ground_truth.average[t].accuracy);
    CHECK(st.hybrid.average[t].accuracy == st.full_ground_truth.average[t].accuracy);
  }
  for (double v : st.comparison.stddev) CHECK(v == 0.0);
  CHECK(st.comparison.mean_stddev == 0.0);
  CHECK(srv.unmatched() == 0);
}

TEST_CASE("rq3 direct arm and cost ratio") {
  const auto d = data(150);
  const auto tmpl = testing::numbered_template(3);
  MockChatServer srv(testing::gold_script(d.corpus, tmpl));
  auto s = setup_for(d, std::make_shared<LlmOracle>(options(srv), tmpl, 3));
  s.prices = Prices{2.5, 10.0};
  const auto r = run_rq3(s);
  const auto folds = kfold(d.corpus.size(), 3, s.loop.rng_seed);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(r.direct_per_fold[f].metrics.accuracy == 1.0);
    long long pt = 0;
    for (auto i : folds[f].test) pt += testing::scripted_prompt_tokens(i);
    const long long ct = static_cast<long long>(folds[f].test.size());
    CHECK(r.direct_per_fold[f].prompt_tokens == pt);
    CHECK(r.direct_per_fold[f].cost_usd == static_cast<double>(pt) * (2.5 / 1000.0) + static_cast<double>(ct) * (10.0 / 1000.0));
  }
  CHECK(std::abs(r.cost_ratio - r.loop_average.cost_usd / r.direct_average.cost_usd) <= 1e-12);
  CHECK(r.loop_average.cost_usd < r.direct_average.cost_usd);
}

TEST_CASE("rq4 budget and determinism") {
  const auto d = data();
  auto s = setup_for(d, std::make_shared<GroundTruthOracle>(3));
  s.rq4_repeats = 1;
  const auto a = run_rq4(s);
  CHECK(a.budget == 10 + 4 * 5);
  const auto b = run_rq4(s);
  CHECK(a.baseline_per_fold == b.baseline_per_fold);
  CHECK(std::abs(a.gain - (a.active.report_average.accuracy - a.baseline_average)) <= 1e-12);
  s.report_iteration = 2;
  CHECK(run_rq4(s).budget == 20);
}

TEST_CASE("learning curve csv columns") {
  const auto d = data();
  auto s = setup_for(d, std::make_shared<GroundTruthOracle>(3));
  const auto dir = std::filesystem::temp_directory_path() / "alm_tests" / "curves";
  std::filesystem::remove_all(dir);
  s.output_dir = dir;
  run_rq1(s);
  const auto csv = dir / "curves" / "blobs" / "entropy_diversity" / "configured" / "fold1" / "learning_curve.csv";
  REQUIRE(std::filesystem::exists(csv));
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,labeled_count,accuracy,f1,recall,prompt_tokens,completion_tokens,cost_usd,wall_seconds");
  CHECK(std::filesystem::exists(dir / "run_log.jsonl"));
}
