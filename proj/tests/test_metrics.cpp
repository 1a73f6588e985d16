#include <doctest.h>

#include <cmath>

#include "alm/metrics.hpp"
#include "test_support.hpp"

using namespace alm;

TEST_CASE("hand-computed confusion fixtures") {
  for (const auto& f : testing::metric_fixtures()) {
    CAPTURE(f.name);
    const MetricReport m = metrics(f.gold, f.pred, f.classes);
    CHECK(std::abs(m.accuracy - f.accuracy) <= 1e-12);
    CHECK(std::abs(m.f1 - f.f1) <= 1e-12);
    CHECK(std::abs(m.recall - f.recall) <= 1e-12);
    CHECK(m.zero_division == f.zero_division);
  }
}

TEST_CASE("worked values") {
  const std::vector<int> gold = {1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const std::vector<int> pred = {1, 1, 1, 0, 0, 1, 0, 0, 0, 0};
  CHECK(std::abs(metrics(gold, pred, 2).f1 - 6.0 / 9.0) <= 1e-12);

  const std::vector<int> g2 = {0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> p2 = {0, 0, 0, 1, 1, 1, 0, 0};
  CHECK(std::abs(macro_recall(ConfusionCounts(g2, p2, 2)) - 0.625) <= 1e-12);

  std::vector<int> g3(10, 0), p3(10, 0);
  p3[0] = p3[1] = 1;
  CHECK(metrics(g3, p3, 2).accuracy == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("confusion counts") {
  const std::vector<int> gold = {0, 0, 1, 2, 2, 2};
  const std::vector<int> pred = {0, 1, 1, 2, 0, 2};
  const ConfusionCounts cc(gold, pred, 3);
  CHECK(cc.at(0, 0) == 1);
  CHECK(cc.at(0, 1) == 1);
  CHECK(cc.at(2, 0) == 1);
  CHECK(cc.at(2, 2) == 2);
  std::size_t total = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) total += cc.at(i, j);
  CHECK(total == 6);
}

TEST_CASE("metric errors") {
  const std::vector<int> a = {0, 1};
  const std::vector<int> b = {0};
  CHECK_THROWS(metrics(a, b, 2));
  CHECK_THROWS(metrics(std::vector<int>{}, std::vector<int>{}, 2));
  CHECK_THROWS(metrics(std::vector<int>{0, 2}, std::vector<int>{0, 1}, 2));
}

TEST_CASE("metrics are invariant under consistent permutation") {
  CounterRng rng(5);
  std::vector<int> gold(200), pred(200);
  for (std::size_t i = 0; i < 200; ++i) {
    gold[i] = static_cast<int>(rng.below(4));
    pred[i] = rng.uniform() < 0.6 ? gold[i] : static_cast<int>(rng.below(4));
  }
  const MetricReport before = metrics(gold, pred, 4);
  std::vector<std::size_t> order(200);
  for (std::size_t i = 0; i < 200; ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<int> g2, p2;
  for (auto i : order) {
    g2.push_back(gold[i]);
    p2.push_back(pred[i]);
  }
  const MetricReport after = metrics(g2, p2, 4);
  CHECK(before.accuracy == after.accuracy);
  CHECK(std::abs(before.f1 - after.f1) <= 1e-12);
  CHECK(std::abs(before.recall - after.recall) <= 1e-12);
}

TEST_CASE("macro F1 equals the mean of independently computed per-class F1") {
  CounterRng rng(9);
  std::vector<int> gold(300), pred(300);
  for (std::size_t i = 0; i < 300; ++i) {
    gold[i] = static_cast<int>(rng.below(3));
    pred[i] = static_cast<int>(rng.below(3));
  }
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 300; ++i) {
      tp += gold[i] == c && pred[i] == c;
      fp += gold[i] != c && pred[i] == c;
      fn += gold[i] == c && pred[i] != c;
    }
    sum += 2 * tp / (2 * tp + fp + fn);
  }
  CHECK(std::abs(metrics(gold, pred, 3).f1 - sum / 3) <= 1e-12);
}

TEST_CASE("kfold") {
  SUBCASE("n = 10, k = 5") {
    const auto folds = kfold(10, 5, 1);
    REQUIRE(folds.size() == 5);
    std::vector<int> seen(10, 0);
    for (const auto& f : folds) {
      CHECK(f.test.size() == 2);
      CHECK(f.train.size() == 8);
      for (auto i : f.test) ++seen[i];
    }
    for (int s : seen) CHECK(s == 1);
  }
  SUBCASE("remainder rule") {
    const auto folds = kfold(11, 5, 1);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.test.size());
    CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});
  }
  SUBCASE("train is the complement of test") {
    for (const auto& f : kfold(23, 4, 3)) {
      std::vector<int> mark(23, 0);
      for (auto i : f.test) mark[i] += 1;
      for (auto i : f.train) mark[i] += 2;
      for (int m : mark) CHECK((m == 1 || m == 2));
    }
  }
  SUBCASE("deterministic") {
    const auto a = kfold(50, 5, 42);
    const auto b = kfold(50, 5, 42);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a[i].test == b[i].test);
  }
  CHECK_THROWS(kfold(3, 5, 0));
  CHECK_THROWS(kfold(10, 1, 0));
}

TEST_CASE("population std-dev and curve comparison") {
  const std::vector<double> v = {0.80, 0.82, 0.84};
  CHECK(population_stddev(v) == doctest::Approx(0.0163299316).epsilon(1e-9));
  for (double x : {0.1, 0.7, 1.0 / 3.0, 0.123456789}) {
    const std::vector<double> same = {x, x, x};
    CHECK(population_stddev(same) == 0.0);
  }

  const std::vector<std::vector<double>> curves = {{0.5, 0.6, 0.7}, {0.4, 0.5, 0.6}, {0.5, 0.6, 0.7, 0.9}};
  const auto cmp = compare_curves(curves, {{0, 1}, {0, 2}});
  REQUIRE(cmp.stddev.size() == 3);
  double mean = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    const std::vector<double> col = {curves[0][t], curves[1][t], curves[2][t]};
    const double m = (col[0] + col[1] + col[2]) / 3;
    const double sd = std::sqrt(((col[0] - m) * (col[0] - m) + (col[1] - m) * (col[1] - m) + (col[2] - m) * (col[2] - m)) / 3);
    CHECK(std::abs(cmp.stddev[t] - sd) <= 1e-12);
    mean += sd / 3;
  }
  CHECK(std::abs(cmp.mean_stddev - mean) <= 1e-12);
  CHECK(std::abs(cmp.mean_differences[0] - 0.1) <= 1e-12);
  CHECK(std::abs(cmp.mean_differences[1]) <= 1e-12);
}
