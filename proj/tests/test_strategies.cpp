#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "alm/strategies.hpp"
#include "test_support.hpp"

using namespace alm;

namespace {

EmbeddingMatrix points(const std::vector<std::vector<float>>& rows) {
  std::vector<float> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return EmbeddingMatrix(rows.size(), rows.front().size(), v);
}

std::vector<double> key(const EmbeddingMatrix& x, std::size_t i) { return {x.row(i).begin(), x.row(i).end()}; }

PoolState pool_of(std::size_t n, const std::vector<std::size_t>& labeled = {}) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  PoolState p(all);
  for (auto i : labeled) p.acquire(i, 0);
  return p;
}

void check_valid(const QuerySelection& s, const PoolState& p, std::size_t batch) {
  CHECK(s.indices.size() == std::min(batch, p.unlabeled().size()));
  std::set<std::size_t> seen(s.indices.begin(), s.indices.end());
  CHECK(seen.size() == s.indices.size());
  for (auto i : s.indices) CHECK(p.is_unlabeled(i));
}

}  // namespace

TEST_CASE("entropy values") {
  CHECK(entropy(std::vector<double>{0.9, 0.1}) == doctest::Approx(0.32508).epsilon(1e-4));
  CHECK(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(entropy(std::vector<double>{1.0, 0.0}) == 0.0);

  ProbabilityMatrix a(1, 2, std::vector<double>{0.8, 0.2});
  ProbabilityMatrix b(1, 2, std::vector<double>{0.6, 0.4});
  const std::vector<ProbabilityMatrix> members = {a, b};
  CHECK(voting_entropy(members, 0) == doctest::Approx(0.61086).epsilon(1e-4));
}

TEST_CASE("entropy matches the brute-force routine") {
  CounterRng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = trial % 2 ? 4 : 2;
    const std::size_t m = trial % 3 ? 4 : 1;
    std::vector<ProbabilityMatrix> members;
    for (std::size_t k = 0; k < m; ++k) members.push_back(testing::random_probabilities(5, c, rng));
    for (std::size_t r = 0; r < 5; ++r) {
      std::vector<double> row(members[0].row(r).begin(), members[0].row(r).end());
      CHECK(std::abs(entropy(row) - testing::brute_entropy(row)) <= 1e-9);
      std::vector<double> mean(c, 0.0);
      for (const auto& mm : members)
        for (std::size_t j = 0; j < c; ++j) mean[j] += mm(r, j) / static_cast<double>(m);
      const double h = voting_entropy(members, r);
      CHECK(std::abs(h - testing::brute_entropy(mean)) <= 1e-9);
      CHECK(h <= std::log(static_cast<double>(c)) + 1e-12);
    }
  }
}

TEST_CASE("core-set worked example") {
  const auto x = points({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const auto p = pool_of(4, {0});
  const auto one = select_coreset(p, x, 1);
  CHECK(one.indices == std::vector<std::size_t>{3});
  CHECK(one.scores[0] == 3.0);
  const auto two = select_coreset(p, x, 2);
  CHECK(two.indices == std::vector<std::size_t>{3, 1});
  CHECK_THROWS(select_coreset(pool_of(4), x, 1));
}

TEST_CASE("core-set coincident point is picked last") {
  const auto x = points({{0, 0}, {0, 0}, {5, 0}, {2, 2}});
  const auto s = select_coreset(pool_of(4, {0}), x, 3);
  CHECK(s.indices.back() == 1);
  CHECK(s.scores.back() == 0.0);
}

TEST_CASE("core-set matches brute force and is scale invariant") {
  CounterRng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng.below(100);
    std::vector<std::vector<float>> rows(n, std::vector<float>(3));
    std::vector<std::vector<double>> dbl(n, std::vector<double>(3));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < 3; ++d) dbl[i][d] = rows[i][d] = static_cast<float>(rng.normal());
    const auto x = points(rows);
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < 1 + rng.below(5); ++i) labeled.push_back(i * 3);
    const auto p = pool_of(n, labeled);
    const std::size_t batch = 1 + rng.below(5);
    const auto s = select_coreset(p, x, batch);
    check_valid(s, p, batch);
    CHECK(s.indices == testing::brute_coreset(dbl, p.labeled(), p.unlabeled(), batch));
    CHECK(select_coreset(p, x.scaled(4.0f), batch).indices == s.indices);
  }
}

TEST_CASE("information density 3-point fixture") {
  const auto x = points({{1.0f, 0.0f}, {0.6f, 0.8f}, {0.0f, 1.0f}});
  testing::LookupClassifier m(2, 2);
  m.add(key(x, 0), {0.5, 0.5});
  m.add(key(x, 1), {0.9, 0.1});
  m.add(key(x, 2), {0.7, 0.3});
  const auto p = pool_of(3);

  const auto density = unlabeled_density(p, x);
  std::vector<double> brute(3);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t d = 0; d < 2; ++d) {
        ab += x.row(i)[d] * x.row(j)[d];
        aa += x.row(i)[d] * x.row(i)[d];
        bb += x.row(j)[d] * x.row(j)[d];
      }
      s += ab / std::sqrt(aa * bb);
    }
    brute[i] = std::max(0.0, s / 2);
    CHECK(std::abs(density[i] - brute[i]) < 1e-7);
  }
  CHECK(density[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(density[1] == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(density[2] == doctest::Approx(0.4).epsilon(1e-6));

  const auto s = select_info_density(p, x, m, 3);
  CHECK(s.indices == std::vector<std::size_t>{2, 1, 0});
  CHECK(std::abs(s.scores[0] - testing::brute_entropy({0.7, 0.3}) * density[2]) < 1e-12);

  const auto single = pool_of(3, {0, 1});
  CHECK(unlabeled_density(single, x) == std::vector<double>{1.0});
}

TEST_CASE("entropy + diversity") {
  const auto x = points({{0, 0}, {0, 0}, {3, 0}, {0, 4}, {1, 1}});
  testing::LookupClassifier m(2, 2);
  m.add(key(x, 0), {0.5, 0.5});
  m.add(key(x, 2), {0.6, 0.4});
  m.add(key(x, 3), {0.6, 0.4});
  m.add(key(x, 4), {0.99, 0.01});
  const auto p = pool_of(5);

  SUBCASE("batch 1 is the entropy argmax") {
    CHECK(select_entropy_diversity(p, x, m, 1, 10).indices == std::vector<std::size_t>{0});
  }
  SUBCASE("a duplicate of a picked point adds no diversity") {
    const auto s = select_entropy_diversity(p, x, m, 3, 10);
    check_valid(s, p, 3);
    CHECK(s.indices[0] == 0);
    CHECK(s.indices[1] == 3);  // farthest of the 0.6/0.4 pair
    CHECK(std::find(s.indices.begin(), s.indices.end(), 1) == s.indices.end());
  }
  SUBCASE("candidate cap") {
    const auto s = select_entropy_diversity(p, x, m, 2, 1);
    CHECK(s.indices == std::vector<std::size_t>{0, 1});
  }
}

TEST_CASE("qbc ranks by voting entropy") {
  const auto x = points({{0}, {1}, {2}});
  testing::LookupClassifier m(2, 1);
  m.add(key(x, 0), {0.9, 0.1});
  m.add(key(x, 1), {0.5, 0.5});
  m.add(key(x, 2), {0.7, 0.3});
  const auto s = select_qbc(pool_of(3), x, m, 2);
  CHECK(s.indices == std::vector<std::size_t>{1, 2});
  CHECK(s.scores[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("random selection") {
  const auto p = pool_of(10);
  std::vector<int> hits(10, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto s = select_random(p, 1, seed);
    ++hits[s.indices[0]];
  }
  for (int h : hits) {
    CHECK(h >= 70);
    CHECK(h <= 130);
  }
  CHECK(select_random(p, 3, 9).indices == select_random(p, 3, 9).indices);
  const auto all = select_random(p, 20, 4);
  CHECK(all.indices.size() == 10);
  for (double sc : all.scores) CHECK(sc == 0.0);
}

TEST_CASE("pool state conservation") {
  auto p = pool_of(5);
  p.acquire(3, 1);
  p.acquire(0, 0);
  CHECK(p.labeled() == std::vector<std::size_t>{3, 0});
  CHECK(p.unlabeled() == std::vector<std::size_t>{1, 2, 4});
  CHECK_NOTHROW(p.check_conservation());
  CHECK_THROWS(p.acquire(3, 0));
  CHECK_THROWS(select_qbc(pool_of(2, {0, 1}), points({{0}, {1}}), testing::LookupClassifier(2, 1), 1));
}
