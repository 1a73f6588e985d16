#include <doctest.h>

#include <cmath>

#include "alm/models.hpp"
#include "alm/rng.hpp"
#include "test_support.hpp"

using namespace alm;

namespace {

/// Two-feature blobs, well separated, labels i % classes.
void blobs(std::size_t n, std::size_t classes, std::uint64_t seed, Matrix& x, std::vector<int>& y) {
  CounterRng rng(seed);
  x = Matrix(n, 2);
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    const double angle = 2.0 * 3.141592653589793 * c / static_cast<double>(classes);
    x(i, 0) = 4.0 * std::cos(angle) + 0.5 * rng.normal();
    x(i, 1) = 4.0 * std::sin(angle) + 0.5 * rng.normal();
    y.push_back(c);
  }
}

double accuracy(const Classifier& m, const Matrix& x, const std::vector<int>& y) {
  const auto pred = m.predict(x);
  double ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred[i] == y[i];
  return ok / static_cast<double>(y.size());
}

void check_stochastic(const ProbabilityMatrix& p) {
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) {
      CHECK(p(r, c) >= 0.0);
      s += p(r, c);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

}  // namespace

TEST_CASE("logistic gradient matches central differences") {
  for (std::size_t classes : {2u, 3u}) {
    const auto f = testing::logistic_fixture(classes, 17);
    const LogisticObjective obj{f.x, f.y, classes, 1.0};
    CounterRng rng(classes);
    for (int point = 0; point < 5; ++point) CHECK(testing::gradient_relative_error(obj, rng) < 1e-4);
  }
}

TEST_CASE("logistic loss is non-increasing along the fit") {
  const auto f = testing::logistic_fixture(3, 4);
  const LogisticObjective obj{f.x, f.y, 3, 1.0};
  LogisticFitTrace trace;
  fit_logistic_parameters(obj, LogisticParams{}, &trace);
  REQUIRE(trace.losses.size() >= 2);
  for (std::size_t i = 1; i < trace.losses.size(); ++i) CHECK(trace.losses[i] <= trace.losses[i - 1]);
  CHECK(trace.converged);
}

TEST_CASE("every classifier learns separable blobs") {
  Matrix x;
  std::vector<int> y;
  blobs(120, 3, 1, x, y);
  for (auto kind : {ClassifierKind::logistic, ClassifierKind::linear_svm, ClassifierKind::decision_tree,
                    ClassifierKind::random_forest, ClassifierKind::committee}) {
    CAPTURE(to_string(kind));
    ClassifierSpec spec;
    spec.kind = kind;
    spec.forest.trees = 20;
    const auto m = train(spec, x, y, 3);
    CHECK(m->class_count() == 3);
    CHECK(accuracy(*m, x, y) > 0.95);
    check_stochastic(m->predict_proba(x));
  }
}

TEST_CASE("binary svm probabilities are calibrated and monotone") {
  Matrix x;
  std::vector<int> y;
  blobs(80, 2, 2, x, y);
  ClassifierSpec spec;
  spec.kind = ClassifierKind::linear_svm;
  const auto m = train(spec, x, y, 2);
  check_stochastic(m->predict_proba(x));
  CHECK(accuracy(*m, x, y) > 0.95);
}

TEST_CASE("fit_platt recovers a known sigmoid direction") {
  std::vector<double> f;
  std::vector<int> t;
  for (int i = -20; i <= 20; ++i) {
    f.push_back(i * 0.2);
    t.push_back(i > 0 ? 1 : 0);
  }
  const PlattFit p = fit_platt(f, t);
  CHECK(p.a < 0.0);
}

TEST_CASE("absent classes get probability zero") {
  Matrix x;
  std::vector<int> y;
  blobs(60, 2, 3, x, y);
  const auto m = train(ClassifierSpec{}, x, y, 4);
  const auto p = m->predict_proba(x);
  REQUIRE(p.cols() == 4);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    CHECK(p(r, 2) == 0.0);
    CHECK(p(r, 3) == 0.0);
  }
  std::vector<int> one(60, 1);
  const auto c = train(ClassifierSpec{}, x, one, 3);
  const auto pc = c->predict_proba(x);
  CHECK(pc(0, 1) == 1.0);
}

TEST_CASE("committee is the exact member average") {
  Matrix x;
  std::vector<int> y;
  blobs(90, 3, 5, x, y);
  const auto committee = train_committee(x, y, 3, 8);
  const auto members = committee_members(*committee);
  REQUIRE(members.size() == 4);
  const auto p = committee->predict_proba(x);
  std::vector<ProbabilityMatrix> mp;
  for (const auto& m : members) mp.push_back(m->predict_proba(x));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (const auto& q : mp) s += q(r, c);
      CHECK(p(r, c) == s / 4.0);
    }
  }

  ClassifierSpec three;
  three.kind = ClassifierKind::committee;
  three.members = {ClassifierKind::logistic, ClassifierKind::decision_tree, ClassifierKind::linear_svm};
  CHECK(committee_members(*train(three, x, y, 3)).size() == 3);
}

TEST_CASE("training is deterministic and rejects bad input") {
  Matrix x;
  std::vector<int> y;
  blobs(50, 2, 6, x, y);
  ClassifierSpec spec;
  spec.kind = ClassifierKind::random_forest;
  spec.forest.trees = 10;
  spec.rng_seed = 3;
  CHECK(train(spec, x, y, 2)->predict_proba(x) == train(spec, x, y, 2)->predict_proba(x));

  std::vector<int> bad = y;
  bad[0] = 5;
  CHECK_THROWS(train(ClassifierSpec{}, x, bad, 2));
  Matrix nan = x;
  nan(0, 0) = std::nan("");
  CHECK_THROWS(train(ClassifierSpec{}, nan, y, 2));
  ClassifierSpec invalid;
  invalid.svm.c = 0.0;
  CHECK_THROWS(invalid.validate());
}

TEST_CASE("decision tree splits on the lowest feature at ties") {
  Matrix x(4, 2, std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});
  const std::vector<int> y = {0, 0, 1, 1};
  ClassifierSpec spec;
  spec.kind = ClassifierKind::decision_tree;
  const auto m = train(spec, x, y, 2);
  Matrix probe(2, 2, std::vector<double>{0.2, 0.9, 0.9, 0.2});
  const auto pred = m->predict(probe);
  CHECK(pred[0] == 0);  // decided by feature 0
  CHECK(pred[1] == 1);
}
