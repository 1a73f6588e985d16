#pragma once

// Independent reference routines and fixtures shared by the unit tests and
// the acceptance binary.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "alm/corpus.hpp"
#include "alm/embedding.hpp"
#include "alm/metrics.hpp"
#include "alm/mock_server.hpp"
#include "alm/models.hpp"
#include "alm/oracle.hpp"
#include "alm/rng.hpp"
#include "alm/strategies.hpp"

namespace alm::testing {

/// -sum p ln p in long double, zero terms skipped.
inline double brute_entropy(const std::vector<double>& p) {
  long double h = 0.0L;
  for (double v : p) {
    if (v > 0.0) h -= static_cast<long double>(v) * std::log(static_cast<long double>(v));
  }
  return static_cast<double>(h);
}

/// Random row-stochastic matrix; roughly one entry in five is exactly 0.
inline ProbabilityMatrix random_probabilities(std::size_t rows, std::size_t cols, CounterRng& rng) {
  ProbabilityMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      m(r, c) = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      total += m(r, c);
    }
    if (total == 0.0) {
      m(r, 0) = 1.0;
      total = 1.0;
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) /= total;
  }
  return m;
}

/// Greedy k-center recomputed from scratch at every step: each candidate's
/// distance to every chosen centre, no incremental state.
inline std::vector<std::size_t> brute_coreset(const std::vector<std::vector<double>>& points,
                                              const std::vector<std::size_t>& labeled,
                                              const std::vector<std::size_t>& unlabeled, std::size_t batch) {
  std::vector<std::size_t> centres = labeled;
  std::vector<std::size_t> chosen;
  std::vector<bool> used(points.size(), false);
  for (std::size_t step = 0; step < batch && step < unlabeled.size(); ++step) {
    double best_score = -1.0;
    std::size_t best = 0;
    for (std::size_t u : unlabeled) {
      if (used[u]) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t c : centres) {
        double s = 0.0;
        for (std::size_t d = 0; d < points[u].size(); ++d) s += (points[u][d] - points[c][d]) * (points[u][d] - points[c][d]);
        nearest = std::min(nearest, std::sqrt(s));
      }
      if (nearest > best_score) {
        best_score = nearest;
        best = u;
      }
    }
    used[best] = true;
    centres.push_back(best);
    chosen.push_back(best);
  }
  return chosen;
}

/// Returns fixed rows looked up by exact feature vector.
class LookupClassifier final : public Classifier {
 public:
  LookupClassifier(std::size_t classes, std::size_t dim) : classes_(classes), dim_(dim) {}
  void add(std::vector<double> features, std::vector<double> probs) { table_[features] = std::move(probs); }

  ClassifierKind kind() const noexcept override { return ClassifierKind::logistic; }
  std::size_t class_count() const noexcept override { return classes_; }
  std::size_t dim() const noexcept override { return dim_; }
  ProbabilityMatrix predict_proba(const Matrix& x) const override {
    ProbabilityMatrix p(x.rows(), classes_);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      std::vector<double> key(x.row(r).begin(), x.row(r).end());
      const auto& probs = table_.at(key);
      for (std::size_t c = 0; c < classes_; ++c) p(r, c) = probs[c];
    }
    return p;
  }

 private:
  std::size_t classes_, dim_;
  std::map<std::vector<double>, std::vector<double>> table_;
};

/// Central-difference check of LogisticObjective at a random point. Returns
/// ||g - fd|| / max(||g||, ||fd||).
inline double gradient_relative_error(const LogisticObjective& obj, CounterRng& rng, double h = 1e-5) {
  const std::size_t n = obj.parameter_count();
  std::vector<double> w(n), g(n), scratch(n);
  for (auto& v : w) v = 0.5 * rng.normal();
  obj.evaluate(w, g);
  double diff = 0.0, gn = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    const double fd = (obj.evaluate(wp, scratch) - obj.evaluate(wm, scratch)) / (2.0 * h);
    diff += (g[i] - fd) * (g[i] - fd);
    gn += g[i] * g[i];
    fn += fd * fd;
  }
  return std::sqrt(diff) / std::max({std::sqrt(gn), std::sqrt(fn), 1e-12});
}

/// 30 x 8 gaussian features with labels from a random linear rule.
struct LogisticFixture {
  Matrix x{30, 8};
  std::vector<int> y;
};

inline LogisticFixture logistic_fixture(std::size_t classes, std::uint64_t seed) {
  LogisticFixture f;
  CounterRng rng(seed);
  for (std::size_t r = 0; r < 30; ++r) {
    for (std::size_t c = 0; c < 8; ++c) f.x(r, c) = rng.normal();
    f.y.push_back(static_cast<int>(r % classes));
  }
  return f;
}

/// Hand-computed confusion fixtures: expected values are exact fractions.
struct MetricFixture {
  const char* name;
  std::size_t classes;
  std::vector<int> gold, pred;
  double accuracy, f1, recall;
  bool zero_division;
};

inline std::vector<MetricFixture> metric_fixtures() {
  return {
      {"binary TP3 FP1 FN2", 2, {1, 1, 1, 1, 1, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 0, 1, 0, 0, 0, 0}, 7.0 / 10, 6.0 / 9, 3.0 / 5, false},
      {"binary recall 2 of 4", 2, {0, 0, 0, 0, 1, 1, 1, 1}, {0, 0, 0, 1, 1, 1, 0, 0}, 5.0 / 8, 4.0 / 7, 2.0 / 4, false},
      {"perfect three-class", 3, {0, 1, 2, 0, 1, 2}, {0, 1, 2, 0, 1, 2}, 1.0, 1.0, 1.0, false},
      {"binary all wrong", 2, {0, 1, 0, 1}, {1, 0, 1, 0}, 0.0, 0.0, 0.0, false},
      {"three-class macro", 3, {0, 0, 0, 1, 1, 2}, {0, 0, 1, 1, 2, 2}, 4.0 / 6, 59.0 / 90, 13.0 / 18, false},
      {"four-class absent class", 4, {0, 1, 2, 0}, {0, 1, 2, 1}, 3.0 / 4, 7.0 / 12, 5.0 / 8, true},
      {"binary no positives", 2, {0, 0, 0}, {0, 0, 0}, 1.0, 0.0, 0.0, true},
      {"binary all positive", 2, {1, 0, 1, 0, 0}, {1, 1, 1, 1, 1}, 2.0 / 5, 4.0 / 7, 1.0, false},
      {"four-class rotation", 4, {0, 1, 2, 3, 0, 1, 2, 3}, {0, 1, 2, 3, 1, 2, 3, 0}, 4.0 / 8, 1.0 / 2, 1.0 / 2, false},
      {"three-class mixed", 3, {2, 2, 2, 2, 1, 0}, {2, 2, 0, 0, 1, 1}, 3.0 / 6, 4.0 / 9, 1.0 / 2, false},
  };
}

/// Corpus of `n` labeled texts "item <i> ..." with labels i % classes.
inline Corpus numbered_corpus(std::size_t n, std::size_t classes) {
  std::vector<Instance> items;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    items.push_back(Instance{i, "item " + std::to_string(i) + " text", static_cast<int>(i % classes), i});
  }
  return Corpus(std::move(items), std::move(names));
}

/// Scripted prompt tokens for instance i; completion tokens are always 1.
inline long long scripted_prompt_tokens(std::size_t i) { return 90 + static_cast<long long>(i % 13); }

/// Mock script that answers every instance of `corpus` with its gold label,
/// keyed by the hash of the exact request body.
inline MockScript gold_script(const Corpus& corpus, const PromptTemplate& tmpl, const std::string& model = "gpt-4o") {
  MockScript s;
  for (const auto& inst : corpus.instances()) {
    MockReply r;
    r.content = std::to_string(*inst.gold_label);
    r.prompt_tokens = scripted_prompt_tokens(inst.id);
    r.completion_tokens = 1;
    s.by_hash[request_hash(build_chat_request(model, render_prompt(tmpl, inst.text)))] = r;
  }
  return s;
}

/// Template whose instruction names label codes 0..classes-1.
inline PromptTemplate numbered_template(std::size_t classes) {
  std::string codes;
  for (std::size_t c = 0; c < classes; ++c) codes += (c ? ", " : "") + std::to_string(c);
  return {"synthetic item classification", "multi-class classification task",
          "classify the following item into one of the codes " + codes};
}

}  // namespace alm::testing
