#include "alm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alm/error.hpp"
#include "alm/rng.hpp"

namespace alm {

ConfusionCounts::ConfusionCounts(std::span<const int> gold, std::span<const int> pred, std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {
  if (gold.size() != pred.size()) throw ValidationError("metrics: gold and pred differ in length");
  if (gold.empty()) throw ValidationError("metrics: empty input");
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || pred[i] < 0 || static_cast<std::size_t>(gold[i]) >= classes ||
        static_cast<std::size_t>(pred[i]) >= classes) {
      throw ValidationError("metrics: label outside [0, C)");
    }
    ++counts_[static_cast<std::size_t>(gold[i]) * classes + static_cast<std::size_t>(pred[i])];
  }
  total_ = gold.size();
}

std::size_t ConfusionCounts::false_positives(std::size_t c) const noexcept {
  std::size_t s = 0;
  for (std::size_t g = 0; g < classes_; ++g) {
    if (g != c) s += at(g, c);
  }
  return s;
}

std::size_t ConfusionCounts::false_negatives(std::size_t c) const noexcept {
  std::size_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) {
    if (p != c) s += at(c, p);
  }
  return s;
}

namespace {

double ratio(std::size_t num, std::size_t den, bool& zero_division) {
  if (den == 0) {
    zero_division = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double f1_term(const ConfusionCounts& cc, std::size_t c, bool& zd) {
  const std::size_t tp = cc.true_positives(c);
  return ratio(2 * tp, 2 * tp + cc.false_positives(c) + cc.false_negatives(c), zd);
}

double recall_term(const ConfusionCounts& cc, std::size_t c, bool& zd) {
  return ratio(cc.true_positives(c), cc.true_positives(c) + cc.false_negatives(c), zd);
}

}  // namespace

double macro_f1(const ConfusionCounts& counts) {
  bool zd = false;
  double s = 0.0;
  for (std::size_t c = 0; c < counts.classes(); ++c) s += f1_term(counts, c, zd);
  return s / static_cast<double>(counts.classes());
}

double macro_recall(const ConfusionCounts& counts) {
  bool zd = false;
  double s = 0.0;
  for (std::size_t c = 0; c < counts.classes(); ++c) s += recall_term(counts, c, zd);
  return s / static_cast<double>(counts.classes());
}

MetricReport metrics(const ConfusionCounts& counts) {
  MetricReport r;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < counts.classes(); ++c) correct += counts.true_positives(c);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(counts.total());
  if (counts.classes() == 2) {
    r.f1 = f1_term(counts, 1, r.zero_division);
    r.recall = recall_term(counts, 1, r.zero_division);
  } else {
    double f = 0.0, rec = 0.0;
    for (std::size_t c = 0; c < counts.classes(); ++c) {
      f += f1_term(counts, c, r.zero_division);
      rec += recall_term(counts, c, r.zero_division);
    }
    r.f1 = f / static_cast<double>(counts.classes());
    r.recall = rec / static_cast<double>(counts.classes());
  }
  return r;
}

MetricReport metrics(std::span<const int> gold, std::span<const int> pred, std::size_t classes) {
  return metrics(ConfusionCounts(gold, pred, classes));
}

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t rng_seed) {
  if (k < 2) throw ValidationError("kfold: k must be >= 2");
  if (n < k) throw ValidationError("kfold: n = " + std::to_string(n) + " is smaller than k = " + std::to_string(k));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(rng_seed);
  shuffle(order, rng);
  std::vector<Fold> folds(k);
  std::size_t begin = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    folds[f].test.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(begin + len));
    std::sort(folds[f].test.begin(), folds[f].test.end());
    begin += len;
  }
  for (auto& fold : folds) {
    std::vector<bool> in_test(n, false);
    for (std::size_t i : fold.test) in_test[i] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_test[i]) fold.train.push_back(i);
    }
  }
  return folds;
}

double population_stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  // Welford: identical inputs give exactly 0.
  double mean = 0.0, ss = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    ss += delta * (v - mean);
  }
  return std::sqrt(ss / static_cast<double>(values.size()));
}

CurveComparison compare_curves(const std::vector<std::vector<double>>& curves,
                               const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  CurveComparison out;
  out.pairs = pairs;
  if (curves.empty()) return out;
  std::size_t len = curves.front().size();
  for (const auto& c : curves) len = std::min(len, c.size());
  std::vector<double> column(curves.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t s = 0; s < curves.size(); ++s) column[s] = curves[s][t];
    out.stddev.push_back(population_stddev(column));
  }
  const auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.mean_stddev = mean(out.stddev);
  for (const auto& [a, b] : pairs) {
    if (a >= curves.size() || b >= curves.size()) throw ValidationError("compare_curves: pair index out of range");
    std::vector<double> diff(len);
    for (std::size_t t = 0; t < len; ++t) diff[t] = curves[a][t] - curves[b][t];
    out.mean_differences.push_back(mean(diff));
    out.differences.push_back(std::move(diff));
  }
  return out;
}

}  // namespace alm
