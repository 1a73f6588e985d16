#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace alm {

/// counts[gold][pred].
class ConfusionCounts {
 public:
  ConfusionCounts(std::span<const int> gold, std::span<const int> pred, std::size_t classes);

  std::size_t classes() const noexcept { return classes_; }
  std::size_t at(std::size_t gold, std::size_t pred) const noexcept { return counts_[gold * classes_ + pred]; }
  std::size_t total() const noexcept { return total_; }
  std::size_t true_positives(std::size_t c) const noexcept { return at(c, c); }
  std::size_t false_positives(std::size_t c) const noexcept;
  std::size_t false_negatives(std::size_t c) const noexcept;

 private:
  std::size_t classes_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

/// Accuracy plus F1 and recall: binary on class 1 when C = 2, macro otherwise.
struct MetricReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  double recall = 0.0;
  /// A per-class F1 or recall denominator was zero and its term was taken as 0.
  bool zero_division = false;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport metrics(std::span<const int> gold, std::span<const int> pred, std::size_t classes);
MetricReport metrics(const ConfusionCounts& counts);

/// Macro average over all classes regardless of C (used for cross-checks).
double macro_f1(const ConfusionCounts& counts);
double macro_recall(const ConfusionCounts& counts);

struct Fold {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Seeded shuffle then contiguous chunking; the first n % k folds get one extra.
std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t rng_seed);

/// Population standard deviation (divide by N).
double population_stddev(std::span<const double> values);

/// Per-iteration spread of several accuracy curves plus pairwise differences.
struct CurveComparison {
  std::vector<double> stddev;                              // per iteration
  double mean_stddev = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (a, b): curve a minus curve b
  std::vector<std::vector<double>> differences;            // per pair, per iteration
  std::vector<double> mean_differences;                    // per pair
};

/// Curves are truncated to the shortest one.
CurveComparison compare_curves(const std::vector<std::vector<double>>& curves,
                               const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

}  // namespace alm
