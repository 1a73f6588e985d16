#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "alm/matrix.hpp"

namespace alm {

enum class ClassifierKind { logistic, linear_svm, decision_tree, random_forest, committee };

const char* to_string(ClassifierKind kind) noexcept;
ClassifierKind parse_classifier_kind(const std::string& name);

struct LogisticParams {
  double l2 = 1.0;          // penalty (l2 / 2) * ||W||^2, bias unpenalized
  int max_iter = 1000;
  double grad_tol = 1e-5;   // stop when max |gradient| falls below
  int history = 10;         // L-BFGS memory

  friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

struct SvmParams {
  double c = 1.0;     // hinge weight in 0.5 ||w||^2 + c * sum(hinge)
  int epochs = 300;   // full-batch subgradient steps

  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

struct TreeParams {
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_leaf = 1;

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct ForestParams {
  std::size_t trees = 100;
  bool bootstrap = true;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logistic;
  LogisticParams logistic;
  SvmParams svm;
  TreeParams tree;
  ForestParams forest;
  /// Committee members, soft-voted with equal weight.
  std::vector<ClassifierKind> members = {ClassifierKind::linear_svm, ClassifierKind::decision_tree,
                                         ClassifierKind::random_forest, ClassifierKind::logistic};
  std::uint64_t rng_seed = 0;

  /// Throws ValidationError on out-of-range hyperparameters.
  void validate() const;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// A fitted model. Immutable; predict may be called concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ClassifierKind kind() const noexcept = 0;
  virtual std::size_t class_count() const noexcept = 0;
  virtual std::size_t dim() const noexcept = 0;
  /// m x C row-stochastic matrix. Throws on column-count mismatch.
  virtual ProbabilityMatrix predict_proba(const Matrix& x) const = 0;

  std::vector<int> predict(const Matrix& x) const;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

/// Trains from scratch. Labels must lie in [0, class_count). When only one
/// class is present the model predicts probability 1 for it everywhere.
ClassifierPtr train(const ClassifierSpec& spec, const Matrix& x, std::span<const int> y, std::size_t class_count);

/// The four-member soft-voting committee with default hyperparameters.
ClassifierPtr train_committee(const Matrix& x, std::span<const int> y, std::size_t class_count, std::uint64_t rng_seed);

/// Committee members, in spec order. Empty for non-committee models.
std::vector<ClassifierPtr> committee_members(const Classifier& model);

// --- logistic regression internals, exposed for gradient checks ---

/// Objective over parameters laid out as [W (k x d) row-major, b (k)] where
/// k = 1 for two classes (class 0 logit pinned at 0) and k = C otherwise.
struct LogisticObjective {
  const Matrix& x;
  std::span<const int> y;
  std::size_t classes;
  double l2;

  std::size_t free_rows() const noexcept { return classes == 2 ? 1 : classes; }
  std::size_t parameter_count() const noexcept { return free_rows() * (x.cols() + 1); }
  /// Returns the loss and writes the gradient.
  double evaluate(std::span<const double> params, std::span<double> grad) const;
};

struct LogisticFitTrace {
  std::vector<double> losses;  // loss at each accepted iterate, starting at w = 0
  int iterations = 0;
  bool converged = false;
};

/// Deterministic L-BFGS with Armijo backtracking, from zero parameters.
std::vector<double> fit_logistic_parameters(const LogisticObjective& objective, const LogisticParams& params,
                                            LogisticFitTrace* trace = nullptr);

/// Logistic model with explicit parameters (same layout as the objective).
ClassifierPtr make_logistic(std::size_t dim, std::size_t class_count, std::vector<double> params);

/// Platt sigmoid fit: P(y=1|f) = 1 / (1 + exp(a f + b)).
struct PlattFit {
  double a = 0.0;
  double b = 0.0;
};
PlattFit fit_platt(std::span<const double> scores, std::span<const int> positive);

}  // namespace alm
