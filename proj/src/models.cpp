#include "alm/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alm/error.hpp"

namespace alm {

// Defined in the per-model translation units.
ClassifierPtr train_logistic_compact(const LogisticParams&, const Matrix&, std::span<const int>, std::size_t);
ClassifierPtr train_svm_compact(const SvmParams&, const Matrix&, std::span<const int>, std::size_t);
ClassifierPtr train_tree_compact(const TreeParams&, const Matrix&, std::span<const int>, std::size_t);
ClassifierPtr train_forest_compact(const ForestParams&, const TreeParams&, const Matrix&, std::span<const int>,
                                   std::size_t, std::uint64_t);

namespace {

/// Single-class fallback.
class ConstantClassifier final : public Classifier {
 public:
  ConstantClassifier(ClassifierKind kind, std::size_t dim, std::size_t classes, int label)
      : kind_(kind), dim_(dim), classes_(classes), label_(label) {}
  ClassifierKind kind() const noexcept override { return kind_; }
  std::size_t class_count() const noexcept override { return classes_; }
  std::size_t dim() const noexcept override { return dim_; }
  ProbabilityMatrix predict_proba(const Matrix& x) const override {
    if (x.cols() != dim_) throw Error("predict_proba: expected " + std::to_string(dim_) + " columns");
    ProbabilityMatrix p(x.rows(), classes_, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) p(r, static_cast<std::size_t>(label_)) = 1.0;
    return p;
  }

 private:
  ClassifierKind kind_;
  std::size_t dim_;
  std::size_t classes_;
  int label_;
};

/// Lifts a model trained on the present classes (compact ids) back to all C classes.
class ExpandedClassifier final : public Classifier {
 public:
  ExpandedClassifier(ClassifierPtr inner, std::vector<int> class_map, std::size_t classes)
      : inner_(std::move(inner)), class_map_(std::move(class_map)), classes_(classes) {}
  ClassifierKind kind() const noexcept override { return inner_->kind(); }
  std::size_t class_count() const noexcept override { return classes_; }
  std::size_t dim() const noexcept override { return inner_->dim(); }
  ProbabilityMatrix predict_proba(const Matrix& x) const override {
    const ProbabilityMatrix compact = inner_->predict_proba(x);
    if (class_map_.size() == classes_) return compact;
    ProbabilityMatrix p(x.rows(), classes_, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t k = 0; k < class_map_.size(); ++k) p(r, static_cast<std::size_t>(class_map_[k])) = compact(r, k);
    }
    return p;
  }

 private:
  ClassifierPtr inner_;
  std::vector<int> class_map_;
  std::size_t classes_;
};

class Committee final : public Classifier {
 public:
  Committee(std::vector<ClassifierPtr> members, std::size_t dim, std::size_t classes)
      : members_(std::move(members)), dim_(dim), classes_(classes) {}
  ClassifierKind kind() const noexcept override { return ClassifierKind::committee; }
  std::size_t class_count() const noexcept override { return classes_; }
  std::size_t dim() const noexcept override { return dim_; }
  ProbabilityMatrix predict_proba(const Matrix& x) const override {
    if (x.cols() != dim_) throw Error("predict_proba: expected " + std::to_string(dim_) + " columns");
    ProbabilityMatrix sum(x.rows(), classes_, 0.0);
    for (const auto& m : members_) {
      const ProbabilityMatrix p = m->predict_proba(x);
      for (std::size_t i = 0; i < sum.data().size(); ++i) sum.data()[i] += p.data()[i];
    }
    const double count = static_cast<double>(members_.size());
    for (double& v : sum.data()) v /= count;
    return sum;
  }
  const std::vector<ClassifierPtr>& members() const noexcept { return members_; }

 private:
  std::vector<ClassifierPtr> members_;
  std::size_t dim_;
  std::size_t classes_;
};

}  // namespace

const char* to_string(ClassifierKind kind) noexcept {
  switch (kind) {
    case ClassifierKind::logistic: return "logistic";
    case ClassifierKind::linear_svm: return "linear_svm";
    case ClassifierKind::decision_tree: return "decision_tree";
    case ClassifierKind::random_forest: return "random_forest";
    case ClassifierKind::committee: return "committee";
  }
  return "unknown";
}

ClassifierKind parse_classifier_kind(const std::string& name) {
  for (auto k : {ClassifierKind::logistic, ClassifierKind::linear_svm, ClassifierKind::decision_tree,
                 ClassifierKind::random_forest, ClassifierKind::committee}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown classifier kind '" + name + "'");
}

void ClassifierSpec::validate() const {
  if (logistic.l2 < 0.0 || !std::isfinite(logistic.l2)) throw ValidationError("logistic l2 must be >= 0");
  if (logistic.max_iter < 1) throw ValidationError("logistic max_iter must be >= 1");
  if (logistic.grad_tol <= 0.0) throw ValidationError("logistic grad_tol must be > 0");
  if (logistic.history < 1) throw ValidationError("logistic history must be >= 1");
  if (svm.c <= 0.0) throw ValidationError("svm c must be > 0");
  if (svm.epochs < 1) throw ValidationError("svm epochs must be >= 1");
  if (tree.min_samples_leaf < 1) throw ValidationError("tree min_samples_leaf must be >= 1");
  if (forest.trees < 1) throw ValidationError("forest tree count must be >= 1");
  if (kind == ClassifierKind::committee) {
    if (members.empty()) throw ValidationError("committee needs at least one member");
    for (auto m : members) {
      if (m == ClassifierKind::committee) throw ValidationError("committee members cannot be committees");
    }
  }
}

std::vector<int> Classifier::predict(const Matrix& x) const {
  const ProbabilityMatrix p = predict_proba(x);
  std::vector<int> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto row = p.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

ClassifierPtr train(const ClassifierSpec& spec, const Matrix& x, std::span<const int> y, std::size_t class_count) {
  spec.validate();
  if (x.rows() == 0 || x.rows() != y.size()) throw ValidationError("train: need |X| = |y| >= 1");
  if (class_count < 2) throw ValidationError("train: class_count must be >= 2");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw ValidationError("train: non-finite feature");
  }
  std::vector<bool> present(class_count, false);
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
      throw ValidationError("train: label " + std::to_string(label) + " outside [0, " + std::to_string(class_count) + ")");
    }
    present[static_cast<std::size_t>(label)] = true;
  }

  if (spec.kind == ClassifierKind::committee) {
    std::vector<ClassifierPtr> members;
    for (auto kind : spec.members) {
      ClassifierSpec member = spec;
      member.kind = kind;
      members.push_back(train(member, x, y, class_count));
    }
    return std::make_shared<Committee>(std::move(members), x.cols(), class_count);
  }

  std::vector<int> class_map;
  std::vector<int> compact_of(class_count, -1);
  for (std::size_t c = 0; c < class_count; ++c) {
    if (present[c]) {
      compact_of[c] = static_cast<int>(class_map.size());
      class_map.push_back(static_cast<int>(c));
    }
  }
  if (class_map.size() == 1) return std::make_shared<ConstantClassifier>(spec.kind, x.cols(), class_count, class_map[0]);

  std::vector<int> compact(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) compact[i] = compact_of[static_cast<std::size_t>(y[i])];
  const std::size_t k = class_map.size();

  ClassifierPtr inner;
  switch (spec.kind) {
    case ClassifierKind::logistic: inner = train_logistic_compact(spec.logistic, x, compact, k); break;
    case ClassifierKind::linear_svm: inner = train_svm_compact(spec.svm, x, compact, k); break;
    case ClassifierKind::decision_tree: inner = train_tree_compact(spec.tree, x, compact, k); break;
    case ClassifierKind::random_forest:
      inner = train_forest_compact(spec.forest, spec.tree, x, compact, k, spec.rng_seed);
      break;
    case ClassifierKind::committee: break;  // handled above
  }
  return std::make_shared<ExpandedClassifier>(std::move(inner), std::move(class_map), class_count);
}

ClassifierPtr train_committee(const Matrix& x, std::span<const int> y, std::size_t class_count, std::uint64_t rng_seed) {
  ClassifierSpec spec;
  spec.kind = ClassifierKind::committee;
  spec.rng_seed = rng_seed;
  return train(spec, x, y, class_count);
}

std::vector<ClassifierPtr> committee_members(const Classifier& model) {
  if (const auto* c = dynamic_cast<const Committee*>(&model)) return c->members();
  return {};
}

}  // namespace alm
