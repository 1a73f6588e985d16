#include <algorithm>
#include <numeric>

#include "alm/error.hpp"
#include "alm/models.hpp"
#include "alm/rng.hpp"

namespace alm {
namespace {

struct Node {
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;   // child node ids; 0 marks a leaf (root is never a child)
  std::size_t right = 0;
  std::size_t leaf = 0;   // offset into the leaf distribution table
};

/// CART tree with Gini impurity. Rows are sample positions into a
/// (possibly bootstrapped) list of training indices.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, std::size_t classes, const TreeParams& params,
              std::vector<std::size_t> samples)
      : x_(x), y_(y), classes_(classes), params_(params), samples_(std::move(samples)) {}

  void build(std::vector<Node>& nodes, std::vector<double>& leaves) {
    nodes_ = &nodes;
    leaves_ = &leaves;
    const std::size_t d = x_.cols();
    std::vector<std::vector<std::size_t>> order(d);
    for (std::size_t f = 0; f < d; ++f) {
      auto& o = order[f];
      o.resize(samples_.size());
      std::iota(o.begin(), o.end(), std::size_t{0});
      std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return value(a, f) < value(b, f); });
    }
    going_left_.assign(samples_.size(), false);
    nodes.emplace_back();
    grow(0, std::move(order), 0);
  }

 private:
  double value(std::size_t pos, std::size_t f) const { return x_(samples_[pos], f); }
  int label(std::size_t pos) const { return y_[samples_[pos]]; }

  void make_leaf(std::size_t node, const std::vector<std::size_t>& counts, std::size_t total) {
    (*nodes_)[node].leaf = leaves_->size();
    for (std::size_t c = 0; c < classes_; ++c) {
      leaves_->push_back(static_cast<double>(counts[c]) / static_cast<double>(total));
    }
  }

  void grow(std::size_t node, std::vector<std::vector<std::size_t>> order, std::size_t depth) {
    const auto& members = order.front();
    const std::size_t m = members.size();
    std::vector<std::size_t> counts(classes_, 0);
    for (std::size_t pos : members) ++counts[static_cast<std::size_t>(label(pos))];
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    const std::size_t min_leaf = params_.min_samples_leaf;
    if (pure || m < 2 * min_leaf || (params_.max_depth != 0 && depth >= params_.max_depth)) {
      make_leaf(node, counts, m);
      return;
    }

    // Maximize sum(L_c^2)/nL + sum(R_c^2)/nR, i.e. minimize weighted Gini.
    // Strict improvement keeps the lowest feature, then the lowest threshold.
    bool found = false;
    double best_score = 0.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    std::vector<long long> left(classes_), right(classes_);
    for (std::size_t f = 0; f < order.size(); ++f) {
      const auto& o = order[f];
      std::fill(left.begin(), left.end(), 0);
      long long sq_left = 0, sq_right = 0;
      for (std::size_t c = 0; c < classes_; ++c) {
        right[c] = static_cast<long long>(counts[c]);
        sq_right += right[c] * right[c];
      }
      for (std::size_t k = 0; k + 1 < m; ++k) {
        const auto c = static_cast<std::size_t>(label(o[k]));
        sq_left += 2 * left[c] + 1;
        ++left[c];
        sq_right -= 2 * right[c] - 1;
        --right[c];
        const std::size_t n_left = k + 1, n_right = m - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double a = value(o[k], f), b = value(o[k + 1], f);
        if (!(a < b)) continue;
        const double s = static_cast<double>(sq_left) / static_cast<double>(n_left) +
                         static_cast<double>(sq_right) / static_cast<double>(n_right);
        if (!found || s > best_score) {
          found = true;
          best_score = s;
          best_feature = f;
          double t = a + (b - a) / 2.0;
          if (!(t < b)) t = a;
          best_threshold = t;
        }
      }
    }
    if (!found) {
      make_leaf(node, counts, m);
      return;
    }

    for (std::size_t pos : members) going_left_[pos] = value(pos, best_feature) <= best_threshold;
    std::vector<std::vector<std::size_t>> left_order(order.size()), right_order(order.size());
    for (std::size_t f = 0; f < order.size(); ++f) {
      for (std::size_t pos : order[f]) (going_left_[pos] ? left_order[f] : right_order[f]).push_back(pos);
    }
    order.clear();
    order.shrink_to_fit();

    const std::size_t left_id = nodes_->size();
    nodes_->emplace_back();
    const std::size_t right_id = nodes_->size();
    nodes_->emplace_back();
    Node& n = (*nodes_)[node];
    n.feature = best_feature;
    n.threshold = best_threshold;
    n.left = left_id;
    n.right = right_id;
    grow(left_id, std::move(left_order), depth + 1);
    grow(right_id, std::move(right_order), depth + 1);
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::size_t classes_;
  TreeParams params_;
  std::vector<std::size_t> samples_;
  std::vector<bool> going_left_;
  std::vector<Node>* nodes_ = nullptr;
  std::vector<double>* leaves_ = nullptr;
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<double> leaves;

  std::span<const double> distribution(std::span<const double> x, std::size_t classes) const {
    std::size_t id = 0;
    while (nodes[id].left != 0) id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
    return {leaves.data() + nodes[id].leaf, classes};
  }
};

Tree grow_tree(const Matrix& x, std::span<const int> y, std::size_t classes, const TreeParams& params,
               std::vector<std::size_t> samples) {
  Tree t;
  TreeBuilder(x, y, classes, params, std::move(samples)).build(t.nodes, t.leaves);
  return t;
}

class TreeEnsemble final : public Classifier {
 public:
  TreeEnsemble(ClassifierKind kind, std::size_t dim, std::size_t classes, std::vector<Tree> trees)
      : kind_(kind), dim_(dim), classes_(classes), trees_(std::move(trees)) {}
  ClassifierKind kind() const noexcept override { return kind_; }
  std::size_t class_count() const noexcept override { return classes_; }
  std::size_t dim() const noexcept override { return dim_; }

  ProbabilityMatrix predict_proba(const Matrix& x) const override {
    if (x.cols() != dim_) throw Error("predict_proba: expected " + std::to_string(dim_) + " columns");
    ProbabilityMatrix p(x.rows(), classes_, 0.0);
    const double count = static_cast<double>(trees_.size());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto out = p.row(i);
      for (const Tree& t : trees_) {
        const auto dist = t.distribution(x.row(i), classes_);
        for (std::size_t c = 0; c < classes_; ++c) out[c] += dist[c];
      }
      for (double& v : out) v /= count;
    }
    return p;
  }

 private:
  ClassifierKind kind_;
  std::size_t dim_;
  std::size_t classes_;
  std::vector<Tree> trees_;
};

}  // namespace

ClassifierPtr train_tree_compact(const TreeParams& params, const Matrix& x, std::span<const int> y, std::size_t classes) {
  std::vector<std::size_t> samples(x.rows());
  std::iota(samples.begin(), samples.end(), std::size_t{0});
  std::vector<Tree> trees;
  trees.push_back(grow_tree(x, y, classes, params, std::move(samples)));
  return std::make_shared<TreeEnsemble>(ClassifierKind::decision_tree, x.cols(), classes, std::move(trees));
}

ClassifierPtr train_forest_compact(const ForestParams& forest, const TreeParams& params, const Matrix& x,
                                   std::span<const int> y, std::size_t classes, std::uint64_t rng_seed) {
  const std::size_t n = x.rows();
  std::vector<Tree> trees;
  trees.reserve(forest.trees);
  for (std::size_t t = 0; t < forest.trees; ++t) {
    std::vector<std::size_t> samples(n);
    if (forest.bootstrap) {
      CounterRng rng(rng_seed, t);
      for (auto& s : samples) s = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    trees.push_back(grow_tree(x, y, classes, params, std::move(samples)));
  }
  return std::make_shared<TreeEnsemble>(ClassifierKind::random_forest, x.cols(), classes, std::move(trees));
}

}  // namespace alm
