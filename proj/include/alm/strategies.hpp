#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alm/embedding.hpp"
#include "alm/models.hpp"

namespace alm {

/// Disjoint labeled / unlabeled partition of the initial pool.
/// `labeled` keeps acquisition order; `unlabeled` stays sorted ascending.
class PoolState {
 public:
  PoolState() = default;
  explicit PoolState(std::vector<std::size_t> pool);

  const std::vector<std::size_t>& labeled() const noexcept { return labeled_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::size_t>& unlabeled() const noexcept { return unlabeled_; }
  std::size_t initial_size() const noexcept { return initial_.size(); }

  /// Moves `index` from unlabeled to labeled. Throws if it is not unlabeled.
  void acquire(std::size_t index, int label);
  bool is_unlabeled(std::size_t index) const;

  /// Throws unless labeled and unlabeled partition the initial pool.
  void check_conservation() const;

 private:
  std::vector<std::size_t> initial_;  // sorted
  std::vector<std::size_t> labeled_;
  std::vector<int> labels_;
  std::vector<std::size_t> unlabeled_;
};

/// Selected batch plus the remaining ranked candidates, used for substitution
/// when an oracle fails on a selected index.
struct QuerySelection {
  std::vector<std::size_t> indices;
  std::vector<double> scores;
  std::vector<std::size_t> backups;
};

enum class StrategyKind { qbc, entropy_diversity, coreset, info_density, random };

const char* to_string(StrategyKind kind) noexcept;
StrategyKind parse_strategy_kind(const std::string& name);

struct StrategySpec {
  StrategyKind kind = StrategyKind::entropy_diversity;
  std::size_t candidate_factor = 10;

  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

/// Shannon entropy in nats; 0 log 0 = 0.
double entropy(std::span<const double> p);

/// Entropy of the member-averaged distribution for one sample.
double voting_entropy(std::span<const ProbabilityMatrix> members, std::size_t row);

QuerySelection select_qbc(const PoolState& pool, const EmbeddingMatrix& x, const Classifier& committee, std::size_t batch);

QuerySelection select_entropy_diversity(const PoolState& pool, const EmbeddingMatrix& x, const Classifier& model,
                                        std::size_t batch, std::size_t candidate_factor);

QuerySelection select_coreset(const PoolState& pool, const EmbeddingMatrix& x, std::size_t batch);

QuerySelection select_info_density(const PoolState& pool, const EmbeddingMatrix& x, const Classifier& model,
                                   std::size_t batch);

QuerySelection select_random(const PoolState& pool, std::size_t batch, std::uint64_t rng_seed);

/// Mean cosine similarity of each unlabeled point to the other unlabeled
/// points, clamped below at 0; a singleton pool has density 1.
std::vector<double> unlabeled_density(const PoolState& pool, const EmbeddingMatrix& x);

double euclidean(std::span<const float> a, std::span<const float> b);

}  // namespace alm
