#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alm/corpus.hpp"
#include "alm/embedding.hpp"
#include "alm/metrics.hpp"
#include "alm/models.hpp"
#include "alm/oracle.hpp"
#include "alm/strategies.hpp"

namespace alm {

struct LoopConfig {
  std::size_t seed_size = 50;
  std::size_t batch_size = 5;
  std::size_t iterations = 100;
  StrategySpec strategy;
  /// Model retrained and evaluated each iteration. QBC always uses the committee.
  ClassifierSpec classifier;
  std::uint64_t rng_seed = 0;
  /// When false every time field is written as 0 so artifacts are reproducible.
  bool timing = true;

  void validate() const;
};

/// A selected index the oracle could not label, and what replaced it.
struct LabelFailure {
  std::size_t index = 0;
  std::string error;
  std::vector<std::string> raw_responses;
  std::optional<std::size_t> substitute;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t labeled_count = 0;  // size of the set the evaluated model was trained on
  MetricReport metrics;
  std::vector<std::size_t> queried;  // acquired after evaluation in this iteration
  std::vector<int> acquired_labels;
  std::vector<LabelFailure> failures;
  // Snapshots taken at evaluation time, i.e. covering the labels the model saw.
  UsageTotals usage;
  double compute_seconds = 0.0;
  double wall_seconds = 0.0;
};

struct LoopResult {
  std::vector<std::size_t> seed_indices;
  std::vector<IterationRecord> records;
  PoolState final_pool;
};

/// Oracle failure that is not a labeling failure; carries the records so far.
class LoopAborted : public Error {
 public:
  LoopAborted(const std::string& what, std::vector<IterationRecord> partial)
      : Error(what), partial_(std::move(partial)) {}
  const std::vector<IterationRecord>& partial() const noexcept { return partial_; }

 private:
  std::vector<IterationRecord> partial_;
};

/// Hands out substitutes for failed selections: the next-ranked candidates
/// from the strategy's ordering, each at most once.
class ReplacementPolicy {
 public:
  explicit ReplacementPolicy(const QuerySelection& selection) : backups_(selection.backups) {}
  std::optional<std::size_t> substitute(std::size_t failed_index);

 private:
  std::vector<std::size_t> backups_;
  std::size_t cursor_ = 0;
};

/// Moves seed_size randomly chosen indices to the labeled set. Failed seed
/// labels are replaced by the next index in the seeded order; running out
/// of candidates is an error.
PoolState init_seed(PoolState pool, const Corpus& corpus, const LoopConfig& config, Oracle& oracle, UsageMeter& meter,
                    std::vector<LabelFailure>* failures = nullptr);

/// Model used for evaluation and uncertainty under this configuration.
ClassifierSpec effective_classifier(const LoopConfig& config);

/// Retrain -> evaluate -> query -> label -> update, `iterations` times plus
/// the final evaluation. Record t reflects seed_size + t * batch_size labels
/// when no labeling failed.
LoopResult run_loop(const Corpus& corpus, const EmbeddingMatrix& x, const LoopConfig& config,
                    std::span<const std::size_t> pool_indices, std::span<const std::size_t> test_indices,
                    Oracle& seed_oracle, Oracle& query_oracle, UsageMeter& meter,
                    const std::function<void(const IterationRecord&)>& on_record = {});

}  // namespace alm
