#include "alm/engine.hpp"

#include <algorithm>
#include <chrono>

#include "alm/rng.hpp"

namespace alm {
namespace {

enum Stream : std::uint64_t { kSeedStream = 1, kStrategyStream = 2, kModelStream = 3 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

QuerySelection run_strategy(const LoopConfig& config, const PoolState& pool, const EmbeddingMatrix& x,
                            const Classifier& model, std::size_t iteration) {
  const std::size_t batch = config.batch_size;
  switch (config.strategy.kind) {
    case StrategyKind::qbc: return select_qbc(pool, x, model, batch);
    case StrategyKind::entropy_diversity:
      return select_entropy_diversity(pool, x, model, batch, config.strategy.candidate_factor);
    case StrategyKind::coreset: return select_coreset(pool, x, batch);
    case StrategyKind::info_density: return select_info_density(pool, x, model, batch);
    case StrategyKind::random:
      return select_random(pool, batch, derive_seed(derive_seed(config.rng_seed, kStrategyStream), iteration));
  }
  throw Error("unknown strategy");
}

}  // namespace

void LoopConfig::validate() const {
  if (seed_size < 1) throw ValidationError("seed_size must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (strategy.candidate_factor < 1) throw ValidationError("candidate_factor must be >= 1");
  classifier.validate();
}

std::optional<std::size_t> ReplacementPolicy::substitute(std::size_t failed_index) {
  while (cursor_ < backups_.size()) {
    const std::size_t candidate = backups_[cursor_++];
    if (candidate != failed_index) return candidate;
  }
  return std::nullopt;
}

PoolState init_seed(PoolState pool, const Corpus& corpus, const LoopConfig& config, Oracle& oracle, UsageMeter& meter,
                    std::vector<LabelFailure>* failures) {
  if (pool.unlabeled().size() < config.seed_size) {
    throw ValidationError("pool of " + std::to_string(pool.unlabeled().size()) + " cannot supply a seed set of " +
                          std::to_string(config.seed_size));
  }
  std::vector<std::size_t> order(pool.unlabeled());
  CounterRng rng(config.rng_seed, kSeedStream);
  shuffle(order, rng);
  std::size_t next = 0;
  std::size_t acquired = 0;
  while (acquired < config.seed_size) {
    if (next >= order.size()) throw Error("seed initialization: oracle failed on every remaining candidate");
    const std::size_t idx = order[next++];
    try {
      const LabelResult r = oracle.label(corpus[idx], meter);
      pool.acquire(idx, r.label);
      ++acquired;
    } catch (const LabelingFailed& e) {
      if (failures) {
        LabelFailure f{idx, e.what(), e.raw_responses(), std::nullopt};
        if (next < order.size()) f.substitute = order[next];
        failures->push_back(std::move(f));
      }
    }
  }
  return pool;
}

ClassifierSpec effective_classifier(const LoopConfig& config) {
  ClassifierSpec spec = config.classifier;
  if (config.strategy.kind == StrategyKind::qbc) spec.kind = ClassifierKind::committee;
  spec.rng_seed = derive_seed(config.rng_seed, kModelStream);
  return spec;
}

LoopResult run_loop(const Corpus& corpus, const EmbeddingMatrix& x, const LoopConfig& config,
                    std::span<const std::size_t> pool_indices, std::span<const std::size_t> test_indices,
                    Oracle& seed_oracle, Oracle& query_oracle, UsageMeter& meter,
                    const std::function<void(const IterationRecord&)>& on_record) {
  config.validate();
  if (x.rows() != corpus.size()) throw ValidationError("embedding rows do not match corpus size");
  if (test_indices.empty()) throw ValidationError("run_loop needs a non-empty test set");
  {
    std::vector<std::size_t> p(pool_indices.begin(), pool_indices.end()), t(test_indices.begin(), test_indices.end());
    std::sort(p.begin(), p.end());
    std::sort(t.begin(), t.end());
    std::vector<std::size_t> overlap;
    std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(overlap));
    if (!overlap.empty()) throw ValidationError("test set overlaps the pool");
  }

  const auto start = Clock::now();
  LoopResult result;
  std::vector<LabelFailure> seed_failures;
  PoolState pool = init_seed(PoolState({pool_indices.begin(), pool_indices.end()}), corpus, config, seed_oracle, meter,
                             &seed_failures);
  result.seed_indices = pool.labeled();

  const ClassifierSpec spec = effective_classifier(config);
  const Matrix x_test = x.gather(test_indices);
  std::vector<int> y_test;
  y_test.reserve(test_indices.size());
  for (std::size_t i : test_indices) {
    if (!corpus[i].gold_label) throw ValidationError("test instance " + std::to_string(i) + " has no gold label");
    y_test.push_back(*corpus[i].gold_label);
  }

  double compute_seconds = 0.0;
  for (std::size_t t = 0; t <= config.iterations; ++t) {
    IterationRecord rec;
    rec.iteration = t;
    rec.labeled_count = pool.labeled().size();
    if (t == 0) rec.failures = std::move(seed_failures);

    auto compute_start = Clock::now();
    const ClassifierPtr model = train(spec, x.gather(pool.labeled()), pool.labels(), corpus.class_count());
    rec.metrics = metrics(y_test, model->predict(x_test), corpus.class_count());
    compute_seconds += seconds_since(compute_start);

    rec.usage = meter.totals();
    if (config.timing) {
      rec.compute_seconds = compute_seconds;
      rec.wall_seconds = seconds_since(start);
    } else {
      rec.usage.oracle_seconds = 0.0;
    }

    const bool exhausted = pool.unlabeled().empty();
    if (t < config.iterations && !exhausted) {
      compute_start = Clock::now();
      const QuerySelection sel = run_strategy(config, pool, x, *model, t);
      compute_seconds += seconds_since(compute_start);

      ReplacementPolicy replacement(sel);
      std::vector<std::size_t> queue(sel.indices);
      for (std::size_t q = 0; q < queue.size(); ++q) {
        const std::size_t idx = queue[q];
        try {
          const LabelResult r = query_oracle.label(corpus[idx], meter);
          pool.acquire(idx, r.label);
          rec.queried.push_back(idx);
          rec.acquired_labels.push_back(r.label);
        } catch (const LabelingFailed& e) {
          LabelFailure f{idx, e.what(), e.raw_responses(), replacement.substitute(idx)};
          if (f.substitute) queue.push_back(*f.substitute);
          rec.failures.push_back(std::move(f));
        } catch (const std::exception& e) {
          throw LoopAborted(std::string("oracle failure: ") + e.what(), std::move(result.records));
        }
      }
    }
    pool.check_conservation();

    if (on_record) on_record(rec);
    result.records.push_back(std::move(rec));
    if (exhausted) break;
  }
  result.final_pool = std::move(pool);
  return result;
}

}  // namespace alm
