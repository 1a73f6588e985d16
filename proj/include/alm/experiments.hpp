#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alm/engine.hpp"
#include "alm/metrics.hpp"

namespace alm {

/// Shared inputs of every experiment runner.
struct ExperimentSetup {
  std::string task = "task";
  const Corpus* corpus = nullptr;
  const EmbeddingMatrix* embeddings = nullptr;
  LoopConfig loop;
  std::vector<StrategySpec> strategies = {StrategySpec{}};
  std::size_t folds = 5;
  /// Iteration whose metrics fill the summary tables; defaults to the last.
  std::optional<std::size_t> report_iteration;
  std::size_t parallel_folds = 1;
  std::size_t rq4_repeats = 5;
  /// The configured label source (LLM, mock, or ground truth).
  OraclePtr oracle;
  Prices prices;
  /// Optional output directory for learning curves and the run log.
  std::optional<std::filesystem::path> output_dir;
};

/// Per-iteration fold average of a learning curve.
struct CurvePoint {
  std::size_t iteration = 0;
  double labeled_count = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double recall = 0.0;
  double prompt_tokens = 0.0;
  double completion_tokens = 0.0;
  double cost_usd = 0.0;
  double wall_seconds = 0.0;
};

struct StrategyRun {
  StrategySpec strategy;
  std::string scenario;  // "llm", "hybrid", "ground_truth", or the oracle name for rq1
  std::vector<LoopResult> folds;
  std::vector<CurvePoint> average;
  std::vector<MetricReport> report_per_fold;
  MetricReport report_average;
  std::size_t report_iteration = 0;
};

struct Rq1Result {
  std::vector<StrategyRun> runs;
};

struct Rq2Strategy {
  StrategySpec strategy;
  StrategyRun full_llm, hybrid, full_ground_truth;
  /// Curves ordered (full_llm, hybrid, full_ground_truth); pairs
  /// (llm - ground_truth) and (llm - hybrid).
  CurveComparison comparison;
};

struct Rq2Result {
  std::vector<Rq2Strategy> strategies;
};

struct ArmResult {
  MetricReport metrics;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double cost_usd = 0.0;
  double oracle_seconds = 0.0;
  double compute_seconds = 0.0;
  double total_seconds = 0.0;
  std::size_t failures = 0;
};

struct Rq3Result {
  StrategySpec strategy;
  std::vector<ArmResult> direct_per_fold, loop_per_fold;
  ArmResult direct_average, loop_average;
  double cost_ratio = 0.0;  // loop cost / direct cost
  double time_ratio = 0.0;
  double accuracy_ratio = 0.0;
};

struct Rq4Result {
  std::size_t budget = 0;
  std::vector<double> baseline_per_fold;  // mean over repeats
  double baseline_average = 0.0;
  StrategyRun active;                     // first configured strategy
  double gain = 0.0;                      // active average accuracy - baseline average
};

/// Per-iteration mean over folds, truncated to the shortest fold curve.
std::vector<CurvePoint> average_curve(const std::vector<LoopResult>& folds);

/// Mean of each metric field.
MetricReport average_metrics(const std::vector<MetricReport>& reports);

Rq1Result run_rq1(const ExperimentSetup& setup);
Rq2Result run_rq2(const ExperimentSetup& setup);
Rq3Result run_rq3(const ExperimentSetup& setup);
Rq4Result run_rq4(const ExperimentSetup& setup);

/// Random-sampling baseline for one fold: `repeats` draws of `budget`
/// labeled instances, mean test accuracy of the default classifier.
double random_baseline(const ExperimentSetup& setup, const Fold& fold, std::size_t budget, std::size_t fold_index);

nlohmann::ordered_json to_json(const Rq1Result& r, const ExperimentSetup& setup);
nlohmann::ordered_json to_json(const Rq2Result& r, const ExperimentSetup& setup);
nlohmann::ordered_json to_json(const Rq3Result& r, const ExperimentSetup& setup);
nlohmann::ordered_json to_json(const Rq4Result& r, const ExperimentSetup& setup);

/// learning_curve.csv: iteration,labeled_count,accuracy,f1,recall,prompt_tokens,
/// completion_tokens,cost_usd,wall_seconds
void write_learning_curve(const std::filesystem::path& path, const std::vector<IterationRecord>& records);
void write_average_curve(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);

}  // namespace alm
