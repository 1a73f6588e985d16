#include "alm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "alm/rng.hpp"

namespace alm {
namespace {

constexpr std::uint64_t kBaselineStream = 0x52510004;

using Clock = std::chrono::steady_clock;

/// Runs fn(0..n-1), up to `parallel` at a time. The first exception by fold
/// index is rethrown after all workers finish.
template <typename F>
void for_each_fold(std::size_t n, std::size_t parallel, F&& fn) {
  if (parallel <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < std::min(parallel, n); ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Append-only JSONL log shared by concurrent folds; each line is flushed.
class RunLog {
 public:
  explicit RunLog(const std::optional<std::filesystem::path>& dir) {
    if (!dir) return;
    std::filesystem::create_directories(*dir);
    out_.open(*dir / "run_log.jsonl", std::ios::app);
  }
  void write(const nlohmann::ordered_json& line) {
    if (!out_.is_open()) return;
    std::lock_guard lock(mutex_);
    out_ << line.dump() << '\n';
    out_.flush();
  }

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

nlohmann::ordered_json metrics_json(const MetricReport& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["recall"] = m.recall;
  if (m.zero_division) j["zero_division"] = true;
  return j;
}

nlohmann::ordered_json record_json(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["labeled_count"] = r.labeled_count;
  j["metrics"] = metrics_json(r.metrics);
  j["queried"] = r.queried;
  j["acquired_labels"] = r.acquired_labels;
  if (!r.failures.empty()) {
    auto& fails = j["failures"] = nlohmann::ordered_json::array();
    for (const auto& f : r.failures) {
      nlohmann::ordered_json fj;
      fj["index"] = f.index;
      fj["error"] = f.error;
      fj["raw_responses"] = f.raw_responses;
      fj["substitute"] = f.substitute ? nlohmann::ordered_json(*f.substitute) : nlohmann::ordered_json(nullptr);
      fails.push_back(std::move(fj));
    }
  }
  j["usage"] = {{"prompt_tokens", r.usage.prompt_tokens},
                {"completion_tokens", r.usage.completion_tokens},
                {"requests", r.usage.requests},
                {"cost_usd", r.usage.cost_usd},
                {"oracle_seconds", r.usage.oracle_seconds}};
  j["compute_seconds"] = r.compute_seconds;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

std::filesystem::path curve_dir(const ExperimentSetup& setup, const StrategySpec& strategy, const std::string& scenario) {
  return *setup.output_dir / "curves" / setup.task / to_string(strategy.kind) / scenario;
}

std::size_t report_point(const ExperimentSetup& setup) {
  return std::min(setup.report_iteration.value_or(setup.loop.iterations), setup.loop.iterations);
}

const IterationRecord& record_at(const LoopResult& r, std::size_t iteration) {
  return r.records.at(std::min(iteration, r.records.size() - 1));
}

StrategyRun run_strategy(const ExperimentSetup& setup, const std::vector<Fold>& folds, const StrategySpec& strategy,
                         const std::string& scenario, Oracle& seed_oracle, Oracle& query_oracle, RunLog& log) {
  StrategyRun run;
  run.strategy = strategy;
  run.scenario = scenario;
  run.folds.resize(folds.size());
  for_each_fold(folds.size(), setup.parallel_folds, [&](std::size_t f) {
    LoopConfig cfg = setup.loop;
    cfg.strategy = strategy;
    cfg.rng_seed = derive_seed(setup.loop.rng_seed, f);
    UsageMeter meter(setup.prices);
    auto on_record = [&](const IterationRecord& rec) {
      nlohmann::ordered_json line;
      line["task"] = setup.task;
      line["strategy"] = to_string(strategy.kind);
      line["scenario"] = scenario;
      line["fold"] = f + 1;
      const nlohmann::ordered_json body = record_json(rec);
      for (auto it = body.begin(); it != body.end(); ++it) line[it.key()] = it.value();
      log.write(line);
    };
    run.folds[f] = run_loop(*setup.corpus, *setup.embeddings, cfg, folds[f].train, folds[f].test, seed_oracle,
                            query_oracle, meter, on_record);
  });
  run.average = average_curve(run.folds);
  run.report_iteration = report_point(setup);
  for (const auto& fr : run.folds) run.report_per_fold.push_back(record_at(fr, run.report_iteration).metrics);
  run.report_average = average_metrics(run.report_per_fold);

  if (setup.output_dir) {
    const auto dir = curve_dir(setup, strategy, scenario);
    for (std::size_t f = 0; f < run.folds.size(); ++f) {
      write_learning_curve(dir / ("fold" + std::to_string(f + 1)) / "learning_curve.csv", run.folds[f].records);
    }
    write_average_curve(dir / "average" / "learning_curve.csv", run.average);
  }
  return run;
}

std::vector<Fold> make_folds(const ExperimentSetup& setup) {
  if (setup.corpus == nullptr || setup.embeddings == nullptr || !setup.oracle) {
    throw ValidationError("experiment setup needs a corpus, embeddings and an oracle");
  }
  if (setup.strategies.empty()) throw ValidationError("at least one strategy is required");
  setup.loop.validate();
  return kfold(setup.corpus->size(), setup.folds, setup.loop.rng_seed);
}

nlohmann::ordered_json run_json(const StrategyRun& run) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(run.strategy.kind);
  j["scenario"] = run.scenario;
  j["report_iteration"] = run.report_iteration;
  auto& folds = j["folds"] = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < run.folds.size(); ++f) {
    nlohmann::ordered_json fj = metrics_json(run.report_per_fold[f]);
    fj["fold"] = f + 1;
    const IterationRecord& rec = record_at(run.folds[f], run.report_iteration);
    fj["labeled_count"] = rec.labeled_count;
    fj["prompt_tokens"] = rec.usage.prompt_tokens;
    fj["completion_tokens"] = rec.usage.completion_tokens;
    fj["cost_usd"] = rec.usage.cost_usd;
    fj["seed_indices"] = run.folds[f].seed_indices;
    folds.push_back(std::move(fj));
  }
  j["average"] = metrics_json(run.report_average);
  auto& curve = j["average_accuracy_curve"] = nlohmann::ordered_json::array();
  for (const auto& p : run.average) curve.push_back(p.accuracy);
  return j;
}

nlohmann::ordered_json arm_json(const ArmResult& a) {
  nlohmann::ordered_json j = metrics_json(a.metrics);
  j["prompt_tokens"] = a.prompt_tokens;
  j["completion_tokens"] = a.completion_tokens;
  j["cost_usd"] = a.cost_usd;
  j["oracle_seconds"] = a.oracle_seconds;
  j["compute_seconds"] = a.compute_seconds;
  j["time_min"] = a.total_seconds / 60.0;
  if (a.failures > 0) j["labeling_failures"] = a.failures;
  return j;
}

nlohmann::ordered_json header_json(const ExperimentSetup& setup, const char* mode) {
  nlohmann::ordered_json j;
  j["task"] = setup.task;
  j["mode"] = mode;
  j["instances"] = setup.corpus->size();
  j["classes"] = setup.corpus->class_count();
  j["folds"] = setup.folds;
  j["seed_size"] = setup.loop.seed_size;
  j["batch_size"] = setup.loop.batch_size;
  j["iterations"] = setup.loop.iterations;
  j["rng_seed"] = setup.loop.rng_seed;
  return j;
}

ArmResult average_arms(const std::vector<ArmResult>& arms) {
  ArmResult a;
  std::vector<MetricReport> ms;
  double pt = 0, ct = 0;
  for (const auto& x : arms) {
    ms.push_back(x.metrics);
    pt += static_cast<double>(x.prompt_tokens);
    ct += static_cast<double>(x.completion_tokens);
    a.cost_usd += x.cost_usd;
    a.oracle_seconds += x.oracle_seconds;
    a.compute_seconds += x.compute_seconds;
    a.total_seconds += x.total_seconds;
    a.failures += x.failures;
  }
  const double n = static_cast<double>(arms.size());
  a.metrics = average_metrics(ms);
  a.prompt_tokens = static_cast<long long>(pt / n + 0.5);
  a.completion_tokens = static_cast<long long>(ct / n + 0.5);
  a.cost_usd /= n;
  a.oracle_seconds /= n;
  a.compute_seconds /= n;
  a.total_seconds /= n;
  return a;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

std::vector<CurvePoint> average_curve(const std::vector<LoopResult>& folds) {
  std::vector<CurvePoint> out;
  if (folds.empty()) return out;
  std::size_t len = folds.front().records.size();
  for (const auto& f : folds) len = std::min(len, f.records.size());
  const double n = static_cast<double>(folds.size());
  for (std::size_t t = 0; t < len; ++t) {
    CurvePoint p;
    p.iteration = t;
    for (const auto& f : folds) {
      const auto& r = f.records[t];
      p.labeled_count += static_cast<double>(r.labeled_count);
      p.accuracy += r.metrics.accuracy;
      p.f1 += r.metrics.f1;
      p.recall += r.metrics.recall;
      p.prompt_tokens += static_cast<double>(r.usage.prompt_tokens);
      p.completion_tokens += static_cast<double>(r.usage.completion_tokens);
      p.cost_usd += r.usage.cost_usd;
      p.wall_seconds += r.wall_seconds;
    }
    p.labeled_count /= n;
    p.accuracy /= n;
    p.f1 /= n;
    p.recall /= n;
    p.prompt_tokens /= n;
    p.completion_tokens /= n;
    p.cost_usd /= n;
    p.wall_seconds /= n;
    out.push_back(p);
  }
  return out;
}

MetricReport average_metrics(const std::vector<MetricReport>& reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.accuracy += r.accuracy;
    m.f1 += r.f1;
    m.recall += r.recall;
    m.zero_division = m.zero_division || r.zero_division;
  }
  const double n = static_cast<double>(reports.size());
  m.accuracy /= n;
  m.f1 /= n;
  m.recall /= n;
  return m;
}

Rq1Result run_rq1(const ExperimentSetup& setup) {
  const auto folds = make_folds(setup);
  RunLog log(setup.output_dir);
  Rq1Result out;
  for (const auto& s : setup.strategies) {
    out.runs.push_back(run_strategy(setup, folds, s, "configured", *setup.oracle, *setup.oracle, log));
  }
  return out;
}

Rq2Result run_rq2(const ExperimentSetup& setup) {
  const auto folds = make_folds(setup);
  RunLog log(setup.output_dir);
  GroundTruthOracle ground_truth(setup.corpus->class_count());
  Rq2Result out;
  for (const auto& s : setup.strategies) {
    Rq2Strategy r;
    r.strategy = s;
    r.full_llm = run_strategy(setup, folds, s, "llm", *setup.oracle, *setup.oracle, log);
    r.hybrid = run_strategy(setup, folds, s, "hybrid", ground_truth, *setup.oracle, log);
    r.full_ground_truth = run_strategy(setup, folds, s, "ground_truth", ground_truth, ground_truth, log);
    auto accuracies = [](const StrategyRun& run) {
      std::vector<double> v;
      for (const auto& p : run.average) v.push_back(p.accuracy);
      return v;
    };
    r.comparison = compare_curves({accuracies(r.full_llm), accuracies(r.hybrid), accuracies(r.full_ground_truth)},
                                  {{0, 2}, {0, 1}});
    out.strategies.push_back(std::move(r));
  }
  return out;
}

Rq3Result run_rq3(const ExperimentSetup& setup) {
  const auto folds = make_folds(setup);
  RunLog log(setup.output_dir);
  Rq3Result out;
  out.strategy = setup.strategies.front();
  const StrategyRun loop = run_strategy(setup, folds, out.strategy, "llm", *setup.oracle, *setup.oracle, log);
  const std::size_t c = setup.corpus->class_count();

  out.direct_per_fold.resize(folds.size());
  for_each_fold(folds.size(), setup.parallel_folds, [&](std::size_t f) {
    UsageMeter meter(setup.prices);
    ArmResult arm;
    std::vector<int> gold, pred;
    const auto start = Clock::now();
    for (std::size_t idx : folds[f].test) {
      const Instance& inst = (*setup.corpus)[idx];
      if (!inst.gold_label) throw ValidationError("direct arm needs gold labels on the test set");
      gold.push_back(*inst.gold_label);
      try {
        pred.push_back(setup.oracle->label(inst, meter).label);
      } catch (const LabelingFailed&) {
        // An unanswered query is scored as a wrong prediction.
        pred.push_back((*inst.gold_label + 1) % static_cast<int>(c));
        ++arm.failures;
      }
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    const UsageTotals t = meter.totals();
    arm.metrics = metrics(gold, pred, c);
    arm.prompt_tokens = t.prompt_tokens;
    arm.completion_tokens = t.completion_tokens;
    arm.cost_usd = t.cost_usd;
    if (setup.loop.timing) {
      arm.oracle_seconds = t.oracle_seconds;
      arm.total_seconds = elapsed;
    }
    out.direct_per_fold[f] = arm;
  });

  for (std::size_t f = 0; f < folds.size(); ++f) {
    const IterationRecord& rec = record_at(loop.folds[f], loop.report_iteration);
    ArmResult arm;
    arm.metrics = rec.metrics;
    arm.prompt_tokens = rec.usage.prompt_tokens;
    arm.completion_tokens = rec.usage.completion_tokens;
    arm.cost_usd = rec.usage.cost_usd;
    arm.oracle_seconds = rec.usage.oracle_seconds;
    arm.compute_seconds = rec.compute_seconds;
    arm.total_seconds = rec.usage.oracle_seconds + rec.compute_seconds;
    for (const auto& r : loop.folds[f].records) {
      if (r.iteration < loop.report_iteration) arm.failures += r.failures.size();
    }
    out.loop_per_fold.push_back(arm);
  }
  out.direct_average = average_arms(out.direct_per_fold);
  out.loop_average = average_arms(out.loop_per_fold);
  out.cost_ratio = safe_ratio(out.loop_average.cost_usd, out.direct_average.cost_usd);
  out.time_ratio = safe_ratio(out.loop_average.total_seconds, out.direct_average.total_seconds);
  out.accuracy_ratio = safe_ratio(out.loop_average.metrics.accuracy, out.direct_average.metrics.accuracy);
  return out;
}

double random_baseline(const ExperimentSetup& setup, const Fold& fold, std::size_t budget, std::size_t fold_index) {
  const Corpus& corpus = *setup.corpus;
  const Matrix x_test = setup.embeddings->gather(fold.test);
  std::vector<int> y_test;
  for (std::size_t i : fold.test) y_test.push_back(*corpus[i].gold_label);
  ClassifierSpec spec = setup.loop.classifier;
  spec.rng_seed = derive_seed(setup.loop.rng_seed, 3);
  double total = 0.0;
  for (std::size_t r = 0; r < setup.rq4_repeats; ++r) {
    CounterRng rng(derive_seed(derive_seed(setup.loop.rng_seed, kBaselineStream), fold_index), r);
    std::vector<std::size_t> order(fold.train);
    shuffle(order, rng);
    UsageMeter meter(setup.prices);
    std::vector<std::size_t> chosen;
    std::vector<int> labels;
    for (std::size_t i = 0; i < order.size() && chosen.size() < budget; ++i) {
      try {
        labels.push_back(setup.oracle->label(corpus[order[i]], meter).label);
        chosen.push_back(order[i]);
      } catch (const LabelingFailed&) {
      }
    }
    if (chosen.empty()) throw Error("random baseline: no instance could be labeled");
    const ClassifierPtr model = train(spec, setup.embeddings->gather(chosen), labels, corpus.class_count());
    total += metrics(y_test, model->predict(x_test), corpus.class_count()).accuracy;
  }
  return total / static_cast<double>(setup.rq4_repeats);
}

Rq4Result run_rq4(const ExperimentSetup& setup) {
  if (setup.rq4_repeats < 1) throw ValidationError("rq4_repeats must be >= 1");
  const auto folds = make_folds(setup);
  RunLog log(setup.output_dir);
  Rq4Result out;
  const std::size_t r = report_point(setup);
  out.budget = setup.loop.seed_size + r * setup.loop.batch_size;
  out.active = run_strategy(setup, folds, setup.strategies.front(), "configured", *setup.oracle, *setup.oracle, log);
  out.baseline_per_fold.resize(folds.size());
  for_each_fold(folds.size(), setup.parallel_folds,
                [&](std::size_t f) { out.baseline_per_fold[f] = random_baseline(setup, folds[f], out.budget, f); });
  out.baseline_average = std::accumulate(out.baseline_per_fold.begin(), out.baseline_per_fold.end(), 0.0) /
                         static_cast<double>(out.baseline_per_fold.size());
  out.gain = out.active.report_average.accuracy - out.baseline_average;
  return out;
}

nlohmann::ordered_json to_json(const Rq1Result& r, const ExperimentSetup& setup) {
  auto j = header_json(setup, "rq1");
  auto& runs = j["strategies"] = nlohmann::ordered_json::array();
  for (const auto& run : r.runs) runs.push_back(run_json(run));
  return j;
}

nlohmann::ordered_json to_json(const Rq2Result& r, const ExperimentSetup& setup) {
  auto j = header_json(setup, "rq2");
  auto& list = j["strategies"] = nlohmann::ordered_json::array();
  for (const auto& s : r.strategies) {
    nlohmann::ordered_json sj;
    sj["strategy"] = to_string(s.strategy.kind);
    sj["scenarios"] = {run_json(s.full_llm), run_json(s.hybrid), run_json(s.full_ground_truth)};
    sj["stddev_per_iteration"] = s.comparison.stddev;
    sj["average_stddev"] = s.comparison.mean_stddev;
    sj["llm_minus_ground_truth"] = s.comparison.differences.at(0);
    sj["average_llm_minus_ground_truth"] = s.comparison.mean_differences.at(0);
    sj["llm_minus_hybrid"] = s.comparison.differences.at(1);
    sj["average_llm_minus_hybrid"] = s.comparison.mean_differences.at(1);
    list.push_back(std::move(sj));
  }
  return j;
}

nlohmann::ordered_json to_json(const Rq3Result& r, const ExperimentSetup& setup) {
  auto j = header_json(setup, "rq3");
  j["strategy"] = to_string(r.strategy.kind);
  j["report_iteration"] = report_point(setup);
  j["prices"] = {{"usd_per_1k_prompt_tokens", setup.prices.usd_per_1k_prompt_tokens},
                 {"usd_per_1k_completion_tokens", setup.prices.usd_per_1k_completion_tokens}};
  auto& folds = j["folds"] = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < r.direct_per_fold.size(); ++f) {
    folds.push_back({{"fold", f + 1}, {"direct", arm_json(r.direct_per_fold[f])}, {"loop", arm_json(r.loop_per_fold[f])}});
  }
  j["direct"] = arm_json(r.direct_average);
  j["loop"] = arm_json(r.loop_average);
  j["cost_ratio"] = r.cost_ratio;
  j["time_ratio"] = r.time_ratio;
  j["accuracy_ratio"] = r.accuracy_ratio;
  return j;
}

nlohmann::ordered_json to_json(const Rq4Result& r, const ExperimentSetup& setup) {
  auto j = header_json(setup, "rq4");
  j["budget"] = r.budget;
  j["repeats"] = setup.rq4_repeats;
  j["random_per_fold"] = r.baseline_per_fold;
  j["random_average"] = r.baseline_average;
  j["active"] = run_json(r.active);
  j["gain"] = r.gain;
  return j;
}

void write_learning_curve(const std::filesystem::path& path, const std::vector<IterationRecord>& records) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "iteration,labeled_count,accuracy,f1,recall,prompt_tokens,completion_tokens,cost_usd,wall_seconds\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f,%lld,%lld,%.8f,%.3f\n", r.iteration, r.labeled_count,
                  r.metrics.accuracy, r.metrics.f1, r.metrics.recall, r.usage.prompt_tokens, r.usage.completion_tokens,
                  r.usage.cost_usd, r.wall_seconds);
    out << buf;
  }
}

void write_average_curve(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "iteration,labeled_count,accuracy,f1,recall,prompt_tokens,completion_tokens,cost_usd,wall_seconds\n";
  char buf[256];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.1f,%.6f,%.6f,%.6f,%.1f,%.1f,%.8f,%.3f\n", p.iteration, p.labeled_count,
                  p.accuracy, p.f1, p.recall, p.prompt_tokens, p.completion_tokens, p.cost_usd, p.wall_seconds);
    out << buf;
  }
}

}  // namespace alm
