#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alm/corpus.hpp"
#include "alm/models.hpp"
#include "alm/oracle.hpp"
#include "alm/strategies.hpp"
#include "alm/synthetic.hpp"

namespace alm {

enum class RunMode { rq1, rq2, rq3, rq4 };
enum class EmbeddingSource { hash, file, remote, synthetic };
enum class OracleKind { ground_truth, llm, mock };

const char* to_string(RunMode mode) noexcept;
const char* to_string(EmbeddingSource source) noexcept;
const char* to_string(OracleKind kind) noexcept;

struct DatasetConfig {
  std::optional<std::string> path;
  CorpusFormat format = CorpusFormat::jsonl;
  std::string text_field = "text";
  std::optional<std::string> label_field = std::string("label");
  std::vector<std::string> label_names;
  std::size_t min_words = 0;  // 0 = no length filter
  std::optional<std::size_t> balanced_per_class;
  std::optional<std::size_t> subsample;
  std::uint64_t sample_seed = 0;
  std::optional<SyntheticSpec> synthetic;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct EmbeddingConfig {
  EmbeddingSource source = EmbeddingSource::hash;
  std::optional<std::string> path;
  std::optional<std::string> endpoint;
  std::size_t dim = 768;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  int max_retries = 3;
  std::size_t concurrency = 1;

  friend bool operator==(const EmbeddingConfig&, const EmbeddingConfig&) = default;
};

struct OracleConfig {
  OracleKind kind = OracleKind::ground_truth;
  std::optional<std::string> endpoint;
  std::string model = "gpt-4o";
  int retry_limit = 3;
  long long backoff_ms = 500;
  long long min_interval_ms = 0;
  std::size_t max_in_flight = 4;
  long long timeout_s = 60;
  std::optional<std::string> script;
  std::optional<std::string> cache_path;
  std::optional<Prices> prices;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

struct PromptConfig {
  std::optional<std::string> preset;
  std::optional<PromptTemplate> slots;

  friend bool operator==(const PromptConfig&, const PromptConfig&) = default;
};

/// Everything one experiment run needs. Serialized as a JSON object; unknown
/// keys are rejected at every level.
struct RunConfig {
  std::string task = "task";
  RunMode mode = RunMode::rq1;
  DatasetConfig dataset;
  EmbeddingConfig embedding;
  std::vector<StrategyKind> strategies = {StrategyKind::entropy_diversity};
  std::size_t candidate_factor = 10;
  ClassifierSpec classifier;
  OracleConfig oracle;
  PromptConfig prompt;
  std::size_t seed_size = 50;
  std::size_t batch_size = 5;
  std::size_t iterations = 100;
  std::size_t folds = 5;
  std::uint64_t rng_seed = 0;
  std::optional<std::size_t> report_iteration;
  std::size_t rq4_repeats = 5;
  std::size_t parallel_folds = 1;
  bool timing = true;
  std::string output_dir = "out";

  static RunConfig from_json(const nlohmann::json& j);
  /// Parses a file; relative paths in it stay as written (see resolve()).
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;

  /// Cross-field checks, e.g. rq3 needs prices.
  void validate() const;

  /// The template used for LLM prompts: explicit slots, preset, or the task name as a preset.
  PromptTemplate prompt_template() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Relative paths are taken relative to `base` (the config file's directory).
std::filesystem::path resolve(const std::filesystem::path& base, const std::string& path);

}  // namespace alm
