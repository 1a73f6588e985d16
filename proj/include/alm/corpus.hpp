#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace alm {

/// One text item. `id` is the position in the owning corpus; `source_id`
/// is the id it had in the file it was loaded from.
struct Instance {
  std::size_t id = 0;
  std::string text;
  std::optional<int> gold_label;
  std::size_t source_id = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Immutable pool of instances. Instance order is the canonical index order
/// shared by embeddings, pools and folds.
class Corpus {
 public:
  Corpus(std::vector<Instance> instances, std::vector<std::string> label_names, std::string provenance = {});

  const std::vector<Instance>& instances() const noexcept { return instances_; }
  const Instance& operator[](std::size_t i) const { return instances_.at(i); }
  std::size_t size() const noexcept { return instances_.size(); }
  std::size_t class_count() const noexcept { return label_names_.size(); }
  const std::vector<std::string>& label_names() const noexcept { return label_names_; }
  const std::string& provenance() const noexcept { return provenance_; }

  std::vector<std::string> texts() const;
  /// Gold labels; throws if any instance is unlabeled.
  std::vector<int> gold_labels() const;
  std::vector<std::size_t> class_counts() const;

  /// Builds a new corpus from the given positions, reassigning ids 0..m-1.
  Corpus subset(const std::vector<std::size_t>& positions, std::string provenance) const;

 private:
  std::vector<Instance> instances_;
  std::vector<std::string> label_names_;
  std::string provenance_;
};

enum class CorpusFormat { csv, jsonl };

struct LoadOptions {
  CorpusFormat format = CorpusFormat::jsonl;
  std::string text_field = "text";
  std::optional<std::string> label_field = "label";  // nullopt: unlabeled
  std::vector<std::string> label_names;
};

/// Rows are numbered from 1, not counting the CSV header.
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options);

/// Keeps instances with strictly more than `min_words` whitespace tokens.
Corpus filter_short(const Corpus& corpus, std::size_t min_words);

/// `per_class` instances of every class, drawn without replacement.
/// Output keeps ascending original order.
Corpus balanced_sample(const Corpus& corpus, std::size_t per_class, std::uint64_t rng_seed);

Corpus random_subsample(const Corpus& corpus, std::size_t n, std::uint64_t rng_seed);

/// (bin_start, count) for each non-empty bin of whitespace-token lengths.
std::vector<std::pair<std::size_t, std::size_t>> length_histogram(const Corpus& corpus, std::size_t bin_width);

/// JSONL with fields id, text, label (name; omitted when absent) and source_id.
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// RFC-4180 parser. Returns rows of fields; handles quoted newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& content);

}  // namespace alm
