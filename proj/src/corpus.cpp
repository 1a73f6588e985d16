#include "alm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "alm/error.hpp"
#include "alm/rng.hpp"
#include "alm/text.hpp"

namespace alm {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int map_label(const std::string& value, const std::vector<std::string>& names, std::size_t row) {
  const auto it = std::find(names.begin(), names.end(), value);
  if (it == names.end()) {
    throw ValidationError("row " + std::to_string(row) + ": unknown label '" + value + "'");
  }
  return static_cast<int>(it - names.begin());
}

}  // namespace

Corpus::Corpus(std::vector<Instance> instances, std::vector<std::string> label_names, std::string provenance)
    : instances_(std::move(instances)), label_names_(std::move(label_names)), provenance_(std::move(provenance)) {
  if (label_names_.size() < 2) throw ValidationError("a corpus needs at least 2 classes");
  const int c = static_cast<int>(label_names_.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const Instance& inst = instances_[i];
    if (inst.id != i) throw ValidationError("instance ids must be 0..n-1 in order");
    if (text::trim(inst.text).empty()) throw ValidationError("instance " + std::to_string(i) + " has empty text");
    if (inst.gold_label && (*inst.gold_label < 0 || *inst.gold_label >= c)) {
      throw ValidationError("instance " + std::to_string(i) + " has label outside [0, C)");
    }
  }
}

std::vector<std::string> Corpus::texts() const {
  std::vector<std::string> out;
  out.reserve(instances_.size());
  for (const auto& inst : instances_) out.push_back(inst.text);
  return out;
}

std::vector<int> Corpus::gold_labels() const {
  std::vector<int> out;
  out.reserve(instances_.size());
  for (const auto& inst : instances_) {
    if (!inst.gold_label) throw ValidationError("instance " + std::to_string(inst.id) + " has no gold label");
    out.push_back(*inst.gold_label);
  }
  return out;
}

std::vector<std::size_t> Corpus::class_counts() const {
  std::vector<std::size_t> counts(class_count(), 0);
  for (const auto& inst : instances_) {
    if (inst.gold_label) ++counts[static_cast<std::size_t>(*inst.gold_label)];
  }
  return counts;
}

Corpus Corpus::subset(const std::vector<std::size_t>& positions, std::string provenance) const {
  std::vector<Instance> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) {
    Instance inst = instances_.at(p);
    inst.id = out.size();
    out.push_back(std::move(inst));
  }
  return Corpus(std::move(out), label_names_, std::move(provenance));
}

std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char ch = content[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
      // CRLF handled at the '\n'.
    } else if (ch == '\n') {
      end_row();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw ValidationError("unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
  const std::string content = read_file(path);
  std::vector<Instance> instances;
  auto add = [&](std::string text, std::optional<int> label, std::size_t row) {
    if (text::trim(text).empty()) throw ValidationError("row " + std::to_string(row) + ": empty text");
    Instance inst;
    inst.id = instances.size();
    inst.source_id = instances.size();
    inst.text = std::move(text);
    inst.gold_label = label;
    instances.push_back(std::move(inst));
  };

  if (options.format == CorpusFormat::csv) {
    auto rows = parse_csv(content);
    if (rows.empty()) throw ValidationError("csv has no header row");
    const auto& header = rows.front();
    auto column = [&](const std::string& name) -> std::size_t {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw ValidationError("csv header lacks column '" + name + "'");
      return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t text_col = column(options.text_field);
    const std::optional<std::size_t> label_col =
        options.label_field ? std::optional<std::size_t>(column(*options.label_field)) : std::nullopt;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& fields = rows[r];
      if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
      if (fields.size() != header.size()) {
        throw ValidationError("row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(fields.size()));
      }
      std::optional<int> label;
      if (label_col) label = map_label(fields[*label_col], options.label_names, r);
      add(fields[text_col], label, r);
    }
  } else {
    std::istringstream in(content);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (text::trim(line).empty()) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("row " + std::to_string(row) + ": malformed JSON (" + e.what() + ")");
      }
      if (!obj.is_object() || !obj.contains(options.text_field) || !obj[options.text_field].is_string()) {
        throw ValidationError("row " + std::to_string(row) + ": missing text field '" + options.text_field + "'");
      }
      std::optional<int> label;
      if (options.label_field) {
        if (!obj.contains(*options.label_field)) {
          throw ValidationError("row " + std::to_string(row) + ": missing label field '" + *options.label_field + "'");
        }
        const auto& v = obj[*options.label_field];
        if (v.is_string()) {
          label = map_label(v.get<std::string>(), options.label_names, row);
        } else if (v.is_number_integer()) {
          const auto k = v.get<long long>();
          if (k < 0 || k >= static_cast<long long>(options.label_names.size())) {
            throw ValidationError("row " + std::to_string(row) + ": unknown label '" + v.dump() + "'");
          }
          label = static_cast<int>(k);
        } else {
          throw ValidationError("row " + std::to_string(row) + ": unknown label '" + v.dump() + "'");
        }
      }
      add(obj[options.text_field].get<std::string>(), label, row);
    }
  }
  return Corpus(std::move(instances), options.label_names, "loaded from " + path.filename().string());
}

Corpus filter_short(const Corpus& corpus, std::size_t min_words) {
  if (min_words == 0) throw ValidationError("min_words must be >= 1");
  std::vector<std::size_t> keep;
  for (const auto& inst : corpus.instances()) {
    if (text::word_count(inst.text) > min_words) keep.push_back(inst.id);
  }
  if (keep.empty()) throw ValidationError("filter_short removed every instance");
  return corpus.subset(keep, corpus.provenance() + "; filter_short(" + std::to_string(min_words) + ")");
}

Corpus balanced_sample(const Corpus& corpus, std::size_t per_class, std::uint64_t rng_seed) {
  if (per_class == 0) throw ValidationError("per_class must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(corpus.class_count());
  for (const auto& inst : corpus.instances()) {
    if (inst.gold_label) by_class[static_cast<std::size_t>(*inst.gold_label)].push_back(inst.id);
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& members = by_class[c];
    if (members.size() < per_class) {
      throw ValidationError("class '" + corpus.label_names()[c] + "' has only " + std::to_string(members.size()) +
                            " instances, " + std::to_string(per_class) + " requested");
    }
    CounterRng rng(rng_seed, c);
    for (std::size_t k : sample_without_replacement(members.size(), per_class, rng)) keep.push_back(members[k]);
  }
  std::sort(keep.begin(), keep.end());
  return corpus.subset(keep, corpus.provenance() + "; balanced_sample(" + std::to_string(per_class) + ", seed " +
                                 std::to_string(rng_seed) + ")");
}

Corpus random_subsample(const Corpus& corpus, std::size_t n, std::uint64_t rng_seed) {
  if (n == 0) throw ValidationError("subsample size must be >= 1");
  if (n > corpus.size()) {
    throw ValidationError("cannot subsample " + std::to_string(n) + " from " + std::to_string(corpus.size()));
  }
  CounterRng rng(rng_seed);
  auto keep = sample_without_replacement(corpus.size(), n, rng);
  std::sort(keep.begin(), keep.end());
  return corpus.subset(keep, corpus.provenance() + "; random_subsample(" + std::to_string(n) + ", seed " +
                                 std::to_string(rng_seed) + ")");
}

std::vector<std::pair<std::size_t, std::size_t>> length_histogram(const Corpus& corpus, std::size_t bin_width) {
  if (bin_width == 0) throw ValidationError("bin_width must be >= 1");
  std::map<std::size_t, std::size_t> bins;
  for (const auto& inst : corpus.instances()) {
    const std::size_t len = text::word_count(inst.text);
    ++bins[(len / bin_width) * bin_width];
  }
  return {bins.begin(), bins.end()};
}

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& inst : corpus.instances()) {
    nlohmann::ordered_json row;
    row["id"] = inst.id;
    row["text"] = inst.text;
    if (inst.gold_label) row["label"] = corpus.label_names()[static_cast<std::size_t>(*inst.gold_label)];
    row["source_id"] = inst.source_id;
    out << row.dump() << '\n';
  }
}

}  // namespace alm
