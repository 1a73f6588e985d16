#include "alm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace alm {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

/// Reads the keys of one JSON object and rejects the ones never asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, path(key));
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        out = convert<T>(*v, path(key));
      }
    }
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError("unknown config key '" + path(it.key()) + "'");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(where + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(where + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError(where + ": expected a number");
      return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ValidationError(where + ": expected a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ValidationError(where + ": expected an integer");
      return v.get<T>();
    } else {
      static_assert(std::is_same_v<T, std::vector<std::string>>);
      if (!v.is_array()) throw ValidationError(where + ": expected an array of strings");
      T out;
      for (const auto& e : v) out.push_back(convert<std::string>(e, where));
      return out;
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void get_enum(ObjectReader& r, const std::string& key, E& out, Parse parse) {
  std::optional<std::string> s;
  r.get(key, s);
  if (!s) return;
  try {
    out = parse(*s);
  } catch (const ValidationError& e) {
    throw ValidationError(r.path(key) + ": " + e.what());
  }
}

template <typename E, std::size_t N>
E parse_named(const std::string& s, const char* const (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<E>(i);
  }
  throw ValidationError(std::string("unknown ") + what + " '" + s + "'");
}

const char* const kModes[] = {"rq1", "rq2", "rq3", "rq4"};
const char* const kSources[] = {"hash", "file", "remote", "synthetic"};
const char* const kOracles[] = {"ground_truth", "llm", "mock"};

CorpusFormat parse_format(const std::string& s) {
  if (s == "csv") return CorpusFormat::csv;
  if (s == "jsonl") return CorpusFormat::jsonl;
  throw ValidationError("unknown format '" + s + "'");
}

SyntheticSpec parse_synthetic(const json& j, const std::string& where) {
  SyntheticSpec s;
  ObjectReader r(j, where);
  r.get("n", s.n);
  r.get("classes", s.classes);
  r.get("dim", s.dim);
  r.get("clusters_per_class", s.clusters_per_class);
  r.get("separation", s.separation);
  r.get("spread", s.spread);
  r.get("words", s.words);
  r.get("text_signal", s.text_signal);
  r.get("rng_seed", s.rng_seed);
  r.finish();
  return s;
}

ordered_json synthetic_json(const SyntheticSpec& s) {
  ordered_json j;
  j["n"] = s.n;
  j["classes"] = s.classes;
  j["dim"] = s.dim;
  j["clusters_per_class"] = s.clusters_per_class;
  j["separation"] = s.separation;
  j["spread"] = s.spread;
  j["words"] = s.words;
  j["text_signal"] = s.text_signal;
  j["rng_seed"] = s.rng_seed;
  return j;
}

DatasetConfig parse_dataset(const json& j) {
  DatasetConfig d;
  ObjectReader r(j, "dataset");
  r.get("path", d.path);
  get_enum(r, "format", d.format, parse_format);
  r.get("text_field", d.text_field);
  r.get("label_field", d.label_field);
  r.get("label_names", d.label_names);
  r.get("min_words", d.min_words);
  r.get("balanced_per_class", d.balanced_per_class);
  r.get("subsample", d.subsample);
  r.get("sample_seed", d.sample_seed);
  if (const json* s = r.find("synthetic"); s && !s->is_null()) d.synthetic = parse_synthetic(*s, "dataset.synthetic");
  r.finish();
  return d;
}

ordered_json dataset_json(const DatasetConfig& d) {
  ordered_json j;
  if (d.path) j["path"] = *d.path;
  j["format"] = d.format == CorpusFormat::csv ? "csv" : "jsonl";
  j["text_field"] = d.text_field;
  j["label_field"] = d.label_field ? ordered_json(*d.label_field) : ordered_json(nullptr);
  j["label_names"] = d.label_names;
  j["min_words"] = d.min_words;
  if (d.balanced_per_class) j["balanced_per_class"] = *d.balanced_per_class;
  if (d.subsample) j["subsample"] = *d.subsample;
  j["sample_seed"] = d.sample_seed;
  if (d.synthetic) j["synthetic"] = synthetic_json(*d.synthetic);
  return j;
}

EmbeddingConfig parse_embedding(const json& j) {
  EmbeddingConfig e;
  ObjectReader r(j, "embedding");
  get_enum(r, "source", e.source, [](const std::string& s) { return parse_named<EmbeddingSource>(s, kSources, "embedding source"); });
  r.get("path", e.path);
  r.get("endpoint", e.endpoint);
  r.get("dim", e.dim);
  r.get("seed", e.seed);
  r.get("batch_size", e.batch_size);
  r.get("max_retries", e.max_retries);
  r.get("concurrency", e.concurrency);
  r.finish();
  return e;
}

ordered_json embedding_json(const EmbeddingConfig& e) {
  ordered_json j;
  j["source"] = to_string(e.source);
  if (e.path) j["path"] = *e.path;
  if (e.endpoint) j["endpoint"] = *e.endpoint;
  j["dim"] = e.dim;
  j["seed"] = e.seed;
  j["batch_size"] = e.batch_size;
  j["max_retries"] = e.max_retries;
  j["concurrency"] = e.concurrency;
  return j;
}

ClassifierSpec parse_classifier(const json& j) {
  ClassifierSpec c;
  ObjectReader r(j, "classifier");
  get_enum(r, "kind", c.kind, parse_classifier_kind);
  if (const json* v = r.find("logistic")) {
    ObjectReader s(*v, "classifier.logistic");
    s.get("l2", c.logistic.l2);
    s.get("max_iter", c.logistic.max_iter);
    s.get("grad_tol", c.logistic.grad_tol);
    s.get("history", c.logistic.history);
    s.finish();
  }
  if (const json* v = r.find("svm")) {
    ObjectReader s(*v, "classifier.svm");
    s.get("c", c.svm.c);
    s.get("epochs", c.svm.epochs);
    s.finish();
  }
  if (const json* v = r.find("tree")) {
    ObjectReader s(*v, "classifier.tree");
    s.get("max_depth", c.tree.max_depth);
    s.get("min_samples_leaf", c.tree.min_samples_leaf);
    s.finish();
  }
  if (const json* v = r.find("forest")) {
    ObjectReader s(*v, "classifier.forest");
    s.get("trees", c.forest.trees);
    s.get("bootstrap", c.forest.bootstrap);
    s.finish();
  }
  std::optional<std::vector<std::string>> members;
  r.get("members", members);
  if (members) {
    c.members.clear();
    for (const auto& m : *members) c.members.push_back(parse_classifier_kind(m));
  }
  r.finish();
  return c;
}

ordered_json classifier_json(const ClassifierSpec& c) {
  ordered_json j;
  j["kind"] = to_string(c.kind);
  j["logistic"] = {{"l2", c.logistic.l2},
                   {"max_iter", c.logistic.max_iter},
                   {"grad_tol", c.logistic.grad_tol},
                   {"history", c.logistic.history}};
  j["svm"] = {{"c", c.svm.c}, {"epochs", c.svm.epochs}};
  j["tree"] = {{"max_depth", c.tree.max_depth}, {"min_samples_leaf", c.tree.min_samples_leaf}};
  j["forest"] = {{"trees", c.forest.trees}, {"bootstrap", c.forest.bootstrap}};
  auto& members = j["members"] = ordered_json::array();
  for (auto m : c.members) members.push_back(to_string(m));
  return j;
}

OracleConfig parse_oracle(const json& j) {
  OracleConfig o;
  ObjectReader r(j, "oracle");
  get_enum(r, "kind", o.kind, [](const std::string& s) { return parse_named<OracleKind>(s, kOracles, "oracle kind"); });
  r.get("endpoint", o.endpoint);
  r.get("model", o.model);
  r.get("retry_limit", o.retry_limit);
  r.get("backoff_ms", o.backoff_ms);
  r.get("min_interval_ms", o.min_interval_ms);
  r.get("max_in_flight", o.max_in_flight);
  r.get("timeout_s", o.timeout_s);
  r.get("script", o.script);
  r.get("cache_path", o.cache_path);
  if (const json* v = r.find("prices"); v && !v->is_null()) {
    Prices p;
    ObjectReader s(*v, "oracle.prices");
    const json* in = s.find("usd_per_1k_prompt_tokens");
    const json* out = s.find("usd_per_1k_completion_tokens");
    s.finish();
    if (!in || !out) throw ValidationError("missing price: oracle.prices needs usd_per_1k_prompt_tokens and usd_per_1k_completion_tokens");
    p.usd_per_1k_prompt_tokens = ObjectReader::convert<double>(*in, "oracle.prices.usd_per_1k_prompt_tokens");
    p.usd_per_1k_completion_tokens = ObjectReader::convert<double>(*out, "oracle.prices.usd_per_1k_completion_tokens");
    o.prices = p;
  }
  r.finish();
  return o;
}

ordered_json oracle_json(const OracleConfig& o) {
  ordered_json j;
  j["kind"] = to_string(o.kind);
  if (o.endpoint) j["endpoint"] = *o.endpoint;
  j["model"] = o.model;
  j["retry_limit"] = o.retry_limit;
  j["backoff_ms"] = o.backoff_ms;
  j["min_interval_ms"] = o.min_interval_ms;
  j["max_in_flight"] = o.max_in_flight;
  j["timeout_s"] = o.timeout_s;
  if (o.script) j["script"] = *o.script;
  if (o.cache_path) j["cache_path"] = *o.cache_path;
  if (o.prices) {
    j["prices"] = {{"usd_per_1k_prompt_tokens", o.prices->usd_per_1k_prompt_tokens},
                   {"usd_per_1k_completion_tokens", o.prices->usd_per_1k_completion_tokens}};
  }
  return j;
}

PromptConfig parse_prompt(const json& j) {
  PromptConfig p;
  ObjectReader r(j, "prompt");
  r.get("preset", p.preset);
  std::optional<std::string> a, b, c;
  r.get("expertise", a);
  r.get("task", b);
  r.get("instruction", c);
  r.finish();
  if (a || b || c) {
    if (!a || !b || !c) throw ValidationError("prompt: expertise, task and instruction must be given together");
    if (p.preset) throw ValidationError("prompt: give either a preset or explicit slots, not both");
    p.slots = PromptTemplate{*a, *b, *c};
  }
  return p;
}

ordered_json prompt_json(const PromptConfig& p) {
  ordered_json j = ordered_json::object();
  if (p.preset) j["preset"] = *p.preset;
  if (p.slots) {
    j["expertise"] = p.slots->expertise;
    j["task"] = p.slots->task;
    j["instruction"] = p.slots->instruction;
  }
  return j;
}

}  // namespace

const char* to_string(RunMode mode) noexcept { return kModes[static_cast<int>(mode)]; }
const char* to_string(EmbeddingSource source) noexcept { return kSources[static_cast<int>(source)]; }
const char* to_string(OracleKind kind) noexcept { return kOracles[static_cast<int>(kind)]; }

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  ObjectReader r(j, "");
  r.get("task", c.task);
  get_enum(r, "mode", c.mode, [](const std::string& s) { return parse_named<RunMode>(s, kModes, "mode"); });
  if (const json* v = r.find("dataset")) c.dataset = parse_dataset(*v);
  if (const json* v = r.find("embedding")) c.embedding = parse_embedding(*v);
  std::optional<std::vector<std::string>> strategies;
  r.get("strategies", strategies);
  if (strategies) {
    c.strategies.clear();
    for (const auto& s : *strategies) {
      try {
        c.strategies.push_back(parse_strategy_kind(s));
      } catch (const ValidationError& e) {
        throw ValidationError(std::string("strategies: ") + e.what());
      }
    }
  }
  r.get("candidate_factor", c.candidate_factor);
  if (const json* v = r.find("classifier")) c.classifier = parse_classifier(*v);
  if (const json* v = r.find("oracle")) c.oracle = parse_oracle(*v);
  if (const json* v = r.find("prompt")) c.prompt = parse_prompt(*v);
  r.get("seed_size", c.seed_size);
  r.get("batch_size", c.batch_size);
  r.get("iterations", c.iterations);
  r.get("folds", c.folds);
  r.get("rng_seed", c.rng_seed);
  r.get("report_iteration", c.report_iteration);
  r.get("rq4_repeats", c.rq4_repeats);
  r.get("parallel_folds", c.parallel_folds);
  if (const json* v = r.find("timing")) {
    const auto s = ObjectReader::convert<std::string>(*v, "timing");
    if (s != "wall" && s != "off") throw ValidationError("timing: expected \"wall\" or \"off\"");
    c.timing = s == "wall";
  }
  r.get("output_dir", c.output_dir);
  r.finish();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["task"] = task;
  j["mode"] = to_string(mode);
  j["dataset"] = dataset_json(dataset);
  j["embedding"] = embedding_json(embedding);
  auto& s = j["strategies"] = ordered_json::array();
  for (auto k : strategies) s.push_back(to_string(k));
  j["candidate_factor"] = candidate_factor;
  j["classifier"] = classifier_json(classifier);
  j["oracle"] = oracle_json(oracle);
  j["prompt"] = prompt_json(prompt);
  j["seed_size"] = seed_size;
  j["batch_size"] = batch_size;
  j["iterations"] = iterations;
  j["folds"] = folds;
  j["rng_seed"] = rng_seed;
  if (report_iteration) j["report_iteration"] = *report_iteration;
  j["rq4_repeats"] = rq4_repeats;
  j["parallel_folds"] = parallel_folds;
  j["timing"] = timing ? "wall" : "off";
  j["output_dir"] = output_dir;
  return j;
}

void RunConfig::validate() const {
  if (dataset.path.has_value() == dataset.synthetic.has_value()) {
    throw ValidationError("dataset: give exactly one of path or synthetic");
  }
  if (dataset.synthetic) dataset.synthetic->validate();
  if (dataset.path && dataset.label_names.size() < 2) throw ValidationError("dataset.label_names needs >= 2 names");
  switch (embedding.source) {
    case EmbeddingSource::synthetic:
      if (!dataset.synthetic) throw ValidationError("embedding source synthetic needs a synthetic dataset");
      break;
    case EmbeddingSource::file:
      if (!embedding.path) throw ValidationError("embedding source file needs embedding.path");
      break;
    case EmbeddingSource::remote:
      if (!embedding.endpoint) throw ValidationError("embedding source remote needs embedding.endpoint");
      break;
    case EmbeddingSource::hash:
      if (embedding.dim < 1) throw ValidationError("embedding.dim must be >= 1");
      break;
  }
  if (strategies.empty()) throw ValidationError("strategies must not be empty");
  if (candidate_factor < 1) throw ValidationError("candidate_factor must be >= 1");
  classifier.validate();
  if (oracle.kind == OracleKind::llm && !oracle.endpoint) throw ValidationError("oracle kind llm needs oracle.endpoint");
  if (oracle.kind == OracleKind::mock && !oracle.script) throw ValidationError("oracle kind mock needs oracle.script");
  if (oracle.retry_limit < 0) throw ValidationError("oracle.retry_limit must be >= 0");
  if (oracle.max_in_flight < 1) throw ValidationError("oracle.max_in_flight must be >= 1");
  if (oracle.backoff_ms < 0 || oracle.min_interval_ms < 0 || oracle.timeout_s < 1) {
    throw ValidationError("oracle timing values must be non-negative (timeout_s >= 1)");
  }
  if (oracle.prices && (oracle.prices->usd_per_1k_prompt_tokens < 0 || oracle.prices->usd_per_1k_completion_tokens < 0)) {
    throw ValidationError("oracle.prices must be >= 0");
  }
  if (mode == RunMode::rq3 && !oracle.prices) throw ValidationError("missing price: mode rq3 needs oracle.prices");
  if (oracle.kind != OracleKind::ground_truth) (void)prompt_template();
  if (seed_size < 1 || batch_size < 1 || iterations < 1) {
    throw ValidationError("seed_size, batch_size and iterations must be >= 1");
  }
  if (folds < 2) throw ValidationError("folds must be >= 2");
  if (report_iteration && *report_iteration > iterations) throw ValidationError("report_iteration exceeds iterations");
  if (rq4_repeats < 1) throw ValidationError("rq4_repeats must be >= 1");
  if (parallel_folds < 1) throw ValidationError("parallel_folds must be >= 1");
  if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
}

PromptTemplate RunConfig::prompt_template() const {
  if (prompt.slots) return *prompt.slots;
  const std::string name = prompt.preset.value_or(task);
  try {
    return preset_template(name);
  } catch (const ValidationError&) {
    throw ValidationError("prompt: no slots given and '" + name + "' is not a preset (imdb, agnews, jigsaw)");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& path) {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : base / p;
}

}  // namespace alm
