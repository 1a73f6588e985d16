#include "alm/runner.hpp"

#include <fstream>

#include "alm/experiments.hpp"
#include "alm/synthetic.hpp"

namespace alm {
namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

}  // namespace

LoadedData load_data(const RunConfig& config, const std::filesystem::path& base) {
  const DatasetConfig& d = config.dataset;
  if (d.synthetic) {
    SyntheticData data = make_blobs(*d.synthetic);
    if (config.embedding.source == EmbeddingSource::synthetic) {
      return {std::move(data.corpus), std::move(data.embeddings)};
    }
    Corpus corpus = std::move(data.corpus);
    if (config.embedding.source != EmbeddingSource::hash) {
      throw ValidationError("a synthetic dataset supports the synthetic or hash embedding sources");
    }
    EmbeddingMatrix x = hash_embed(corpus.texts(), config.embedding.dim, config.embedding.seed);
    return {std::move(corpus), std::move(x)};
  }

  LoadOptions opts;
  opts.format = d.format;
  opts.text_field = d.text_field;
  opts.label_field = d.label_field;
  opts.label_names = d.label_names;
  Corpus corpus = load_corpus(resolve(base, *d.path), opts);
  if (d.min_words > 0) corpus = filter_short(corpus, d.min_words);
  if (d.balanced_per_class) corpus = balanced_sample(corpus, *d.balanced_per_class, d.sample_seed);
  if (d.subsample) corpus = random_subsample(corpus, *d.subsample, d.sample_seed);

  EmbeddingMatrix x;
  const auto texts = corpus.texts();
  switch (config.embedding.source) {
    case EmbeddingSource::hash: x = hash_embed(texts, config.embedding.dim, config.embedding.seed); break;
    case EmbeddingSource::file: x = load_embedding_file(resolve(base, *config.embedding.path), corpus.size()); break;
    case EmbeddingSource::remote: {
      RemoteEmbeddingOptions ro;
      ro.endpoint = *config.embedding.endpoint;
      ro.batch_size = config.embedding.batch_size;
      ro.max_retries = config.embedding.max_retries;
      ro.concurrency = config.embedding.concurrency;
      x = fetch_remote(texts, ro);
      break;
    }
    case EmbeddingSource::synthetic: throw ValidationError("embedding source synthetic needs a synthetic dataset");
  }
  return {std::move(corpus), std::move(x)};
}

OraclePtr make_oracle(const RunConfig& config, std::size_t label_count, const std::filesystem::path& base,
                      const std::filesystem::path& output_dir, std::unique_ptr<MockChatServer>& server) {
  const OracleConfig& o = config.oracle;
  OraclePtr oracle;
  if (o.kind == OracleKind::ground_truth) {
    oracle = std::make_shared<GroundTruthOracle>(label_count);
  } else {
    LlmOptions opts;
    opts.model = o.model;
    opts.retry_limit = o.retry_limit;
    opts.backoff = std::chrono::milliseconds(o.backoff_ms);
    opts.min_interval = std::chrono::milliseconds(o.min_interval_ms);
    opts.max_in_flight = o.max_in_flight;
    opts.timeout = std::chrono::seconds(o.timeout_s);
    if (o.kind == OracleKind::mock) {
      server = std::make_unique<MockChatServer>(MockScript::load(resolve(base, *o.script)));
      opts.endpoint = server->url();
      opts.api_key = "mock";
    } else {
      opts.endpoint = *o.endpoint;
    }
    oracle = std::make_shared<LlmOracle>(opts, config.prompt_template(), label_count);
  }
  if (o.cache_path) {
    oracle = std::make_shared<CachedOracle>(oracle, resolve(output_dir, *o.cache_path));
  }
  return oracle;
}

nlohmann::ordered_json run_experiment(const RunConfig& config, const std::filesystem::path& base, bool force) {
  config.validate();
  const std::filesystem::path out = resolve(base, config.output_dir);
  if (std::filesystem::exists(out) && !std::filesystem::is_empty(out)) {
    if (!force) throw ValidationError("output directory " + out.string() + " is not empty (use --force to overwrite)");
    std::filesystem::remove_all(out);
  }
  std::filesystem::create_directories(out);
  write_text(out / "config.json", config.to_json().dump(2) + "\n");

  LoadedData data = load_data(config, base);
  std::unique_ptr<MockChatServer> server;

  ExperimentSetup setup;
  setup.task = config.task;
  setup.corpus = &data.corpus;
  setup.embeddings = &data.embeddings;
  setup.loop.seed_size = config.seed_size;
  setup.loop.batch_size = config.batch_size;
  setup.loop.iterations = config.iterations;
  setup.loop.classifier = config.classifier;
  setup.loop.rng_seed = config.rng_seed;
  setup.loop.timing = config.timing;
  setup.loop.strategy.candidate_factor = config.candidate_factor;
  setup.strategies.clear();
  for (auto k : config.strategies) setup.strategies.push_back(StrategySpec{k, config.candidate_factor});
  setup.folds = config.folds;
  setup.report_iteration = config.report_iteration;
  setup.parallel_folds = config.parallel_folds;
  setup.rq4_repeats = config.rq4_repeats;
  setup.prices = config.oracle.prices.value_or(Prices{});
  setup.output_dir = out;
  setup.oracle = make_oracle(config, data.corpus.class_count(), base, out, server);

  nlohmann::ordered_json summary;
  switch (config.mode) {
    case RunMode::rq1: summary = to_json(run_rq1(setup), setup); break;
    case RunMode::rq2: summary = to_json(run_rq2(setup), setup); break;
    case RunMode::rq3: summary = to_json(run_rq3(setup), setup); break;
    case RunMode::rq4: summary = to_json(run_rq4(setup), setup); break;
  }
  write_text(out / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace alm
