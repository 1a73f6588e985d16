// Command-line front end: prep, embed, synth, run, report, mock-llm.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "alm/config.hpp"
#include "alm/corpus.hpp"
#include "alm/embedding.hpp"
#include "alm/mock_server.hpp"
#include "alm/runner.hpp"
#include "alm/synthetic.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

alm::CorpusFormat parse_format(const std::string& s) {
  if (s == "csv") return alm::CorpusFormat::csv;
  if (s == "jsonl") return alm::CorpusFormat::jsonl;
  throw alm::ValidationError("unknown format '" + s + "'");
}

struct PrepArgs {
  std::string input, output, format = "jsonl", text_field = "text", label_field = "label", labels, histogram;
  std::size_t min_words = 0, balanced = 0, subsample = 0, bin_width = 50;
  std::uint64_t seed = 0;
};

int cmd_prep(const PrepArgs& a) {
  alm::LoadOptions opts;
  opts.format = parse_format(a.format);
  opts.text_field = a.text_field;
  if (!a.label_field.empty()) opts.label_field = a.label_field;
  opts.label_names = split_names(a.labels);
  alm::Corpus corpus = alm::load_corpus(a.input, opts);
  const std::size_t loaded = corpus.size();
  if (a.min_words > 0) corpus = alm::filter_short(corpus, a.min_words);
  if (a.balanced > 0) corpus = alm::balanced_sample(corpus, a.balanced, a.seed);
  if (a.subsample > 0) corpus = alm::random_subsample(corpus, a.subsample, a.seed);
  alm::write_corpus_jsonl(corpus, a.output);
  if (!a.histogram.empty()) {
    std::ofstream out(a.histogram, std::ios::binary);
    if (!out) throw alm::Error("cannot write " + a.histogram);
    out << "bin_start,count\n";
    for (const auto& [start, count] : alm::length_histogram(corpus, a.bin_width)) out << start << ',' << count << '\n';
  }
  std::cerr << "prep: " << loaded << " loaded, " << corpus.size() << " written to " << a.output << '\n';
  return 0;
}

int cmd_embed(const std::string& config_path, const std::string& output) {
  const alm::RunConfig config = alm::RunConfig::load(config_path);
  const fs::path base = fs::path(config_path).parent_path();
  if (config.embedding.source == alm::EmbeddingSource::file) {
    throw alm::ValidationError("embed needs a hash, remote or synthetic embedding source");
  }
  const alm::LoadedData data = alm::load_data(config, base);
  alm::write_alemb1(data.embeddings, output);
  std::cerr << "embed: " << data.embeddings.rows() << " x " << data.embeddings.dim() << " written to " << output << '\n';
  return 0;
}

int cmd_synth(const alm::SyntheticSpec& spec, const std::string& output, const std::string& embeddings) {
  const alm::SyntheticData data = alm::make_blobs(spec);
  alm::write_corpus_jsonl(data.corpus, output);
  if (!embeddings.empty()) alm::write_alemb1(data.embeddings, embeddings);
  std::cerr << "synth: " << data.corpus.size() << " instances written to " << output << '\n';
  return 0;
}

int cmd_run(const std::string& config_path, bool force) {
  const alm::RunConfig config = alm::RunConfig::load(config_path);
  const fs::path base = fs::path(config_path).parent_path();
  alm::run_experiment(config, base, force);
  std::cerr << "run: wrote " << alm::resolve(base, config.output_dir).string() << '\n';
  return 0;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void print_run(const json& run) {
  std::cout << "  strategy " << run["strategy"].get<std::string>() << " (" << run["scenario"].get<std::string>()
            << ", iteration " << run["report_iteration"] << ")\n";
  std::cout << "    fold      accuracy  f1        recall\n";
  for (const auto& f : run["folds"]) {
    std::cout << "    " << f["fold"].get<int>() << "         " << fmt(f["accuracy"]) << "    " << fmt(f["f1"]) << "    "
              << fmt(f["recall"]) << '\n';
  }
  const auto& a = run["average"];
  std::cout << "    average   " << fmt(a["accuracy"]) << "    " << fmt(a["f1"]) << "    " << fmt(a["recall"]) << '\n';
}

void print_arm(const char* name, const json& a) {
  std::cout << "  " << name << "  accuracy " << fmt(a["accuracy"]) << "  time " << fmt(a["time_min"], 2) << " min  cost "
            << fmt(a["cost_usd"], 2) << " USD\n";
}

int cmd_report(const std::string& run_dir) {
  const fs::path path = fs::path(run_dir) / "summary.json";
  std::ifstream in(path);
  if (!in) throw alm::ValidationError("cannot open " + path.string());
  const json s = json::parse(in);
  const std::string mode = s["mode"];
  std::cout << "task " << s["task"].get<std::string>() << ", mode " << mode << ", " << s["instances"] << " instances, "
            << s["folds"] << " folds\n";
  if (mode == "rq1") {
    for (const auto& run : s["strategies"]) print_run(run);
  } else if (mode == "rq2") {
    for (const auto& st : s["strategies"]) {
      std::cout << "  strategy " << st["strategy"].get<std::string>() << ": average std-dev "
                << fmt(st["average_stddev"]) << ", llm - ground truth " << fmt(st["average_llm_minus_ground_truth"])
                << ", llm - hybrid " << fmt(st["average_llm_minus_hybrid"]) << '\n';
    }
  } else if (mode == "rq3") {
    print_arm("direct", s["direct"]);
    print_arm("loop  ", s["loop"]);
    std::cout << "  cost ratio " << fmt(s["cost_ratio"]) << ", time ratio " << fmt(s["time_ratio"]) << '\n';
  } else if (mode == "rq4") {
    std::cout << "  budget " << s["budget"] << ", random average " << fmt(s["random_average"]) << ", active average "
              << fmt(s["active"]["average"]["accuracy"]) << ", gain " << fmt(s["gain"]) << '\n';
  }
  return 0;
}

int cmd_mock_llm(const std::string& script, const std::string& host, int port) {
  alm::MockChatServer server(alm::MockScript::load(script), host, port);
  std::cout << server.url() << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::cerr << "mock-llm: " << server.requests() << " requests, " << server.unmatched() << " unmatched\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pool-based active learning with an LLM labeling oracle"};
  app.require_subcommand(1);

  PrepArgs prep;
  auto* p = app.add_subcommand("prep", "Filter and sample a labeled corpus into JSONL");
  p->add_option("--input", prep.input, "CSV or JSONL corpus")->required();
  p->add_option("--output", prep.output, "Output JSONL path")->required();
  p->add_option("--format", prep.format, "csv or jsonl")->capture_default_str();
  p->add_option("--text-field", prep.text_field)->capture_default_str();
  p->add_option("--label-field", prep.label_field, "Empty for unlabeled input")->capture_default_str();
  p->add_option("--labels", prep.labels, "Comma-separated label names; index = code")->required();
  p->add_option("--min-words", prep.min_words, "Drop texts with this many words or fewer");
  p->add_option("--balanced", prep.balanced, "Instances per class");
  p->add_option("--subsample", prep.subsample, "Random subsample size");
  p->add_option("--seed", prep.seed);
  p->add_option("--histogram", prep.histogram, "Word-length histogram CSV path");
  p->add_option("--bin-width", prep.bin_width)->capture_default_str();

  std::string embed_config, embed_output;
  auto* e = app.add_subcommand("embed", "Write the embeddings a run config would use as an ALEMB1 file");
  e->add_option("--config", embed_config)->required();
  e->add_option("--output", embed_output)->required();

  alm::SyntheticSpec synth;
  std::string synth_output, synth_embeddings;
  auto* s = app.add_subcommand("synth", "Generate the seeded Gaussian-blob corpus");
  s->add_option("--n", synth.n)->capture_default_str();
  s->add_option("--classes", synth.classes)->capture_default_str();
  s->add_option("--dim", synth.dim)->capture_default_str();
  s->add_option("--clusters", synth.clusters_per_class)->capture_default_str();
  s->add_option("--separation", synth.separation)->capture_default_str();
  s->add_option("--spread", synth.spread)->capture_default_str();
  s->add_option("--seed", synth.rng_seed)->capture_default_str();
  s->add_option("--output", synth_output, "Corpus JSONL path")->required();
  s->add_option("--embeddings", synth_embeddings, "Optional ALEMB1 path for the blob vectors");

  std::string run_config;
  bool force = false;
  auto* r = app.add_subcommand("run", "Run an experiment from a config file");
  r->add_option("config", run_config)->required();
  r->add_flag("--force", force, "Replace a non-empty output directory");

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "Print the tables of a finished run");
  rep->add_option("run_dir", report_dir)->required();

  std::string mock_script, mock_host = "127.0.0.1";
  int mock_port = 8089;
  auto* m = app.add_subcommand("mock-llm", "Serve a scripted chat-completion endpoint");
  m->add_option("--script", mock_script)->required();
  m->add_option("--host", mock_host)->capture_default_str();
  m->add_option("--port", mock_port, "0 picks a free port")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*p) return cmd_prep(prep);
    if (*e) return cmd_embed(embed_config, embed_output);
    if (*s) return cmd_synth(synth, synth_output, synth_embeddings);
    if (*r) return cmd_run(run_config, force);
    if (*rep) return cmd_report(report_dir);
    if (*m) return cmd_mock_llm(mock_script, mock_host, mock_port);
  } catch (const alm::ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
