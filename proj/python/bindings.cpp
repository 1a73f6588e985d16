#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "alm/config.hpp"
#include "alm/embedding.hpp"
#include "alm/error.hpp"
#include "alm/metrics.hpp"
#include "alm/oracle.hpp"
#include "alm/runner.hpp"
#include "alm/strategies.hpp"
#include "alm/synthetic.hpp"

namespace py = pybind11;

namespace {

py::array_t<float> to_numpy(const alm::EmbeddingMatrix& m) {
  py::array_t<float> out({m.rows(), m.dim()});
  auto v = m.values();
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict template_dict(const alm::PromptTemplate& t) {
  py::dict d;
  d["expertise"] = t.expertise;
  d["task"] = t.task;
  d["instruction"] = t.instruction;
  return d;
}

alm::PromptTemplate template_from(const py::dict& d) {
  return {d["expertise"].cast<std::string>(), d["task"].cast<std::string>(), d["instruction"].cast<std::string>()};
}

}  // namespace

PYBIND11_MODULE(_alm, m) {
  m.doc() = "Native core of the alm active-learning toolkit";

  static py::exception<alm::ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
  static py::exception<alm::Error> alm_error(m, "AlmError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const alm::ValidationError& e) {
      py::set_error(validation_error, e.what());
    } catch (const alm::Error& e) {
      py::set_error(alm_error, e.what());
    }
  });

  m.def(
      "make_blobs",
      [](std::size_t n, std::size_t classes, std::size_t dim, std::size_t clusters_per_class, double separation,
         double spread, std::uint64_t rng_seed) {
        alm::SyntheticSpec s;
        s.n = n;
        s.classes = classes;
        s.dim = dim;
        s.clusters_per_class = clusters_per_class;
        s.separation = separation;
        s.spread = spread;
        s.rng_seed = rng_seed;
        const auto data = alm::make_blobs(s);
        return py::make_tuple(data.corpus.texts(), data.corpus.gold_labels(), to_numpy(data.embeddings));
      },
      py::arg("n") = 2000, py::arg("classes") = 4, py::arg("dim") = 32, py::arg("clusters_per_class") = 3,
      py::arg("separation") = 3.0, py::arg("spread") = 1.0, py::arg("rng_seed") = 0,
      "Seeded Gaussian blobs: (texts, labels, embeddings).");

  m.def(
      "hash_embed",
      [](const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed) {
        return to_numpy(alm::hash_embed(texts, dim, seed));
      },
      py::arg("texts"), py::arg("dim") = 768, py::arg("seed") = 0);

  m.def(
      "load_embeddings",
      [](const std::filesystem::path& path, std::size_t expected_n) {
        return to_numpy(alm::load_embedding_file(path, expected_n));
      },
      py::arg("path"), py::arg("expected_n"), "Loads an ALEMB1 file or its JSONL fallback.");

  m.def(
      "metrics",
      [](const std::vector<int>& gold, const std::vector<int>& pred, std::size_t classes) {
        const auto r = alm::metrics(gold, pred, classes);
        py::dict d;
        d["accuracy"] = r.accuracy;
        d["f1"] = r.f1;
        d["recall"] = r.recall;
        d["zero_division"] = r.zero_division;
        return d;
      },
      py::arg("gold"), py::arg("pred"), py::arg("classes"));

  m.def(
      "kfold",
      [](std::size_t n, std::size_t k, std::uint64_t seed) {
        py::list out;
        for (const auto& f : alm::kfold(n, k, seed)) out.append(py::make_tuple(f.train, f.test));
        return out;
      },
      py::arg("n"), py::arg("k"), py::arg("rng_seed") = 0, "List of (train, test) index lists.");

  m.def(
      "entropy", [](const std::vector<double>& p) { return alm::entropy(p); }, py::arg("p"));

  m.def(
      "preset_template", [](const std::string& task) { return template_dict(alm::preset_template(task)); },
      py::arg("task"));

  m.def(
      "build_chat_request",
      [](const py::dict& tmpl, const std::string& query, const std::string& model) {
        return alm::build_chat_request(model, alm::render_prompt(template_from(tmpl), query));
      },
      py::arg("template"), py::arg("query"), py::arg("model") = "gpt-4o");

  m.def(
      "parse_label",
      [](const std::string& response, std::size_t label_count) { return alm::parse_label(response, label_count); },
      py::arg("response"), py::arg("label_count"));

  m.def(
      "canonical_config",
      [](const std::string& config_json) {
        const auto c = alm::RunConfig::from_json(nlohmann::json::parse(config_json));
        c.validate();
        return c.to_json().dump();
      },
      py::arg("config_json"), "Validates a config and returns it with every default filled in.");

  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::filesystem::path& base, bool force) {
        const auto c = alm::RunConfig::from_json(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        return alm::run_experiment(c, base, force).dump();
      },
      py::arg("config_json"), py::arg("base") = ".", py::arg("force") = false);
}
