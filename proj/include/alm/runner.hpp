#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "alm/config.hpp"
#include "alm/embedding.hpp"
#include "alm/mock_server.hpp"

namespace alm {

struct LoadedData {
  Corpus corpus;
  EmbeddingMatrix embeddings;
};

/// Loads or generates the corpus and its embeddings. `base` resolves
/// relative paths.
LoadedData load_data(const RunConfig& config, const std::filesystem::path& base);

/// Label source for a run. For the mock kind a local server is started and
/// kept alive through `server`. A configured cache file lives under `output_dir`
/// when given as a relative path.
OraclePtr make_oracle(const RunConfig& config, std::size_t label_count, const std::filesystem::path& base,
                      const std::filesystem::path& output_dir, std::unique_ptr<MockChatServer>& server);

/// Executes the configured mode and writes config.json, summary.json,
/// run_log.jsonl and the learning curves under the output directory.
/// An existing non-empty output directory is replaced only with `force`.
nlohmann::ordered_json run_experiment(const RunConfig& config, const std::filesystem::path& base, bool force);

}  // namespace alm
