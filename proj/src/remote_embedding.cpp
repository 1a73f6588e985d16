#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <thread>

#include <json.hpp>

#include "alm/embedding.hpp"
#include "alm/http.hpp"

namespace alm {
namespace {

struct BatchResult {
  std::size_t dim = 0;
  std::vector<float> values;
};

BatchResult fetch_batch(std::span<const std::string> texts, const RemoteEmbeddingOptions& options) {
  nlohmann::json body;
  body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options.backoff * (1LL << (attempt - 1)));
    const auto res = http::post_json(options.endpoint, payload, {}, options.timeout);
    if (res.status != 200) {
      last_error = res.status == 0 ? res.transport_error : "HTTP " + std::to_string(res.status);
      continue;
    }
    nlohmann::json parsed = nlohmann::json::parse(res.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("embeddings") || !parsed["embeddings"].is_array()) {
      throw EmbeddingError(EmbeddingErrc::malformed, "response lacks an embeddings array");
    }
    const auto& rows = parsed["embeddings"];
    if (rows.size() != texts.size()) {
      throw EmbeddingError(EmbeddingErrc::count_mismatch, "batch of " + std::to_string(texts.size()) +
                                                              " texts returned " + std::to_string(rows.size()) + " rows");
    }
    BatchResult out;
    for (const auto& r : rows) {
      if (!r.is_array() || r.empty()) throw EmbeddingError(EmbeddingErrc::malformed, "embedding row is not a non-empty array");
      if (out.dim == 0) out.dim = r.size();
      if (r.size() != out.dim) throw EmbeddingError(EmbeddingErrc::dimension_drift, "rows within one batch differ");
      for (const auto& x : r) {
        const float f = x.is_number() ? static_cast<float>(x.get<double>()) : NAN;
        if (!std::isfinite(f)) throw EmbeddingError(EmbeddingErrc::non_finite, "remote embedding value");
        out.values.push_back(f);
      }
    }
    return out;
  }
  throw EmbeddingError(EmbeddingErrc::retries_exhausted, last_error);
}

}  // namespace

EmbeddingMatrix fetch_remote(std::span<const std::string> texts, const RemoteEmbeddingOptions& options) {
  if (options.batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (texts.empty()) return {};
  const std::size_t n_batches = (texts.size() + options.batch_size - 1) / options.batch_size;
  std::vector<std::optional<BatchResult>> results(n_batches);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_batches) return;
      {
        std::lock_guard lock(error_mutex);
        if (error) return;
      }
      const std::size_t begin = b * options.batch_size;
      const std::size_t len = std::min(options.batch_size, texts.size() - begin);
      try {
        results[b] = fetch_batch(texts.subspan(begin, len), options);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(options.concurrency, 1, n_batches);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  // Assemble in batch order regardless of completion order.
  const std::size_t dim = results.front()->dim;
  std::vector<float> values;
  values.reserve(texts.size() * dim);
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (results[b]->dim != dim) {
      throw EmbeddingError(EmbeddingErrc::dimension_drift, "batch " + std::to_string(b) + " has dim " +
                                                               std::to_string(results[b]->dim) + ", expected " + std::to_string(dim));
    }
    values.insert(values.end(), results[b]->values.begin(), results[b]->values.end());
  }
  return EmbeddingMatrix(texts.size(), dim, std::move(values));
}

}  // namespace alm
