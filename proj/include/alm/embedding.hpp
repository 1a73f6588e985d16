#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alm/error.hpp"
#include "alm/matrix.hpp"

namespace alm {

/// n x dim matrix of finite f32 values; row i belongs to corpus instance i.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> row(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }
  std::span<const float> values() const noexcept { return values_; }

  /// Rows at `indices`, widened to double.
  Matrix gather(std::span<const std::size_t> indices) const;
  Matrix to_matrix() const;
  EmbeddingMatrix scaled(float factor) const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

enum class EmbeddingErrc {
  io,
  magic_mismatch,
  truncated,
  trailing_bytes,
  non_finite,
  id_gap,
  duplicate_id,
  count_mismatch,
  dimension_drift,
  malformed,
  retries_exhausted,
};

const char* to_string(EmbeddingErrc code) noexcept;

class EmbeddingError : public Error {
 public:
  EmbeddingError(EmbeddingErrc code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  EmbeddingErrc code() const noexcept { return code_; }

 private:
  EmbeddingErrc code_;
};

/// ALEMB1: "ALEMB1", u32 LE dim, u64 LE count, then count x (u64 LE id, dim x f32 LE).
void write_alemb1(const EmbeddingMatrix& m, const std::filesystem::path& path);

/// Loads ALEMB1, or the JSONL fallback ({id, vector} per line) when the file
/// does not start with the magic and its first non-space byte is '{'.
EmbeddingMatrix load_embedding_file(const std::filesystem::path& path, std::size_t expected_n);

/// Feature-hashed TF-IDF bag of words with a sign hash, L2-normalized rows.
/// Weight = tf * ln(n / (1 + df)). All-zero rows stay zero.
EmbeddingMatrix hash_embed(std::span<const std::string> texts, std::size_t dim, std::uint64_t rng_seed);

struct RemoteEmbeddingOptions {
  std::string endpoint;
  std::size_t batch_size = 32;
  int max_retries = 3;
  std::chrono::milliseconds backoff{200};
  std::size_t concurrency = 1;
  std::chrono::seconds timeout{60};
};

/// POSTs {"texts":[...]} per batch and expects {"embeddings":[[...],...]}.
/// Non-200 responses and transport errors are retried with exponential backoff.
EmbeddingMatrix fetch_remote(std::span<const std::string> texts, const RemoteEmbeddingOptions& options);

}  // namespace alm
