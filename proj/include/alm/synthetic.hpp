#pragma once

#include <cstddef>
#include <cstdint>

#include "alm/corpus.hpp"
#include "alm/embedding.hpp"

namespace alm {

/// Seeded Gaussian blobs. Every class owns `clusters_per_class` centres drawn
/// uniformly on a sphere of radius `separation`; points get isotropic noise
/// of standard deviation `spread`. Texts draw words from a per-class
/// vocabulary with probability `text_signal`, otherwise from a shared one.
struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t classes = 4;
  std::size_t dim = 32;
  std::size_t clusters_per_class = 3;
  double separation = 3.0;
  double spread = 1.0;
  std::size_t words = 12;
  double text_signal = 0.3;
  std::uint64_t rng_seed = 0;

  void validate() const;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SyntheticData {
  Corpus corpus;
  EmbeddingMatrix embeddings;
};

/// Labels cycle 0..C-1 so class counts differ by at most one.
SyntheticData make_blobs(const SyntheticSpec& spec);

}  // namespace alm
