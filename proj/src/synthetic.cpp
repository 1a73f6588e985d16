#include "alm/synthetic.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "alm/rng.hpp"

namespace alm {
namespace {

constexpr std::size_t kClassVocab = 40;
constexpr std::size_t kSharedVocab = 160;

enum Stream : std::uint64_t { kCentres = 1, kPoints = 2, kTexts = 3 };

std::string make_word(std::size_t id) {
  static const char* const syllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "te", "vo",
                                          "bi", "do", "fu", "ga", "hi", "jo", "pe", "zu"};
  std::string w;
  for (int i = 0; i < 3; ++i) {
    w += syllables[id % 16];
    id /= 16;
  }
  return w;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (classes < 2) throw ValidationError("synthetic classes must be >= 2");
  if (n < classes) throw ValidationError("synthetic n must be >= classes");
  if (dim < 1) throw ValidationError("synthetic dim must be >= 1");
  if (clusters_per_class < 1) throw ValidationError("clusters_per_class must be >= 1");
  if (!(separation >= 0.0) || !(spread > 0.0)) throw ValidationError("separation must be >= 0 and spread > 0");
  if (words < 1) throw ValidationError("synthetic words must be >= 1");
  if (!(text_signal >= 0.0 && text_signal <= 1.0)) throw ValidationError("text_signal must be in [0, 1]");
  if (classes * kClassVocab + kSharedVocab > 4096) throw ValidationError("too many synthetic classes");
}

SyntheticData make_blobs(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t k = spec.classes * spec.clusters_per_class;
  std::vector<double> centres(k * spec.dim);
  CounterRng crng(spec.rng_seed, kCentres);
  for (std::size_t c = 0; c < k; ++c) {
    double norm = 0.0;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      centres[c * spec.dim + d] = crng.normal();
      norm += centres[c * spec.dim + d] * centres[c * spec.dim + d];
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < spec.dim; ++d) centres[c * spec.dim + d] *= spec.separation / norm;
  }

  std::vector<float> values(spec.n * spec.dim);
  std::vector<Instance> instances(spec.n);
  CounterRng prng(spec.rng_seed, kPoints);
  CounterRng trng(spec.rng_seed, kTexts);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t label = i % spec.classes;
    const std::size_t cluster = label * spec.clusters_per_class + prng.below(spec.clusters_per_class);
    for (std::size_t d = 0; d < spec.dim; ++d) {
      values[i * spec.dim + d] = static_cast<float>(centres[cluster * spec.dim + d] + spec.spread * prng.normal());
    }
    std::string text;
    for (std::size_t w = 0; w < spec.words; ++w) {
      const std::size_t id = trng.uniform() < spec.text_signal
                                 ? kSharedVocab + label * kClassVocab + trng.below(kClassVocab)
                                 : trng.below(kSharedVocab);
      if (!text.empty()) text += ' ';
      text += make_word(id);
    }
    instances[i] = Instance{i, std::move(text), static_cast<int>(label), i};
  }

  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.classes; ++c) names.push_back("class" + std::to_string(c));
  return SyntheticData{Corpus(std::move(instances), std::move(names), "synthetic"),
                       EmbeddingMatrix(spec.n, spec.dim, std::move(values))};
}

}  // namespace alm
