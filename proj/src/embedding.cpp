#include "alm/embedding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "alm/rng.hpp"
#include "alm/text.hpp"

namespace alm {
namespace {

constexpr std::array<char, 6> kMagic = {'A', 'L', 'E', 'M', 'B', '1'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

EmbeddingMatrix assemble(std::vector<std::vector<float>>& rows_by_id, std::size_t dim) {
  std::vector<float> values;
  values.reserve(rows_by_id.size() * dim);
  for (auto& r : rows_by_id) values.insert(values.end(), r.begin(), r.end());
  return EmbeddingMatrix(rows_by_id.size(), dim, std::move(values));
}

EmbeddingMatrix load_jsonl(const std::string& content, std::size_t expected_n) {
  std::istringstream in(content);
  std::string line;
  std::vector<std::vector<float>> rows(expected_n);
  std::vector<bool> seen(expected_n, false);
  std::size_t dim = 0;
  std::size_t count = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw EmbeddingError(EmbeddingErrc::malformed, "line " + std::to_string(line_no));
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_number_unsigned() || !obj.contains("vector") ||
        !obj["vector"].is_array()) {
      throw EmbeddingError(EmbeddingErrc::malformed, "line " + std::to_string(line_no) + " needs {id, vector}");
    }
    const auto id = obj["id"].get<std::uint64_t>();
    std::vector<float> v;
    for (const auto& x : obj["vector"]) {
      if (!x.is_number()) throw EmbeddingError(EmbeddingErrc::non_finite, "line " + std::to_string(line_no));
      const auto f = static_cast<float>(x.get<double>());
      if (!std::isfinite(f)) throw EmbeddingError(EmbeddingErrc::non_finite, "line " + std::to_string(line_no));
      v.push_back(f);
    }
    if (v.empty()) throw EmbeddingError(EmbeddingErrc::malformed, "line " + std::to_string(line_no) + " empty vector");
    if (count == 0) dim = v.size();
    if (v.size() != dim) throw EmbeddingError(EmbeddingErrc::dimension_drift, "line " + std::to_string(line_no));
    ++count;
    if (id >= expected_n) {
      if (count > expected_n) throw EmbeddingError(EmbeddingErrc::count_mismatch, "more than " + std::to_string(expected_n) + " records");
      throw EmbeddingError(EmbeddingErrc::id_gap, "id " + std::to_string(id) + " outside 0.." + std::to_string(expected_n - 1));
    }
    if (seen[id]) throw EmbeddingError(EmbeddingErrc::duplicate_id, "id " + std::to_string(id));
    seen[id] = true;
    rows[id] = std::move(v);
  }
  if (count != expected_n) {
    throw EmbeddingError(EmbeddingErrc::count_mismatch,
                         "file has " + std::to_string(count) + " records, expected " + std::to_string(expected_n));
  }
  return assemble(rows, dim);
}

}  // namespace

const char* to_string(EmbeddingErrc code) noexcept {
  switch (code) {
    case EmbeddingErrc::io: return "io error";
    case EmbeddingErrc::magic_mismatch: return "magic mismatch";
    case EmbeddingErrc::truncated: return "truncated file";
    case EmbeddingErrc::trailing_bytes: return "trailing bytes";
    case EmbeddingErrc::non_finite: return "non-finite value";
    case EmbeddingErrc::id_gap: return "id gap";
    case EmbeddingErrc::duplicate_id: return "duplicate id";
    case EmbeddingErrc::count_mismatch: return "count mismatch";
    case EmbeddingErrc::dimension_drift: return "dimension drift";
    case EmbeddingErrc::malformed: return "malformed record";
    case EmbeddingErrc::retries_exhausted: return "retries exhausted";
  }
  return "unknown";
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
  if (values_.size() != rows_ * dim_) throw EmbeddingError(EmbeddingErrc::count_mismatch, "value count != rows * dim");
  for (float v : values_) {
    if (!std::isfinite(v)) throw EmbeddingError(EmbeddingErrc::non_finite, "matrix entry");
  }
}

Matrix EmbeddingMatrix::gather(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), dim_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = row(indices[r]);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

Matrix EmbeddingMatrix::to_matrix() const {
  std::vector<double> data(values_.begin(), values_.end());
  return Matrix(rows_, dim_, std::move(data));
}

EmbeddingMatrix EmbeddingMatrix::scaled(float factor) const {
  std::vector<float> v(values_);
  for (float& x : v) x *= factor;
  return EmbeddingMatrix(rows_, dim_, std::move(v));
}

void write_alemb1(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::string buf(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(m.dim()));
  put_le<std::uint64_t>(buf, m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    put_le<std::uint64_t>(buf, i);
    for (float f : m.row(i)) put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(f));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmbeddingError(EmbeddingErrc::io, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

EmbeddingMatrix load_embedding_file(const std::filesystem::path& path, std::size_t expected_n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingError(EmbeddingErrc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();

  if (content.size() < kMagic.size() || std::memcmp(content.data(), kMagic.data(), kMagic.size()) != 0) {
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '{') return load_jsonl(content, expected_n);
    throw EmbeddingError(EmbeddingErrc::magic_mismatch, path.string());
  }
  const auto* p = reinterpret_cast<const unsigned char*>(content.data());
  const std::size_t header = kMagic.size() + 4 + 8;
  if (content.size() < header) throw EmbeddingError(EmbeddingErrc::truncated, "header");
  const auto dim = get_le<std::uint32_t>(p + 6);
  const auto count = get_le<std::uint64_t>(p + 10);
  if (dim == 0) throw EmbeddingError(EmbeddingErrc::malformed, "dim is 0");
  if (count != expected_n) {
    throw EmbeddingError(EmbeddingErrc::count_mismatch,
                         "header count " + std::to_string(count) + ", expected " + std::to_string(expected_n));
  }
  const std::size_t record = 8 + 4 * static_cast<std::size_t>(dim);
  const std::size_t need = header + record * count;
  if (content.size() < need) throw EmbeddingError(EmbeddingErrc::truncated, "expected " + std::to_string(need) + " bytes");
  if (content.size() > need) throw EmbeddingError(EmbeddingErrc::trailing_bytes, std::to_string(content.size() - need) + " extra bytes");

  std::vector<float> values(count * dim);
  std::vector<bool> seen(count, false);
  for (std::size_t r = 0; r < count; ++r) {
    const unsigned char* rec = p + header + r * record;
    const auto id = get_le<std::uint64_t>(rec);
    if (id >= count) throw EmbeddingError(EmbeddingErrc::id_gap, "id " + std::to_string(id) + " with count " + std::to_string(count));
    if (seen[id]) throw EmbeddingError(EmbeddingErrc::duplicate_id, "id " + std::to_string(id));
    seen[id] = true;
    for (std::size_t k = 0; k < dim; ++k) {
      const float f = std::bit_cast<float>(get_le<std::uint32_t>(rec + 8 + 4 * k));
      if (!std::isfinite(f)) throw EmbeddingError(EmbeddingErrc::non_finite, "record id " + std::to_string(id));
      values[id * dim + k] = f;
    }
  }
  return EmbeddingMatrix(count, dim, std::move(values));
}

EmbeddingMatrix hash_embed(std::span<const std::string> texts, std::size_t dim, std::uint64_t rng_seed) {
  if (dim < 2) throw ValidationError("hash_embed needs dim >= 2");
  const std::size_t n = texts.size();
  std::vector<std::unordered_map<std::string, std::size_t>> tf(n);
  std::unordered_map<std::string, std::size_t> df;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto tok : text::split_whitespace(texts[i])) ++tf[i][lower_ascii(tok)];
    for (const auto& [term, _] : tf[i]) ++df[term];
  }
  std::vector<float> values(n * dim, 0.0f);
  std::vector<double> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    // Sorted terms keep floating-point accumulation order fixed.
    std::vector<std::pair<std::string, std::size_t>> terms(tf[i].begin(), tf[i].end());
    std::sort(terms.begin(), terms.end());
    for (const auto& [term, count] : terms) {
      const double idf = std::log(static_cast<double>(n) / (1.0 + static_cast<double>(df[term])));
      const std::uint64_t h = fnv1a(term, rng_seed);
      const std::size_t bucket = static_cast<std::size_t>(h % dim);
      const double sign = (mix64(h) >> 63) != 0 ? -1.0 : 1.0;
      row[bucket] += sign * static_cast<double>(count) * idf;
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (std::size_t k = 0; k < dim; ++k) values[i * dim + k] = static_cast<float>(row[k] / norm);
    }
  }
  return EmbeddingMatrix(n, dim, std::move(values));
}

}  // namespace alm
