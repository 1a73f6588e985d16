#include "alm/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alm/error.hpp"
#include "alm/rng.hpp"

namespace alm {
namespace {

void require_unlabeled(const PoolState& pool) {
  if (pool.unlabeled().empty()) throw Error("query strategy called with an empty unlabeled pool");
}

/// Positions into `scores` sorted by descending score, ties by ascending position
/// (pool.unlabeled() is ascending, so ties resolve to the lowest corpus index).
std::vector<std::size_t> rank_descending(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

QuerySelection top_k(const PoolState& pool, const std::vector<double>& scores, std::size_t batch) {
  const auto order = rank_descending(scores);
  const auto& u = pool.unlabeled();
  const std::size_t k = std::min(batch, u.size());
  QuerySelection sel;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r < k) {
      sel.indices.push_back(u[order[r]]);
      sel.scores.push_back(scores[order[r]]);
    } else {
      sel.backups.push_back(u[order[r]]);
    }
  }
  return sel;
}

std::vector<double> model_entropies(const PoolState& pool, const EmbeddingMatrix& x, const Classifier& model) {
  const ProbabilityMatrix p = model.predict_proba(x.gather(pool.unlabeled()));
  std::vector<double> h(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) h[i] = entropy(p.row(i));
  return h;
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

/// Lowest-index fallback for degenerate (zero-entropy) pools.
QuerySelection lowest_index(const PoolState& pool, std::size_t batch) {
  return top_k(pool, std::vector<double>(pool.unlabeled().size(), 0.0), batch);
}

std::vector<double> min_max_normalize(const std::vector<double>& v) {
  if (v.empty()) return {};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
  }
  return out;
}

}  // namespace

PoolState::PoolState(std::vector<std::size_t> pool) : initial_(std::move(pool)) {
  std::sort(initial_.begin(), initial_.end());
  if (std::adjacent_find(initial_.begin(), initial_.end()) != initial_.end()) throw ValidationError("pool has duplicate indices");
  unlabeled_ = initial_;
}

bool PoolState::is_unlabeled(std::size_t index) const {
  return std::binary_search(unlabeled_.begin(), unlabeled_.end(), index);
}

void PoolState::acquire(std::size_t index, int label) {
  const auto it = std::lower_bound(unlabeled_.begin(), unlabeled_.end(), index);
  if (it == unlabeled_.end() || *it != index) throw Error("index " + std::to_string(index) + " is not unlabeled");
  unlabeled_.erase(it);
  labeled_.push_back(index);
  labels_.push_back(label);
}

void PoolState::check_conservation() const {
  std::vector<std::size_t> l(labeled_);
  std::sort(l.begin(), l.end());
  if (std::adjacent_find(l.begin(), l.end()) != l.end()) throw Error("conservation: duplicate labeled index");
  std::vector<std::size_t> both;
  std::set_intersection(l.begin(), l.end(), unlabeled_.begin(), unlabeled_.end(), std::back_inserter(both));
  if (!both.empty()) throw Error("conservation: labeled and unlabeled overlap");
  std::vector<std::size_t> all;
  std::merge(l.begin(), l.end(), unlabeled_.begin(), unlabeled_.end(), std::back_inserter(all));
  if (all != initial_) throw Error("conservation: labeled + unlabeled != initial pool");
  if (labels_.size() != labeled_.size()) throw Error("conservation: label count mismatch");
}

const char* to_string(StrategyKind kind) noexcept {
  switch (kind) {
    case StrategyKind::qbc: return "qbc";
    case StrategyKind::entropy_diversity: return "entropy_diversity";
    case StrategyKind::coreset: return "coreset";
    case StrategyKind::info_density: return "info_density";
    case StrategyKind::random: return "random";
  }
  return "unknown";
}

StrategyKind parse_strategy_kind(const std::string& name) {
  for (auto k : {StrategyKind::qbc, StrategyKind::entropy_diversity, StrategyKind::coreset, StrategyKind::info_density,
                 StrategyKind::random}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown strategy '" + name + "'");
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(h, 0.0);
}

double voting_entropy(std::span<const ProbabilityMatrix> members, std::size_t row) {
  if (members.empty()) throw Error("voting_entropy needs at least one member");
  const std::size_t c = members.front().cols();
  std::vector<double> mean(c, 0.0);
  for (const auto& m : members) {
    for (std::size_t j = 0; j < c; ++j) mean[j] += m(row, j);
  }
  for (double& v : mean) v /= static_cast<double>(members.size());
  return entropy(mean);
}

double euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    s += d * d;
  }
  return std::sqrt(s);
}

QuerySelection select_qbc(const PoolState& pool, const EmbeddingMatrix& x, const Classifier& committee, std::size_t batch) {
  require_unlabeled(pool);
  const Matrix xu = x.gather(pool.unlabeled());
  std::vector<ProbabilityMatrix> member_probs;
  const auto members = committee_members(committee);
  if (members.empty()) {
    member_probs.push_back(committee.predict_proba(xu));
  } else {
    for (const auto& m : members) member_probs.push_back(m->predict_proba(xu));
  }
  std::vector<double> h(xu.rows());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = voting_entropy(member_probs, i);
  return top_k(pool, h, batch);
}

QuerySelection select_entropy_diversity(const PoolState& pool, const EmbeddingMatrix& x, const Classifier& model,
                                        std::size_t batch, std::size_t candidate_factor) {
  require_unlabeled(pool);
  if (candidate_factor == 0) throw ValidationError("candidate_factor must be >= 1");
  const auto h = model_entropies(pool, x, model);
  if (all_zero(h)) return lowest_index(pool, batch);

  const auto& u = pool.unlabeled();
  const auto order = rank_descending(h);
  const std::size_t k = std::min(batch, u.size());
  const std::size_t n_cand = std::min(u.size(), std::max(k, candidate_factor * batch));
  std::vector<std::size_t> cand(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_cand));

  std::vector<double> cand_h(n_cand);
  for (std::size_t i = 0; i < n_cand; ++i) cand_h[i] = h[cand[i]];
  const auto norm_h = min_max_normalize(cand_h);

  std::vector<bool> picked(n_cand, false);
  std::vector<double> min_dist(n_cand, 0.0);
  QuerySelection sel;
  auto pick = [&](std::size_t c, double score) {
    picked[c] = true;
    sel.indices.push_back(u[cand[c]]);
    sel.scores.push_back(score);
    for (std::size_t j = 0; j < n_cand; ++j) {
      if (picked[j]) continue;
      const double dist = euclidean(x.row(u[cand[j]]), x.row(u[cand[c]]));
      min_dist[j] = sel.indices.size() == 1 ? dist : std::min(min_dist[j], dist);
    }
  };
  // Candidate 0 has the highest entropy (lowest index among ties).
  pick(0, norm_h[0]);
  while (sel.indices.size() < k) {
    std::vector<std::size_t> rest;
    std::vector<double> rest_dist;
    for (std::size_t j = 0; j < n_cand; ++j) {
      if (!picked[j]) {
        rest.push_back(j);
        rest_dist.push_back(min_dist[j]);
      }
    }
    const auto norm_d = min_max_normalize(rest_dist);
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t r = 0; r < rest.size(); ++r) {
      const double s = norm_h[rest[r]] + norm_d[r];
      if (s > best_score || (s == best_score && u[cand[rest[r]]] < u[cand[rest[best]]])) {
        best = r;
        best_score = s;
      }
    }
    pick(rest[best], best_score);
  }
  // Backups: unpicked candidates, then everything else, by entropy rank.
  std::vector<bool> used(u.size(), false);
  for (std::size_t c = 0; c < n_cand; ++c) {
    if (picked[c]) used[cand[c]] = true;
  }
  for (std::size_t pos : order) {
    if (!used[pos]) sel.backups.push_back(u[pos]);
  }
  return sel;
}

QuerySelection select_coreset(const PoolState& pool, const EmbeddingMatrix& x, std::size_t batch) {
  require_unlabeled(pool);
  if (pool.labeled().empty()) throw Error("core-set selection needs a non-empty labeled set");
  const auto& u = pool.unlabeled();
  std::vector<double> min_dist(u.size(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    double best = euclidean(x.row(u[i]), x.row(pool.labeled().front()));
    for (std::size_t l = 1; l < pool.labeled().size(); ++l) best = std::min(best, euclidean(x.row(u[i]), x.row(pool.labeled()[l])));
    min_dist[i] = best;
  }
  const std::size_t k = std::min(batch, u.size());
  std::vector<bool> picked(u.size(), false);
  QuerySelection sel;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = u.size();
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!picked[i] && (best == u.size() || min_dist[i] > min_dist[best])) best = i;
    }
    picked[best] = true;
    sel.indices.push_back(u[best]);
    sel.scores.push_back(min_dist[best]);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!picked[i]) min_dist[i] = std::min(min_dist[i], euclidean(x.row(u[i]), x.row(u[best])));
    }
  }
  std::vector<double> rest(u.size(), -1.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!picked[i]) rest[i] = min_dist[i];
  }
  for (std::size_t pos : rank_descending(rest)) {
    if (!picked[pos]) sel.backups.push_back(u[pos]);
  }
  return sel;
}

std::vector<double> unlabeled_density(const PoolState& pool, const EmbeddingMatrix& x) {
  const auto& u = pool.unlabeled();
  const std::size_t m = u.size();
  if (m == 1) return {1.0};
  const std::size_t d = x.dim();
  // Mean cosine to the others = (u_i . S - u_i . u_i) / (m - 1), S = sum of unit rows.
  std::vector<double> unit(m * d, 0.0), total(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = x.row(u[i]);
    double norm = 0.0;
    for (float v : r) norm += static_cast<double>(v) * static_cast<double>(v);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t k = 0; k < d; ++k) unit[i * d + k] = static_cast<double>(r[k]) / norm;
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < d; ++k) total[k] += unit[i * d + k];
  }
  std::vector<double> density(m);
  for (std::size_t i = 0; i < m; ++i) {
    double dot_total = 0.0, self = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      dot_total += unit[i * d + k] * total[k];
      self += unit[i * d + k] * unit[i * d + k];
    }
    density[i] = std::max(0.0, (dot_total - self) / static_cast<double>(m - 1));
  }
  return density;
}

QuerySelection select_info_density(const PoolState& pool, const EmbeddingMatrix& x, const Classifier& model,
                                   std::size_t batch) {
  require_unlabeled(pool);
  const auto h = model_entropies(pool, x, model);
  if (all_zero(h)) return lowest_index(pool, batch);
  const auto density = unlabeled_density(pool, x);
  std::vector<double> score(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) score[i] = h[i] * density[i];
  return top_k(pool, score, batch);
}

QuerySelection select_random(const PoolState& pool, std::size_t batch, std::uint64_t rng_seed) {
  std::vector<std::size_t> order(pool.unlabeled());
  CounterRng rng(rng_seed);
  shuffle(order, rng);
  const std::size_t k = std::min(batch, order.size());
  QuerySelection sel;
  sel.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  sel.scores.assign(k, 0.0);
  sel.backups.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  return sel;
}

}  // namespace alm
