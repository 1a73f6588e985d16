#include <algorithm>
#include <cmath>
#include <deque>

#include "alm/error.hpp"
#include "alm/models.hpp"

namespace alm {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

class LogisticModel final : public Classifier {
 public:
  LogisticModel(std::size_t dim, std::size_t classes, std::vector<double> params)
      : dim_(dim), classes_(classes), params_(std::move(params)) {
    const std::size_t rows = classes_ == 2 ? 1 : classes_;
    if (params_.size() != rows * (dim_ + 1)) throw Error("logistic parameter vector has wrong length");
  }
  ClassifierKind kind() const noexcept override { return ClassifierKind::logistic; }
  std::size_t class_count() const noexcept override { return classes_; }
  std::size_t dim() const noexcept override { return dim_; }

  ProbabilityMatrix predict_proba(const Matrix& x) const override {
    if (x.cols() != dim_) throw Error("predict_proba: expected " + std::to_string(dim_) + " columns");
    const std::size_t rows = classes_ == 2 ? 1 : classes_;
    const std::span<const double> w(params_.data(), rows * dim_);
    const std::span<const double> b(params_.data() + rows * dim_, rows);
    ProbabilityMatrix p(x.rows(), classes_);
    std::vector<double> z(classes_);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto xi = x.row(i);
      if (classes_ == 2) {
        z[0] = 0.0;
        z[1] = dot(w.subspan(0, dim_), xi) + b[0];
      } else {
        for (std::size_t c = 0; c < classes_; ++c) z[c] = dot(w.subspan(c * dim_, dim_), xi) + b[c];
      }
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t c = 0; c < classes_; ++c) {
        p(i, c) = std::exp(z[c] - zmax);
        sum += p(i, c);
      }
      for (std::size_t c = 0; c < classes_; ++c) p(i, c) /= sum;
    }
    return p;
  }

 private:
  std::size_t dim_;
  std::size_t classes_;
  std::vector<double> params_;
};

}  // namespace

double LogisticObjective::evaluate(std::span<const double> params, std::span<double> grad) const {
  const std::size_t d = x.cols();
  const std::size_t rows = free_rows();
  const std::span<const double> w = params.subspan(0, rows * d);
  const std::span<const double> b = params.subspan(rows * d, rows);
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  std::vector<double> z(classes);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    if (classes == 2) {
      z[0] = 0.0;
      z[1] = dot(w.subspan(0, d), xi) + b[0];
    } else {
      for (std::size_t c = 0; c < classes; ++c) z[c] = dot(w.subspan(c * d, d), xi) + b[c];
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double zc : z) sum += std::exp(zc - zmax);
    const double lse = zmax + std::log(sum);
    const auto yi = static_cast<std::size_t>(y[i]);
    loss += lse - z[yi];
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t c = classes == 2 ? 1 : r;
      const double residual = std::exp(z[c] - lse) - (c == yi ? 1.0 : 0.0);
      for (std::size_t k = 0; k < d; ++k) grad[r * d + k] += residual * xi[k];
      grad[rows * d + r] += residual;
    }
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < rows * d; ++k) {
    sq += w[k] * w[k];
    grad[k] += l2 * w[k];
  }
  return loss + 0.5 * l2 * sq;
}

std::vector<double> fit_logistic_parameters(const LogisticObjective& objective, const LogisticParams& params,
                                            LogisticFitTrace* trace) {
  const std::size_t n = objective.parameter_count();
  std::vector<double> w(n, 0.0), g(n), w_new(n), g_new(n), dir(n);
  double f = objective.evaluate(w, g);
  if (trace) trace->losses.push_back(f);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> alpha;

  int iter = 0;
  bool converged = max_abs(g) < params.grad_tol;
  while (!converged && iter < params.max_iter) {
    // Two-loop recursion.
    for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
    alpha.assign(memory.size(), 0.0);
    for (std::size_t m = memory.size(); m-- > 0;) {
      alpha[m] = memory[m].rho * dot(memory[m].s, dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] -= alpha[m] * memory[m].y[k];
    }
    if (!memory.empty()) {
      const auto& last = memory.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : dir) v *= gamma;
    } else {
      const double gnorm = std::sqrt(dot(g, g));
      for (double& v : dir) v /= std::max(1.0, gnorm);
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const double beta = memory[m].rho * dot(memory[m].y, dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] += (alpha[m] - beta) * memory[m].s[k];
    }
    double slope = dot(g, dir);
    if (slope >= 0.0) {
      memory.clear();
      const double gnorm = std::sqrt(dot(g, g));
      for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k] / std::max(1.0, gnorm);
      slope = dot(g, dir);
    }

    double step = 1.0;
    double f_new = f;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      for (std::size_t k = 0; k < n; ++k) w_new[k] = w[k] + step * dir[k];
      f_new = objective.evaluate(w_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    Pair pair{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t k = 0; k < n; ++k) {
      pair.s[k] = w_new[k] - w[k];
      pair.y[k] = g_new[k] - g[k];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-12) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (memory.size() > static_cast<std::size_t>(params.history)) memory.pop_front();
    }
    std::swap(w, w_new);
    std::swap(g, g_new);
    f = f_new;
    ++iter;
    if (trace) trace->losses.push_back(f);
    converged = max_abs(g) < params.grad_tol;
  }
  if (trace) {
    trace->iterations = iter;
    trace->converged = converged;
  }
  return w;
}

ClassifierPtr make_logistic(std::size_t dim, std::size_t class_count, std::vector<double> params) {
  return std::make_shared<LogisticModel>(dim, class_count, std::move(params));
}

ClassifierPtr train_logistic_compact(const LogisticParams& params, const Matrix& x, std::span<const int> y,
                                     std::size_t classes) {
  const LogisticObjective objective{x, y, classes, params.l2};
  return make_logistic(x.cols(), classes, fit_logistic_parameters(objective, params));
}

}  // namespace alm
