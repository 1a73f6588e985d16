#include <algorithm>
#include <cmath>

#include "alm/error.hpp"
#include "alm/models.hpp"

namespace alm {
namespace {

// Weights over the features plus a trailing constant-1 feature (penalized bias).
using Weights = std::vector<double>;

double score(const Weights& w, std::span<const double> x) {
  double s = w.back();
  for (std::size_t k = 0; k < x.size(); ++k) s += w[k] * x[k];
  return s;
}

double primal(const Weights& w, const Matrix& x, std::span<const int> sign, double c) {
  double reg = 0.0;
  for (double v : w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) hinge += std::max(0.0, 1.0 - sign[i] * score(w, x.row(i)));
  return 0.5 * reg + c * hinge;
}

// Full-batch Pegasos on 0.5 ||w||^2 + c * sum(hinge), rescaled by 1 / (c n).
// Returns the iterate (or running average) with the lowest primal objective.
Weights fit_binary_svm(const Matrix& x, std::span<const int> sign, const SvmParams& params) {
  const std::size_t n = x.rows(), d = x.cols();
  const double lambda = 1.0 / (params.c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  Weights w(d + 1, 0.0), avg(d + 1, 0.0), sub(d + 1);
  Weights best = w;
  double best_obj = primal(w, x, sign, params.c);
  for (int t = 1; t <= params.epochs; ++t) {
    std::fill(sub.begin(), sub.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = x.row(i);
      if (sign[i] * score(w, xi) < 1.0) {
        for (std::size_t k = 0; k < d; ++k) sub[k] -= sign[i] * xi[k];
        sub[d] -= sign[i];
      }
    }
    const double eta = 1.0 / (lambda * t);
    double norm = 0.0;
    for (std::size_t k = 0; k <= d; ++k) {
      w[k] -= eta * (lambda * w[k] + sub[k] / static_cast<double>(n));
      norm += w[k] * w[k];
    }
    norm = std::sqrt(norm);
    if (norm > radius) {
      for (double& v : w) v *= radius / norm;
    }
    for (std::size_t k = 0; k <= d; ++k) avg[k] += (w[k] - avg[k]) / t;
    for (const Weights* cand : {&w, &avg}) {
      const double obj = primal(*cand, x, sign, params.c);
      if (obj < best_obj) {
        best_obj = obj;
        best = *cand;
      }
    }
  }
  return best;
}

double platt_probability(const PlattFit& fit, double f) {
  const double z = f * fit.a + fit.b;
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

struct OneVsRest {
  Weights w;
  PlattFit platt;
};

class LinearSvm final : public Classifier {
 public:
  LinearSvm(std::size_t dim, std::size_t classes, std::vector<OneVsRest> heads)
      : dim_(dim), classes_(classes), heads_(std::move(heads)) {}
  ClassifierKind kind() const noexcept override { return ClassifierKind::linear_svm; }
  std::size_t class_count() const noexcept override { return classes_; }
  std::size_t dim() const noexcept override { return dim_; }

  ProbabilityMatrix predict_proba(const Matrix& x) const override {
    if (x.cols() != dim_) throw Error("predict_proba: expected " + std::to_string(dim_) + " columns");
    ProbabilityMatrix p(x.rows(), classes_);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (classes_ == 2) {
        const double p1 = platt_probability(heads_[0].platt, score(heads_[0].w, x.row(i)));
        p(i, 0) = 1.0 - p1;
        p(i, 1) = p1;
        continue;
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < classes_; ++c) {
        p(i, c) = platt_probability(heads_[c].platt, score(heads_[c].w, x.row(i)));
        sum += p(i, c);
      }
      for (std::size_t c = 0; c < classes_; ++c) p(i, c) = sum > 0.0 ? p(i, c) / sum : 1.0 / static_cast<double>(classes_);
    }
    return p;
  }

 private:
  std::size_t dim_;
  std::size_t classes_;
  std::vector<OneVsRest> heads_;
};

}  // namespace

PlattFit fit_platt(std::span<const double> scores, std::span<const int> positive) {
  const std::size_t n = scores.size();
  double prior1 = 0.0;
  for (int p : positive) prior1 += p ? 1.0 : 0.0;
  const double prior0 = static_cast<double>(n) - prior1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = positive[i] ? hi : lo;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = scores[i] * a + b;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  PlattFit fit{0.0, std::log((prior0 + 1.0) / (prior1 + 1.0))};
  double fval = objective(fit.a, fit.b);
  for (int it = 0; it < 100; ++it) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = scores[i] * fit.a + fit.b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = fit.a + step * da, nb = fit.b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        fit = {na, nb};
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  return fit;
}

ClassifierPtr train_svm_compact(const SvmParams& params, const Matrix& x, std::span<const int> y, std::size_t classes) {
  const std::size_t heads = classes == 2 ? 1 : classes;
  std::vector<OneVsRest> out;
  std::vector<int> sign(y.size()), positive(y.size());
  std::vector<double> scores(y.size());
  for (std::size_t h = 0; h < heads; ++h) {
    const int target = classes == 2 ? 1 : static_cast<int>(h);
    for (std::size_t i = 0; i < y.size(); ++i) {
      positive[i] = y[i] == target ? 1 : 0;
      sign[i] = positive[i] ? 1 : -1;
    }
    OneVsRest head;
    head.w = fit_binary_svm(x, sign, params);
    for (std::size_t i = 0; i < y.size(); ++i) scores[i] = score(head.w, x.row(i));
    head.platt = fit_platt(scores, positive);
    out.push_back(std::move(head));
  }
  return std::make_shared<LinearSvm>(x.cols(), classes, std::move(out));
}

}  // namespace alm
