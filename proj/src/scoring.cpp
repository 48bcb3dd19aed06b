#include "dice/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dice/parallel.hpp"

namespace dice {

namespace {

void require_finite(std::span<const double> logits, const char* who) {
  for (double v : logits) {
    if (!std::isfinite(v)) throw DataError(std::string(who) + ": non-finite logit");
  }
}

// Solves L y = d in place (forward substitution) and returns ‖y‖².
double squared_whitened_norm(const MatrixD& L, std::vector<double>& d) {
  const std::size_t m = L.rows();
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double v = d[i];
    const auto row = L.row(i);
    for (std::size_t j = 0; j < i; ++j) v -= row[j] * d[j];
    v /= row[i];
    d[i] = v;
    sum += v * v;
  }
  return sum;
}

}  // namespace

double energy_score(std::span<const double> logits) {
  if (logits.empty()) throw DataError("energy_score: empty logits");
  require_finite(logits, "energy_score");
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  return top + std::log(sum);
}

double msp_score(std::span<const double> logits) {
  if (logits.size() < 2) throw DataError("msp_score: need at least two classes");
  require_finite(logits, "msp_score");
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  // The max entry contributes exp(0) = 1 to the denominator.
  return 1.0 / sum;
}

GaussianClassStats fit_mahalanobis(const FeatureSet& train, std::size_t num_classes,
                                   double shrinkage) {
  if (!train.labels) throw DataError("fit_mahalanobis: training features carry no labels");
  if (shrinkage < 0.0) throw DomainError("fit_mahalanobis: shrinkage must be non-negative");
  train.check_labels(num_classes);
  const std::size_t m = train.dim();
  const std::size_t n = train.samples();
  const auto& labels = *train.labels;

  std::vector<std::size_t> counts(num_classes, 0);
  GaussianClassStats stats;
  stats.means.assign(num_classes, std::vector<double>(m, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    ++counts[labels[s]];
    const auto h = train.X.row(s);
    auto& mu = stats.means[labels[s]];
    for (std::size_t i = 0; i < m; ++i) mu[i] += h[i];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] < 2) {
      throw DataError("fit_mahalanobis: class " + std::to_string(c) + " has " +
                      std::to_string(counts[c]) + " samples, need at least 2");
    }
    for (double& v : stats.means[c]) v /= static_cast<double>(counts[c]);
  }

  MatrixD cov(m, m, 0.0);
  std::vector<double> d(m);
  for (std::size_t s = 0; s < n; ++s) {
    const auto h = train.X.row(s);
    const auto& mu = stats.means[labels[s]];
    for (std::size_t i = 0; i < m; ++i) d[i] = h[i] - mu[i];
    for (std::size_t i = 0; i < m; ++i) {
      auto row = cov.row(i);
      for (std::size_t j = 0; j <= i; ++j) row[j] += d[i] * d[j];
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cov(i, j) /= static_cast<double>(n);
      cov(j, i) = cov(i, j);
    }
    trace += cov(i, i);
  }
  const double ridge = shrinkage * trace / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) cov(i, i) += ridge;

  // Cholesky; a pivot that is not clearly positive relative to the average
  // variance means the covariance is singular for practical purposes.
  const double pivot_floor = 1e-12 * std::max(trace / static_cast<double>(m), 1e-300);
  MatrixD L(m, m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double diag = cov(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > pivot_floor)) {
      throw NumericalError("fit_mahalanobis: covariance is not positive definite (pivot " +
                           std::to_string(j) + ")");
    }
    L(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < m; ++i) {
      double v = cov(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / L(j, j);
    }
  }

  // Σ⁻¹ column by column from L Lᵀ x = e_j, then symmetrized.
  MatrixD precision(m, m, 0.0);
  std::vector<double> x(m);
  for (std::size_t col = 0; col < m; ++col) {
    for (std::size_t i = 0; i < m; ++i) {
      double v = i == col ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) v -= L(i, k) * x[k];
      x[i] = v / L(i, i);
    }
    for (std::size_t ii = m; ii-- > 0;) {
      double v = x[ii];
      for (std::size_t k = ii + 1; k < m; ++k) v -= L(k, ii) * x[k];
      x[ii] = v / L(ii, ii);
    }
    for (std::size_t i = 0; i < m; ++i) precision(i, col) = x[i];
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double avg = 0.5 * (precision(i, j) + precision(j, i));
      precision(i, j) = avg;
      precision(j, i) = avg;
    }
  }
  stats.precision = std::move(precision);
  stats.cholesky = std::move(L);
  return stats;
}

double mahalanobis_score(const GaussianClassStats& stats, std::span<const float> h) {
  const std::size_t m = stats.dim();
  if (h.size() != m) {
    throw ShapeError("mahalanobis_score: feature length " + std::to_string(h.size()) +
                     " != fitted dimension " + std::to_string(m));
  }
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> d(m);
  for (const auto& mu : stats.means) {
    for (std::size_t i = 0; i < m; ++i) d[i] = static_cast<double>(h[i]) - mu[i];
    best = std::max(best, -squared_whitened_norm(stats.cholesky, d));
  }
  return best;
}

ReactThreshold react_fit(const FeatureSet& calibration, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw DomainError("react percentile must lie in (0, 100]");
  }
  const auto values = calibration.X.flat();
  if (values.empty()) throw DataError("react_fit: empty calibration set");
  std::vector<float> sorted(values.begin(), values.end());
  const double total = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * total / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return {sorted[rank - 1], percentile};
}

std::vector<float> react_clip(std::span<const float> h, const ReactThreshold& t) {
  std::vector<float> out(h.begin(), h.end());
  for (float& v : out) v = std::min(v, t.c);
  return out;
}

FeatureSet react_clip(const FeatureSet& features, const ReactThreshold& t) {
  FeatureSet out = features;
  for (float& v : out.X.flat()) v = std::min(v, t.c);
  return out;
}

std::string_view to_string(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::kEnergy:
      return "energy";
    case ScoreMethod::kMsp:
      return "msp";
    case ScoreMethod::kMahalanobis:
      return "mahalanobis";
  }
  return "unknown";
}

ScoreMethod parse_score_method(std::string_view name) {
  if (name == "energy") return ScoreMethod::kEnergy;
  if (name == "msp") return ScoreMethod::kMsp;
  if (name == "mahalanobis") return ScoreMethod::kMahalanobis;
  throw DomainError("unknown score method '" + std::string(name) + "'");
}

ScoreVector score_pipeline(const ScoringContext& ctx, const FeatureSet& features) {
  const std::size_t n = features.samples();
  ScoreVector scores(n);

  if (ctx.method == ScoreMethod::kMahalanobis) {
    if (!ctx.stats) throw DataError("mahalanobis scoring requires fitted class statistics");
    parallel_for(n, [&](std::size_t s) {
      const auto row = features.X.row(s);
      if (ctx.react) {
        const auto clipped = react_clip(row, *ctx.react);
        scores[s] = mahalanobis_score(*ctx.stats, clipped);
      } else {
        scores[s] = mahalanobis_score(*ctx.stats, row);
      }
    });
    return scores;
  }

  if (!ctx.layer) throw DataError("logit-based scoring requires a final layer");
  const MatrixD logits = ctx.react ? batch_logits(*ctx.layer, ctx.mask, react_clip(features, *ctx.react).X)
                                   : batch_logits(*ctx.layer, ctx.mask, features.X);
  const bool energy = ctx.method == ScoreMethod::kEnergy;
  parallel_for(n, [&](std::size_t s) {
    scores[s] = energy ? energy_score(logits.row(s)) : msp_score(logits.row(s));
  });
  return scores;
}

}  // namespace dice
