#include "dice/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dice/parallel.hpp"
#include "dice/random.hpp"

namespace dice::analysis {

namespace {

double population_variance(std::span<const double> xs) {
  double mu = 0.0;
  for (double x : xs) mu += x;
  mu /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return acc / static_cast<double>(xs.size());
}

}  // namespace

MatrixD unit_contributions(const FinalLayer& layer, const FeatureSet& features, std::size_t cls) {
  if (cls >= layer.classes()) {
    throw DomainError("class " + std::to_string(cls) + " out of range for " +
                      std::to_string(layer.classes()) + " classes");
  }
  const std::size_t m = layer.units();
  if (features.dim() != m) throw ShapeError("feature width does not match the final layer");
  MatrixD out(features.samples(), m);
  for (std::size_t s = 0; s < features.samples(); ++s) {
    const auto h = features.X.row(s);
    for (std::size_t i = 0; i < m; ++i) out(s, i) = static_cast<double>(layer.W(i, cls)) * h[i];
  }
  return out;
}

std::vector<std::size_t> ascending_order(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return idx;
}

ContributionProfile contribution_profile(const FinalLayer& layer, const FeatureSet& features,
                                         std::size_t cls) {
  const MatrixD contribs = unit_contributions(layer, features, cls);
  const std::size_t n = contribs.rows();
  const std::size_t m = contribs.cols();
  ContributionProfile out;
  out.mean.assign(m, 0.0);
  out.var.assign(m, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < m; ++i) out.mean[i] += contribs(s, i);
  }
  for (double& v : out.mean) v /= static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < m; ++i) {
      const double d = contribs(s, i) - out.mean[i];
      out.var[i] += d * d;
    }
  }
  for (double& v : out.var) v /= static_cast<double>(n);
  out.order = ascending_order(out.mean);
  return out;
}

MatrixD covariance_matrix(const MatrixD& contribs) {
  const std::size_t n = contribs.rows();
  const std::size_t m = contribs.cols();
  if (n < 2) throw DataError("covariance needs at least two samples");
  std::vector<double> mu(m, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < m; ++i) mu[i] += contribs(s, i);
  }
  for (double& v : mu) v /= static_cast<double>(n);

  MatrixD cov(m, m, 0.0);
  std::vector<double> d(m);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < m; ++i) d[i] = contribs(s, i) - mu[i];
    for (std::size_t i = 0; i < m; ++i) {
      auto row = cov.row(i);
      for (std::size_t j = i; j < m; ++j) row[j] += d[i] * d[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      cov(i, j) /= static_cast<double>(n);
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

VarianceReport variance_decomposition(const MatrixD& contribs,
                                      std::span<const std::size_t> kept_units) {
  const std::size_t n = contribs.rows();
  const std::size_t m = contribs.cols();
  if (n < 2) throw DataError("variance decomposition needs at least two samples");
  std::vector<bool> kept(m, false);
  for (std::size_t u : kept_units) {
    if (u >= m) throw DomainError("kept unit " + std::to_string(u) + " out of range");
    kept[u] = true;
  }

  std::vector<double> full(n, 0.0);
  std::vector<double> sparse(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < m; ++i) {
      full[s] += contribs(s, i);
      if (kept[i]) sparse[s] += contribs(s, i);
    }
  }

  const MatrixD cov = covariance_matrix(contribs);
  VarianceReport r;
  r.var_full = population_variance(full);
  r.var_dice = population_variance(sparse);
  double diag_full = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    diag_full += cov(i, i);
    if (!kept[i]) r.sum_sigma_pruned += cov(i, i);
    for (std::size_t j = i + 1; j < m; ++j) {
      r.cov_term_full += 2.0 * cov(i, j);
      if (kept[i] && kept[j]) r.cov_term_kept += 2.0 * cov(i, j);
    }
  }
  r.identity_residual = std::fabs(r.var_full - (diag_full + r.cov_term_full));
  r.reduction_residual = std::fabs((r.var_full - r.var_dice) -
                                   (r.sum_sigma_pruned + r.cov_term_full - r.cov_term_kept));
  return r;
}

ReductionCheckResult variance_reduction_check(const ReductionCheckConfig& cfg) {
  if (cfg.samples < 1000) throw DomainError("reduction check needs at least 1000 samples");
  if (cfg.batches < 2) throw DomainError("reduction check needs at least two batches");
  if (cfg.pruned > cfg.units) throw DomainError("cannot prune more units than exist");
  if (cfg.sigma.size() != cfg.units) throw DomainError("sigma must have one entry per unit");
  if (!cfg.mu.empty() && cfg.mu.size() != cfg.units) {
    throw DomainError("mu must be empty or have one entry per unit");
  }
  const std::size_t per_batch = cfg.samples / cfg.batches;
  const std::size_t total = per_batch * cfg.batches;

  std::vector<double> full(total);
  std::vector<double> kept(total);
  parallel_for(
      cfg.batches,
      [&](std::size_t b) {
        Rng rng(mix_seed(cfg.seed, b));
        for (std::size_t s = b * per_batch; s < (b + 1) * per_batch; ++s) {
          double f = 0.0;
          double k = 0.0;
          for (std::size_t i = 0; i < cfg.units; ++i) {
            const double mu = cfg.mu.empty() ? 0.0 : cfg.mu[i];
            const double v = rng.normal(mu, cfg.sigma[i]);
            f += v;
            if (i >= cfg.pruned) k += v;
          }
          full[s] = f;
          kept[s] = k;
        }
      },
      1);

  ReductionCheckResult r;
  for (std::size_t i = 0; i < cfg.pruned; ++i) r.predicted_reduction += cfg.sigma[i] * cfg.sigma[i];
  const double var_full = population_variance(full);
  r.empirical_reduction = var_full - population_variance(kept);

  std::vector<double> batch_reduction(cfg.batches);
  for (std::size_t b = 0; b < cfg.batches; ++b) {
    const std::span<const double> fb(full.data() + b * per_batch, per_batch);
    const std::span<const double> kb(kept.data() + b * per_batch, per_batch);
    batch_reduction[b] = population_variance(fb) - population_variance(kb);
  }
  double bm = 0.0;
  for (double v : batch_reduction) bm += v;
  bm /= static_cast<double>(cfg.batches);
  double ss = 0.0;
  for (double v : batch_reduction) ss += (v - bm) * (v - bm);
  // Spread of batch estimates around their mean, scaled to the full sample.
  r.standard_error = std::sqrt(ss / static_cast<double>(cfg.batches - 1)) /
                     std::sqrt(static_cast<double>(cfg.batches));
  // Floor for the degenerate no-variance cases, where the SE collapses to
  // rounding noise.
  r.tolerance = std::max(3.0 * r.standard_error, 1e-9 * std::max(1.0, var_full));
  r.pass = std::fabs(r.empirical_reduction - r.predicted_reduction) <= r.tolerance;
  return r;
}

}  // namespace dice::analysis
