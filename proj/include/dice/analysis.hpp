#ifndef DICE_ANALYSIS_HPP_
#define DICE_ANALYSIS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dice/tensor.hpp"

namespace dice::analysis {

// All moments here use population normalization (divide by n); the variance
// identities below are exact only when mean, variance and covariance agree
// on it.

/// entry(x, i) = W[i][c] * h_i(x) for one class c.
MatrixD unit_contributions(const FinalLayer& layer, const FeatureSet& features, std::size_t cls);

struct ContributionProfile {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<std::size_t> order;  // units sorted ascending by mean contribution
};

/// Per-unit mean/variance of W[i][c]*h_i(x). `order` ranks units by the mean
/// of this set; when profiling OOD data, reuse the ID profile's order.
ContributionProfile contribution_profile(const FinalLayer& layer, const FeatureSet& features,
                                         std::size_t cls);

/// Stable ascending argsort (ties keep the smaller unit index first).
std::vector<std::size_t> ascending_order(std::span<const double> values);

struct VarianceReport {
  double var_full = 0.0;
  double var_dice = 0.0;
  double sum_sigma_pruned = 0.0;
  double cov_term_full = 0.0;  // 2 Σ_{i<j} Cov over all units
  double cov_term_kept = 0.0;  // 2 Σ_{i<j} Cov over kept units
  double identity_residual = 0.0;
  double reduction_residual = 0.0;
};

/// Population covariance of the columns, symmetric by construction.
MatrixD covariance_matrix(const MatrixD& contribs);

/// Variance of the full row sums versus the kept-unit row sums, together with
/// the covariance decomposition of each.
VarianceReport variance_decomposition(const MatrixD& contribs, std::span<const std::size_t> kept_units);

struct ReductionCheckConfig {
  std::size_t units = 10;
  std::size_t pruned = 4;             // the first `pruned` units are dropped
  std::vector<double> sigma;          // per-unit standard deviation, length `units`
  std::vector<double> mu;             // optional per-unit mean (default 0)
  std::uint64_t seed = 0;
  std::size_t samples = 100'000;
  std::size_t batches = 10;
};

struct ReductionCheckResult {
  double empirical_reduction = 0.0;
  double predicted_reduction = 0.0;
  double standard_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Draws independent Gaussian units, prunes the first t, and compares the
/// empirical variance reduction to the sum of the pruned variances. The
/// standard error comes from `batches` equal batches, each with its own
/// seeded stream.
ReductionCheckResult variance_reduction_check(const ReductionCheckConfig& cfg);

}  // namespace dice::analysis

#endif  // DICE_ANALYSIS_HPP_
