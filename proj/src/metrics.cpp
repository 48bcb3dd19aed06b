#include "dice/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace dice {

namespace {

void require_nonempty(std::span<const double> id, std::span<const double> ood, const char* who) {
  if (id.empty() || ood.empty()) throw DataError(std::string(who) + ": empty score vector");
}

double mean_max_logit(const MatrixD& logits) {
  double sum = 0.0;
  for (std::size_t s = 0; s < logits.rows(); ++s) {
    const auto row = logits.row(s);
    sum += *std::max_element(row.begin(), row.end());
  }
  return sum / static_cast<double>(logits.rows());
}

}  // namespace

FprAtTpr fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                    double tpr_target) {
  require_nonempty(id_scores, ood_scores, "fpr_at_tpr");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw DomainError("tpr target must lie in (0, 1]");
  const std::size_t n = id_scores.size();
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  auto needed = static_cast<std::size_t>(std::ceil(tpr_target * static_cast<double>(n)));
  needed = std::clamp<std::size_t>(needed, 1, n);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(needed - 1),
                   sorted.end(), std::greater<>());
  const double lambda = sorted[needed - 1];
  const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(),
                                      [lambda](double s) { return s >= lambda; });
  return {static_cast<double>(accepted) / static_cast<double>(ood_scores.size()), lambda};
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores, "auroc");
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  // Twice the Mann-Whitney numerator stays an exact integer.
  std::uint64_t twice = 0;
  for (double s : id_scores) {
    const auto lo = std::lower_bound(ood.begin(), ood.end(), s);
    const auto hi = std::upper_bound(lo, ood.end(), s);
    twice += 2 * static_cast<std::uint64_t>(lo - ood.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(id_scores.size()) * static_cast<double>(ood.size());
  return 0.5 * static_cast<double>(twice) / pairs;
}

DetectionResult detect(std::span<const double> id_scores, std::span<const double> ood_scores) {
  const FprAtTpr f = fpr_at_tpr(id_scores, ood_scores, 0.95);
  return {f.fpr, auroc(id_scores, ood_scores), f.lambda, id_scores.size(), ood_scores.size()};
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw DataError("mean of an empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  const double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

DistributionStats distribution_stats(const MatrixD& id_logits, const MatrixD& ood_logits,
                                     std::span<const double> id_scores,
                                     std::span<const double> ood_scores) {
  if (id_logits.rows() == 0 || ood_logits.rows() == 0) {
    throw DataError("distribution_stats: empty feature set");
  }
  DistributionStats out;
  out.mean_id_maxlogit = mean_max_logit(id_logits);
  out.mean_ood_maxlogit = mean_max_logit(ood_logits);
  out.delta = out.mean_id_maxlogit - out.mean_ood_maxlogit;
  const double id_mean = mean(id_scores);
  if (id_mean == 0.0) {
    throw NumericalError("distribution_stats: mean ID score is zero, normalization undefined");
  }
  out.ood_score_std_normalized = population_std(ood_scores) / id_mean;
  return out;
}

DistributionStats distribution_stats(const FinalLayer& layer, const Mask* mask,
                                     const FeatureSet& id_features, const FeatureSet& ood_features,
                                     ScoreMethod method) {
  if (method == ScoreMethod::kMahalanobis) {
    throw DomainError("distribution_stats needs a logit-based score (energy or msp)");
  }
  const MatrixD id_logits = batch_logits(layer, mask, id_features.X);
  const MatrixD ood_logits = batch_logits(layer, mask, ood_features.X);
  ScoringContext ctx;
  ctx.layer = &layer;
  ctx.mask = mask;
  ctx.method = method;
  const ScoreVector id_scores = score_pipeline(ctx, id_features);
  const ScoreVector ood_scores = score_pipeline(ctx, ood_features);
  return distribution_stats(id_logits, ood_logits, id_scores, ood_scores);
}

}  // namespace dice
