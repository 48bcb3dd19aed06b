#ifndef DICE_METRICS_HPP_
#define DICE_METRICS_HPP_

#include <cstddef>
#include <span>

#include "dice/dice_core.hpp"
#include "dice/scoring.hpp"

namespace dice {

struct DetectionResult {
  double fpr95 = 0.0;
  double auroc = 0.0;
  double threshold_lambda = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

struct FprAtTpr {
  double fpr = 0.0;
  double lambda = 0.0;
};

/// Nearest-rank threshold: λ is the ceil(tpr·n_id)-th largest ID score, and
/// FPR is the fraction of OOD scores >= λ. Ties at λ count as accepted.
FprAtTpr fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                    double tpr_target = 0.95);

/// Mann-Whitney AUROC with half credit for ties.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

DetectionResult detect(std::span<const double> id_scores, std::span<const double> ood_scores);

struct DistributionStats {
  double mean_id_maxlogit = 0.0;
  double mean_ood_maxlogit = 0.0;
  double delta = 0.0;
  double ood_score_std_normalized = 0.0;
};

/// Population mean and standard deviation.
double mean(std::span<const double> xs);
double population_std(std::span<const double> xs);

/// Mean max-logit gap under the (optionally masked) layer, and the OOD score
/// spread normalized by the mean ID score.
DistributionStats distribution_stats(const FinalLayer& layer, const Mask* mask,
                                     const FeatureSet& id_features, const FeatureSet& ood_features,
                                     ScoreMethod method);

/// Same statistics from precomputed logits and scores.
DistributionStats distribution_stats(const MatrixD& id_logits, const MatrixD& ood_logits,
                                     std::span<const double> id_scores,
                                     std::span<const double> ood_scores);

}  // namespace dice

#endif  // DICE_METRICS_HPP_
