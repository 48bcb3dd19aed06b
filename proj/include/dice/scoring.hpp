#ifndef DICE_SCORING_HPP_
#define DICE_SCORING_HPP_

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dice/dice_core.hpp"
#include "dice/tensor.hpp"

namespace dice {

/// One score per sample; higher means more in-distribution.
using ScoreVector = std::vector<double>;

/// Negative energy: log-sum-exp of the logits.
double energy_score(std::span<const double> logits);

/// Maximum softmax probability.
double msp_score(std::span<const double> logits);

/// Class means and a shared (tied) covariance in Cholesky form.
struct GaussianClassStats {
  std::vector<std::vector<double>> means;  // C vectors of length m
  MatrixD precision;                        // Σ⁻¹, symmetric
  MatrixD cholesky;                         // lower L with Σ = L Lᵀ

  std::size_t dim() const noexcept { return precision.rows(); }
};

inline constexpr double kDefaultShrinkage = 1e-6;

/// Class means plus the pooled within-class covariance (divide by n),
/// shrunk toward (trace/m)·I by `shrinkage`.
GaussianClassStats fit_mahalanobis(const FeatureSet& train, std::size_t num_classes,
                                   double shrinkage = kDefaultShrinkage);

/// max_c −(h−μ_c)ᵀ Σ⁻¹ (h−μ_c). Never positive.
double mahalanobis_score(const GaussianClassStats& stats, std::span<const float> h);

struct ReactThreshold {
  float c = std::numeric_limits<float>::infinity();
  double percentile_used = 100.0;

  static ReactThreshold disabled() { return {}; }
  bool enabled() const noexcept { return c != std::numeric_limits<float>::infinity(); }
};

inline constexpr double kDefaultReactPercentile = 90.0;

/// Nearest-rank percentile over every activation value in the set.
ReactThreshold react_fit(const FeatureSet& calibration, double percentile);

std::vector<float> react_clip(std::span<const float> h, const ReactThreshold& t);
FeatureSet react_clip(const FeatureSet& features, const ReactThreshold& t);

enum class ScoreMethod { kEnergy, kMsp, kMahalanobis };

std::string_view to_string(ScoreMethod method);
/// Accepts `energy`, `msp`, `mahalanobis`; anything else is a DomainError.
ScoreMethod parse_score_method(std::string_view name);

/// Scores every sample: clip (optional) → masked or dense logits → score.
/// Mahalanobis works on the (optionally clipped) features and needs `stats`.
struct ScoringContext {
  const FinalLayer* layer = nullptr;
  const Mask* mask = nullptr;
  const ReactThreshold* react = nullptr;
  const GaussianClassStats* stats = nullptr;
  ScoreMethod method = ScoreMethod::kEnergy;
};

ScoreVector score_pipeline(const ScoringContext& ctx, const FeatureSet& features);

}  // namespace dice

#endif  // DICE_SCORING_HPP_
