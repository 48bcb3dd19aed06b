#ifndef DICE_DICE_CORE_HPP_
#define DICE_DICE_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dice/tensor.hpp"

namespace dice {

/// V[i][c]: mean contribution weight*activation of unit i to class c.
struct ContributionMatrix {
  Tensor2D V;
};

/// m×C matrix of 0/1 entries selecting the weights kept by a sparsifier.
struct Mask {
  Tensor2D M;

  static Mask ones(std::size_t m, std::size_t c) { return {Tensor2D(m, c, 1.0f)}; }
  static Mask zeros(std::size_t m, std::size_t c) { return {Tensor2D(m, c, 0.0f)}; }

  std::size_t popcount() const;
  /// True iff every 1-entry of *this is also 1 in `other`.
  bool subset_of(const Mask& other) const;
};

/// V = W ⊙ mean_x h(x), one column per class. Bias is not involved.
ContributionMatrix compute_contribution(const Tensor2D& W, const FeatureSet& estimation_set);
ContributionMatrix compute_contribution(const FinalLayer& layer, const FeatureSet& estimation_set);

/// Draws `count` rows without replacement (seeded, order preserved) for
/// contribution estimation on large training sets. count >= n returns the set.
FeatureSet subsample(const FeatureSet& set, std::size_t count, std::uint64_t seed);

/// Number of kept weights for sparsity p: round-half-up of (1-p)*m*C.
std::size_t p_to_k(double p, std::size_t m, std::size_t c);

/// Global top-k over all m*C entries of V. Ties go to the smaller row-major
/// flat index, so masks for increasing k are nested.
Mask build_mask(const ContributionMatrix& V, std::size_t k);

/// Flat indices of all entries of `values` ordered by (value desc, index asc).
std::vector<std::size_t> rank_descending(std::span<const float> values);

/// Copy of the layer with W replaced by W ⊙ M.
FinalLayer apply_mask(const FinalLayer& layer, const Mask& mask);

/// f = Wᵀh + b. Each logit accumulates W[i][c]*h[i] over i = 0..m-1 in a
/// double, left to right, then adds b[c].
std::vector<double> dense_forward(const FinalLayer& layer, std::span<const float> h);

/// f = (M ⊙ W)ᵀh + b through the same kernel as dense_forward, so an
/// all-ones mask reproduces the dense logits bitwise.
std::vector<double> dice_forward(const FinalLayer& layer, const Mask& mask, std::span<const float> h);

/// Row-wise logits for every sample; `mask` may be null for the dense layer.
MatrixD batch_logits(const FinalLayer& layer, const Mask* mask, const Tensor2D& X);

}  // namespace dice

#endif  // DICE_DICE_CORE_HPP_
