#ifndef DICE_BASELINES_HPP_
#define DICE_BASELINES_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "dice/dice_core.hpp"

namespace dice {

/// Post-hoc sparsifiers compared against directed top-k selection.
enum class SparsifierKind {
  kDiceTopK,
  kBottomK,
  kTopPlusBottomK,
  kRandomK,
  kWeightDropout,
  kUnitDropout,
  kWeightPruneL1,
  kUnitPruneL2,
  kNone,
};

struct SparsifierSpec {
  SparsifierKind kind = SparsifierKind::kDiceTopK;
  double p = 0.0;
  std::uint64_t seed = 0;
};

/// CLI names: dice, bottomk, topbottomk, randomk, wprune, uprune, wdrop, udrop, none.
std::string_view cli_name(SparsifierKind kind);
SparsifierKind parse_sparsifier(std::string_view name);

bool is_stochastic(SparsifierKind kind);
/// Whether the mask depends on the contribution matrix at all.
bool uses_contribution(SparsifierKind kind);

/// Builds the mask for `spec`. k = p_to_k(spec.p, m, C).
///
/// Exact-cardinality kinds (dice, bottomk, topbottomk, randomk, wprune) keep
/// exactly k weights. uprune keeps whole rows and may undershoot by up to C-1;
/// the dropout kinds keep each unit or weight with probability 1-p.
/// Stochastic kinds draw from Rng(spec.seed), one mask per call.
Mask make_mask(const SparsifierSpec& spec, const ContributionMatrix& V, const FinalLayer& layer);

}  // namespace dice

#endif  // DICE_BASELINES_HPP_
