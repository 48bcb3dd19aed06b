#include "dice/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dice/random.hpp"

namespace dice {

namespace {

struct NamedKind {
  SparsifierKind kind;
  std::string_view name;
};

constexpr NamedKind kNames[] = {
    {SparsifierKind::kDiceTopK, "dice"},        {SparsifierKind::kBottomK, "bottomk"},
    {SparsifierKind::kTopPlusBottomK, "topbottomk"}, {SparsifierKind::kRandomK, "randomk"},
    {SparsifierKind::kWeightPruneL1, "wprune"}, {SparsifierKind::kUnitPruneL2, "uprune"},
    {SparsifierKind::kWeightDropout, "wdrop"},  {SparsifierKind::kUnitDropout, "udrop"},
    {SparsifierKind::kNone, "none"},
};

// Ascending order with the same flat-index tie-break as rank_descending.
std::vector<std::size_t> rank_ascending(std::span<const float> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  return idx;
}

void set_first(Mask& mask, const std::vector<std::size_t>& order, std::size_t count) {
  for (std::size_t r = 0; r < count; ++r) mask.M.flat()[order[r]] = 1.0f;
}

}  // namespace

std::string_view cli_name(SparsifierKind kind) {
  for (const auto& entry : kNames) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

SparsifierKind parse_sparsifier(std::string_view name) {
  for (const auto& entry : kNames) {
    if (entry.name == name) return entry.kind;
  }
  throw DomainError("unknown sparsification method '" + std::string(name) + "'");
}

bool is_stochastic(SparsifierKind kind) {
  return kind == SparsifierKind::kRandomK || kind == SparsifierKind::kWeightDropout ||
         kind == SparsifierKind::kUnitDropout;
}

bool uses_contribution(SparsifierKind kind) {
  return kind == SparsifierKind::kDiceTopK || kind == SparsifierKind::kBottomK ||
         kind == SparsifierKind::kTopPlusBottomK;
}

Mask make_mask(const SparsifierSpec& spec, const ContributionMatrix& V, const FinalLayer& layer) {
  const std::size_t m = layer.units();
  const std::size_t c = layer.classes();
  if (V.V.rows() != m || V.V.cols() != c) {
    throw ShapeError("contribution matrix shape does not match the final layer");
  }
  const std::size_t k = p_to_k(spec.p, m, c);
  const std::size_t total = m * c;
  Mask mask = Mask::zeros(m, c);

  switch (spec.kind) {
    case SparsifierKind::kDiceTopK:
      return build_mask(V, k);

    case SparsifierKind::kBottomK:
      set_first(mask, rank_ascending(V.V.flat()), k);
      return mask;

    case SparsifierKind::kTopPlusBottomK: {
      // Both halves come from one ranking so ties can never select an entry twice.
      const std::size_t top = (k + 1) / 2;
      const auto order = rank_descending(V.V.flat());
      set_first(mask, order, top);
      for (std::size_t r = 0; r < k - top; ++r) mask.M.flat()[order[total - 1 - r]] = 1.0f;
      return mask;
    }

    case SparsifierKind::kRandomK: {
      std::vector<std::size_t> idx(total);
      std::iota(idx.begin(), idx.end(), 0);
      Rng rng(spec.seed);
      for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(total - i)]);
      set_first(mask, idx, k);
      return mask;
    }

    case SparsifierKind::kWeightPruneL1: {
      std::vector<float> magnitude(total);
      std::transform(layer.W.flat().begin(), layer.W.flat().end(), magnitude.begin(),
                     [](float w) { return std::fabs(w); });
      set_first(mask, rank_descending(magnitude), k);
      return mask;
    }

    case SparsifierKind::kUnitPruneL2: {
      // Dropping the weakest rows until <= k weights remain and then restoring
      // whole rows in rank order while staying <= k keeps the floor(k/C)
      // strongest units.
      std::vector<float> norms(m);
      for (std::size_t i = 0; i < m; ++i) {
        double sq = 0.0;
        for (float w : layer.W.row(i)) sq += static_cast<double>(w) * w;
        norms[i] = static_cast<float>(std::sqrt(sq));
      }
      const auto order = rank_descending(norms);
      const std::size_t units_kept = k / c;
      for (std::size_t r = 0; r < units_kept; ++r) {
        for (float& v : mask.M.row(order[r])) v = 1.0f;
      }
      return mask;
    }

    case SparsifierKind::kUnitDropout: {
      Rng rng(spec.seed);
      const double keep = 1.0 - spec.p;
      for (std::size_t i = 0; i < m; ++i) {
        if (rng.uniform() < keep) {
          for (float& v : mask.M.row(i)) v = 1.0f;
        }
      }
      return mask;
    }

    case SparsifierKind::kWeightDropout: {
      Rng rng(spec.seed);
      const double keep = 1.0 - spec.p;
      for (float& v : mask.M.flat()) v = rng.uniform() < keep ? 1.0f : 0.0f;
      return mask;
    }

    case SparsifierKind::kNone:
      return Mask::ones(m, c);
  }
  throw DomainError("unhandled sparsifier kind");
}

}  // namespace dice
