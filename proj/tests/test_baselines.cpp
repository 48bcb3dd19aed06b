#include <doctest.h>

#include <cmath>
#include <random>

#include "dice/baselines.hpp"
#include "test_util.hpp"

using namespace dice;

namespace {

Mask mask_for(SparsifierKind kind, double p, const Tensor2D& V, const Tensor2D& W, std::uint64_t seed = 0) {
  const FinalLayer layer(W, std::vector<float>(W.cols(), 0.0f));
  return make_mask(SparsifierSpec{kind, p, seed}, ContributionMatrix{V}, layer);
}

const SparsifierKind kAll[] = {
    SparsifierKind::kDiceTopK,      SparsifierKind::kBottomK,       SparsifierKind::kTopPlusBottomK,
    SparsifierKind::kRandomK,       SparsifierKind::kWeightDropout, SparsifierKind::kUnitDropout,
    SparsifierKind::kWeightPruneL1, SparsifierKind::kUnitPruneL2,   SparsifierKind::kNone,
};

}  // namespace

TEST_CASE("bottomk on the 2x2 example") {
  const Tensor2D V = Tensor2D::from_rows({{4.0f, 1.0f}, {3.0f, 2.0f}});
  CHECK(mask_for(SparsifierKind::kBottomK, 0.5, V, V).M == Tensor2D::from_rows({{0.f, 1.f}, {0.f, 1.f}}));
}

TEST_CASE("topbottomk splits k between both ends") {
  const Tensor2D V = Tensor2D::from_rows({{4.0f, 1.0f}, {3.0f, 2.0f}, {0.0f, 5.0f}});
  // k = 3: two from the top (5, 4), one from the bottom (0).
  const Mask m = mask_for(SparsifierKind::kTopPlusBottomK, 0.5, V, V);
  CHECK(m.M == Tensor2D::from_rows({{1.f, 0.f}, {0.f, 0.f}, {1.f, 1.f}}));
  // Constant V is all ties; the count must still be exact.
  const Tensor2D flat(4, 3, 1.0f);
  for (double p : {0.0, 0.25, 0.5, 0.9}) {
    CHECK(mask_for(SparsifierKind::kTopPlusBottomK, p, flat, flat).popcount() == p_to_k(p, 4, 3));
  }
}

TEST_CASE("wprune keeps the largest magnitudes") {
  const Tensor2D W = Tensor2D::from_rows({{3.0f, -4.0f}, {1.0f, 0.5f}});
  CHECK(mask_for(SparsifierKind::kWeightPruneL1, 0.5, W, W).M == Tensor2D::from_rows({{1.f, 1.f}, {0.f, 0.f}}));
}

TEST_CASE("uprune drops whole weak units") {
  const Tensor2D W = Tensor2D::from_rows({{3.0f, 0.0f}, {0.0f, 1.0f}});
  CHECK(mask_for(SparsifierKind::kUnitPruneL2, 0.5, W, W).M == Tensor2D::from_rows({{1.f, 1.f}, {0.f, 0.f}}));
}

TEST_CASE("dropout endpoints") {
  std::mt19937_64 rng(51);
  const Tensor2D W = test::random_tensor(rng, 8, 3);
  for (SparsifierKind kind : {SparsifierKind::kWeightDropout, SparsifierKind::kUnitDropout}) {
    CHECK(mask_for(kind, 0.0, W, W, 9).M == Tensor2D(8, 3, 1.0f));
    CHECK(mask_for(kind, 1.0, W, W, 9).M == Tensor2D(8, 3, 0.0f));
  }
}

TEST_CASE("dropout keep rate follows 1 - p") {
  std::mt19937_64 rng(53);
  const Tensor2D W = test::random_tensor(rng, 200, 50);
  const double p = 0.3;
  const double kept = static_cast<double>(mask_for(SparsifierKind::kWeightDropout, p, W, W, 77).popcount());
  const double n = 200.0 * 50.0;
  const double se = std::sqrt(n * p * (1 - p));
  CHECK(std::abs(kept - n * (1 - p)) < 4 * se);

  const Mask units = mask_for(SparsifierKind::kUnitDropout, p, W, W, 77);
  for (std::size_t i = 0; i < 200; ++i) {
    const float first = units.M(i, 0);
    for (float v : units.M.row(i)) CHECK(v == first);
  }
}

TEST_CASE("cardinality and determinism for every kind") {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 3 + trial % 9, c = 2 + trial % 4;
    const Tensor2D V = test::random_tensor(rng, m, c);
    const Tensor2D W = test::random_tensor(rng, m, c);
    for (double p : {0.0, 0.1, 0.5, 0.77, 1.0}) {
      const std::size_t k = p_to_k(p, m, c);
      for (SparsifierKind kind : kAll) {
        const Mask a = mask_for(kind, p, V, W, 1000 + trial);
        const Mask b = mask_for(kind, p, V, W, 1000 + trial);
        CHECK(a.M == b.M);
        for (float v : a.M.flat()) CHECK((v == 0.0f || v == 1.0f));
        switch (kind) {
          case SparsifierKind::kUnitPruneL2:
            CHECK(a.popcount() <= k);
            CHECK(a.popcount() + c > k);
            break;
          case SparsifierKind::kWeightDropout:
          case SparsifierKind::kUnitDropout:
            break;
          case SparsifierKind::kNone:
            CHECK(a.popcount() == m * c);
            break;
          default:
            CHECK(a.popcount() == k);
        }
      }
    }
  }
}

TEST_CASE("randomk depends on the seed") {
  std::mt19937_64 rng(59);
  const Tensor2D W = test::random_tensor(rng, 30, 10);
  CHECK(mask_for(SparsifierKind::kRandomK, 0.5, W, W, 1).M != mask_for(SparsifierKind::kRandomK, 0.5, W, W, 2).M);
}

TEST_CASE("names round-trip and classify") {
  for (SparsifierKind kind : kAll) CHECK(parse_sparsifier(cli_name(kind)) == kind);
  CHECK_THROWS_AS(parse_sparsifier("magic"), DomainError);
  CHECK(is_stochastic(SparsifierKind::kRandomK));
  CHECK_FALSE(is_stochastic(SparsifierKind::kDiceTopK));
  CHECK(uses_contribution(SparsifierKind::kDiceTopK));
  CHECK_FALSE(uses_contribution(SparsifierKind::kWeightPruneL1));
}

TEST_CASE("invalid p and shape") {
  const Tensor2D W(3, 2, 1.0f);
  CHECK_THROWS_AS(mask_for(SparsifierKind::kDiceTopK, 1.5, W, W), DomainError);
  CHECK_THROWS_AS(mask_for(SparsifierKind::kDiceTopK, 0.5, Tensor2D(2, 2), W), ShapeError);
}
