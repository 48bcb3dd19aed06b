#include <doctest.h>

#include <random>

#include "dice/metrics.hpp"
#include "test_util.hpp"

using namespace dice;

namespace {

using V = std::vector<double>;

double pair_auroc(const V& id, const V& ood) {
  double credit = 0.0;
  for (double a : id)
    for (double b : ood) credit += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return credit / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

}  // namespace

TEST_CASE("fpr_at_tpr examples") {
  const FprAtTpr r = fpr_at_tpr(V{5, 4, 3, 2, 1}, V{0, 2});
  CHECK(r.lambda == 1.0);
  CHECK(r.fpr == 0.5);
  CHECK(fpr_at_tpr(V{5, 4, 3}, V{-1, 0, 0.5}).fpr == 0.0);
  CHECK_THROWS_AS(fpr_at_tpr(V{}, V{1}), DataError);
  CHECK_THROWS_AS(fpr_at_tpr(V{1}, V{}), DataError);
  CHECK_THROWS_AS(fpr_at_tpr(V{1}, V{1}, 0.0), DomainError);
}

TEST_CASE("fpr_at_tpr on identical multisets is at least the target") {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> level(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    V s(1 + trial % 60);
    for (double& x : s) x = level(rng);
    CHECK(fpr_at_tpr(s, s).fpr >= 0.95);
  }
}

TEST_CASE("auroc examples") {
  CHECK(auroc(V{3, 1}, V{2, 0}) == 0.75);
  CHECK(auroc(V{10, 11}, V{1, 2, 3}) == 1.0);
  CHECK(auroc(V{1, 2, 2, 5}, V{2, 5, 1, 2}) == 0.5);
  CHECK_THROWS_AS(auroc(V{}, V{1}), DataError);
}

TEST_CASE("auroc matches the pair count and is antisymmetric") {
  std::mt19937_64 rng(67);
  std::uniform_int_distribution<int> level(-5, 5);
  std::uniform_int_distribution<std::size_t> len(1, 80);
  for (int trial = 0; trial < 300; ++trial) {
    V a(len(rng)), b(len(rng));
    for (double& x : a) x = level(rng) * 0.5;
    for (double& x : b) x = level(rng) * 0.5;
    CHECK(auroc(a, b) == pair_auroc(a, b));
    CHECK(auroc(a, b) + auroc(b, a) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("detect bundles both metrics") {
  const DetectionResult d = detect(V{5, 4, 3, 2, 1}, V{0, 2});
  CHECK(d.fpr95 == 0.5);
  CHECK(d.auroc == pair_auroc(V{5, 4, 3, 2, 1}, V{0, 2}));
  CHECK(d.threshold_lambda == 1.0);
  CHECK(d.n_id == 5);
  CHECK(d.n_ood == 2);
}

TEST_CASE("mean and population_std") {
  CHECK(mean(V{1, 2, 3, 4}) == 2.5);
  CHECK(population_std(V{2, 4, 4, 4, 5, 5, 7, 9}) == 2.0);
  CHECK_THROWS_AS(mean(V{}), DataError);
}

TEST_CASE("distribution_stats degenerate cases") {
  SUBCASE("constant logits") {
    const MatrixD id(4, 3, 2.0), ood(5, 3, -1.0);
    const DistributionStats s = distribution_stats(id, ood, V(4, 3.0), V(5, 0.5));
    CHECK(s.delta == 3.0);
    CHECK(s.ood_score_std_normalized == 0.0);
  }
  SUBCASE("identical sets") {
    std::mt19937_64 rng(71);
    const FinalLayer layer(test::random_tensor(rng, 5, 3), {1.0f, 2.0f, 3.0f});
    const FeatureSet f(test::random_tensor(rng, 12, 5, 0.0f, 1.0f));
    const DistributionStats s = distribution_stats(layer, nullptr, f, f, ScoreMethod::kEnergy);
    CHECK(s.delta == 0.0);
    CHECK_THROWS_AS(distribution_stats(layer, nullptr, f, f, ScoreMethod::kMahalanobis), DomainError);
  }
  SUBCASE("zero mean ID score") {
    const MatrixD id(2, 2, 0.0), ood(2, 2, 0.0);
    CHECK_THROWS_AS(distribution_stats(id, ood, V{-1, 1}, V{0, 1}), NumericalError);
  }
}
