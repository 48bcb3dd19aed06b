#include "dice/dice_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dice/parallel.hpp"
#include "dice/random.hpp"

namespace dice {

namespace {

void check_mask_shape(const FinalLayer& layer, const Mask& mask) {
  if (mask.M.rows() != layer.W.rows() || mask.M.cols() != layer.W.cols()) {
    throw ShapeError("mask shape " + std::to_string(mask.M.rows()) + "x" +
                     std::to_string(mask.M.cols()) + " != weight shape " +
                     std::to_string(layer.W.rows()) + "x" + std::to_string(layer.W.cols()));
  }
}

void forward_kernel(const Tensor2D& W, const std::vector<float>& b, std::span<const float> h,
                    std::span<double> out) {
  const std::size_t m = W.rows();
  const std::size_t c = W.cols();
  for (std::size_t j = 0; j < c; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double hi = h[i];
    const auto w = W.row(i);
    for (std::size_t j = 0; j < c; ++j) out[j] += static_cast<double>(w[j]) * hi;
  }
  for (std::size_t j = 0; j < c; ++j) out[j] += static_cast<double>(b[j]);
}

}  // namespace

std::size_t Mask::popcount() const {
  return static_cast<std::size_t>(std::count(M.flat().begin(), M.flat().end(), 1.0f));
}

bool Mask::subset_of(const Mask& other) const {
  if (M.rows() != other.M.rows() || M.cols() != other.M.cols()) return false;
  for (std::size_t i = 0; i < M.size(); ++i) {
    if (M.flat()[i] == 1.0f && other.M.flat()[i] != 1.0f) return false;
  }
  return true;
}

ContributionMatrix compute_contribution(const Tensor2D& W, const FeatureSet& estimation_set) {
  const std::size_t m = W.rows();
  const std::size_t c = W.cols();
  if (estimation_set.dim() != m) {
    throw ShapeError("estimation features have width " + std::to_string(estimation_set.dim()) +
                     " but W has " + std::to_string(m) + " units");
  }
  const std::size_t n = estimation_set.samples();
  if (n == 0) throw DataError("contribution estimation needs at least one sample");

  // mean_x W[i][c] h_i(x) = W[i][c] * mean_x h_i(x)
  std::vector<double> mean_h(m, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto h = estimation_set.X.row(s);
    for (std::size_t i = 0; i < m; ++i) mean_h[i] += h[i];
  }
  for (double& v : mean_h) v /= static_cast<double>(n);

  Tensor2D V(m, c);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      V(i, j) = static_cast<float>(static_cast<double>(W(i, j)) * mean_h[i]);
    }
  }
  return {std::move(V)};
}

ContributionMatrix compute_contribution(const FinalLayer& layer, const FeatureSet& estimation_set) {
  return compute_contribution(layer.W, estimation_set);
}

FeatureSet subsample(const FeatureSet& set, std::size_t count, std::uint64_t seed) {
  const std::size_t n = set.samples();
  if (count == 0) throw DomainError("subsample size must be positive");
  if (count >= n) return set;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  Tensor2D X(count, set.dim());
  std::optional<std::vector<std::uint32_t>> labels;
  if (set.labels) labels.emplace(count);
  for (std::size_t r = 0; r < count; ++r) {
    std::copy(set.X.row(idx[r]).begin(), set.X.row(idx[r]).end(), X.row(r).begin());
    if (labels) (*labels)[r] = (*set.labels)[idx[r]];
  }
  return FeatureSet(std::move(X), std::move(labels));
}

std::size_t p_to_k(double p, std::size_t m, std::size_t c) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("sparsity p must lie in [0, 1]");
  const double total = static_cast<double>(m) * static_cast<double>(c);
  const double k = std::floor((1.0 - p) * total + 0.5);
  return static_cast<std::size_t>(std::clamp(k, 0.0, total));
}

std::vector<std::size_t> rank_descending(std::span<const float> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  return idx;
}

Mask build_mask(const ContributionMatrix& V, std::size_t k) {
  const std::size_t total = V.V.size();
  if (k > total) {
    throw DomainError("k=" + std::to_string(k) + " exceeds m*C=" + std::to_string(total));
  }
  Mask mask = Mask::zeros(V.V.rows(), V.V.cols());
  const auto values = V.V.flat();
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  auto before = [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  if (k > 0 && k < total) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), before);
  for (std::size_t r = 0; r < k; ++r) mask.M.flat()[idx[r]] = 1.0f;
  return mask;
}

FinalLayer apply_mask(const FinalLayer& layer, const Mask& mask) {
  check_mask_shape(layer, mask);
  FinalLayer out = layer;
  auto w = out.W.flat();
  const auto m = mask.M.flat();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = m[i] * w[i];
  return out;
}

std::vector<double> dense_forward(const FinalLayer& layer, std::span<const float> h) {
  if (h.size() != layer.units()) {
    throw ShapeError("feature length " + std::to_string(h.size()) + " != unit count " +
                     std::to_string(layer.units()));
  }
  std::vector<double> out(layer.classes());
  forward_kernel(layer.W, layer.b, h, out);
  return out;
}

std::vector<double> dice_forward(const FinalLayer& layer, const Mask& mask, std::span<const float> h) {
  return dense_forward(apply_mask(layer, mask), h);
}

MatrixD batch_logits(const FinalLayer& layer, const Mask* mask, const Tensor2D& X) {
  if (X.cols() != layer.units()) {
    throw ShapeError("feature width " + std::to_string(X.cols()) + " != unit count " +
                     std::to_string(layer.units()));
  }
  const FinalLayer effective = mask ? apply_mask(layer, *mask) : layer;
  MatrixD logits(X.rows(), layer.classes());
  parallel_for(X.rows(), [&](std::size_t s) {
    forward_kernel(effective.W, effective.b, X.row(s), logits.row(s));
  });
  return logits;
}

}  // namespace dice
