#ifndef DICE_TENSOR_HPP_
#define DICE_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dice/errors.hpp"

namespace dice {

/// Dense row-major matrix. `Tensor2D` (f32) is the interchange container;
/// the double instantiation holds logits and intermediate statistics.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match shape " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  /// Builds from nested rows; every row must have the same length.
  static Matrix from_rows(const std::vector<std::vector<T>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    std::vector<T> flat;
    flat.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged rows in Matrix::from_rows");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(flat));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Tensor2D = Matrix<float>;
using MatrixD = Matrix<double>;

/// Final affine layer f = Wᵀh + b with W stored m×C (unit-major).
struct FinalLayer {
  Tensor2D W;
  std::vector<float> b;

  FinalLayer() = default;
  FinalLayer(Tensor2D weights, std::vector<float> bias);

  std::size_t units() const noexcept { return W.rows(); }
  std::size_t classes() const noexcept { return W.cols(); }
};

/// Penultimate activations, one row per sample, with optional class labels.
struct FeatureSet {
  Tensor2D X;
  std::optional<std::vector<std::uint32_t>> labels;

  FeatureSet() = default;
  explicit FeatureSet(Tensor2D x, std::optional<std::vector<std::uint32_t>> y = std::nullopt);

  std::size_t samples() const noexcept { return X.rows(); }
  std::size_t dim() const noexcept { return X.cols(); }

  /// Throws DataError if any label is >= num_classes.
  void check_labels(std::size_t num_classes) const;
};

}  // namespace dice

#endif  // DICE_TENSOR_HPP_
