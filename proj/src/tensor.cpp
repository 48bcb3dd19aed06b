#include "dice/tensor.hpp"

#include <string>

namespace dice {

FinalLayer::FinalLayer(Tensor2D weights, std::vector<float> bias)
    : W(std::move(weights)), b(std::move(bias)) {
  if (W.rows() < 1) throw ShapeError("final layer needs at least one unit");
  if (W.cols() < 2) throw ShapeError("final layer needs at least two classes");
  if (b.size() != W.cols()) {
    throw ShapeError("bias length " + std::to_string(b.size()) + " != class count " +
                     std::to_string(W.cols()));
  }
}

FeatureSet::FeatureSet(Tensor2D x, std::optional<std::vector<std::uint32_t>> y)
    : X(std::move(x)), labels(std::move(y)) {
  if (X.rows() < 1) throw DataError("feature set must contain at least one sample");
  if (labels && labels->size() != X.rows()) {
    throw ShapeError("label count " + std::to_string(labels->size()) + " != sample count " +
                     std::to_string(X.rows()));
  }
}

void FeatureSet::check_labels(std::size_t num_classes) const {
  if (!labels) return;
  for (std::size_t i = 0; i < labels->size(); ++i) {
    if ((*labels)[i] >= num_classes) {
      throw DataError("label " + std::to_string((*labels)[i]) + " at sample " +
                      std::to_string(i) + " is out of range for " +
                      std::to_string(num_classes) + " classes");
    }
  }
}

}  // namespace dice
