#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "msfcn/tensor.hpp"

namespace msfcn {

// Dataset-level confusion matrix: one matrix over every evaluated pixel of a
// split, metrics derived from it afterwards. Entry (g, p) counts pixels with
// ground truth g predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int64_t num_classes);

  int64_t num_classes() const { return c_; }
  int64_t at(int64_t gt, int64_t pred) const;
  int64_t total() const;

  void update(const LabelMask& pred, const LabelMask& gt,
              std::optional<int32_t> ignore_label = std::nullopt);
  void merge(const ConfusionMatrix& other);

  // IoU = TP / (TP + FP + FN); empty when the class is absent from both gt
  // and prediction (those classes are excluded from the mean).
  std::optional<double> iou(int64_t cls) const;
  double mean_iou() const;
  double pixel_accuracy() const;

  nlohmann::json report() const;

 private:
  int64_t c_;
  std::vector<int64_t> counts_;
};

}  // namespace msfcn
