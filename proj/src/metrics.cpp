#include "msfcn/metrics.hpp"

#include <string>

#include "msfcn/errors.hpp"

namespace msfcn {

ConfusionMatrix::ConfusionMatrix(int64_t num_classes) : c_(num_classes) {
  if (num_classes < 2)
    throw ValueError("confusion: need at least 2 classes, got " +
                     std::to_string(num_classes));
  counts_.assign(static_cast<size_t>(c_ * c_), 0);
}

int64_t ConfusionMatrix::at(int64_t gt, int64_t pred) const {
  if (gt < 0 || gt >= c_ || pred < 0 || pred >= c_)
    throw ValueError("confusion: class index out of range");
  return counts_[static_cast<size_t>(gt * c_ + pred)];
}

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t v : counts_) t += v;
  return t;
}

void ConfusionMatrix::update(const LabelMask& pred, const LabelMask& gt,
                             std::optional<int32_t> ignore_label) {
  if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w)
    throw ShapeError("confusion: prediction and ground truth shapes differ");
  for (size_t i = 0; i < gt.data.size(); ++i) {
    int32_t g = gt.data[i];
    if (ignore_label && g == *ignore_label) continue;
    int32_t p = pred.data[i];
    if (g < 0 || g >= c_)
      throw DataError("confusion: ground-truth label " + std::to_string(g) +
                      " outside [0," + std::to_string(c_) + ")");
    if (p < 0 || p >= c_)
      throw DataError("confusion: predicted label " + std::to_string(p) +
                      " outside [0," + std::to_string(c_) + ")");
    ++counts_[static_cast<size_t>(static_cast<int64_t>(g) * c_ + p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.c_ != c_)
    throw ShapeError("confusion: cannot merge matrices of different sizes");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::optional<double> ConfusionMatrix::iou(int64_t cls) const {
  if (cls < 0 || cls >= c_)
    throw ValueError("confusion: class index out of range");
  int64_t tp = counts_[static_cast<size_t>(cls * c_ + cls)];
  int64_t fp = 0, fn = 0;
  for (int64_t k = 0; k < c_; ++k) {
    if (k == cls) continue;
    fp += counts_[static_cast<size_t>(k * c_ + cls)];
    fn += counts_[static_cast<size_t>(cls * c_ + k)];
  }
  int64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

double ConfusionMatrix::mean_iou() const {
  double sum = 0;
  int64_t present = 0;
  for (int64_t k = 0; k < c_; ++k) {
    if (auto v = iou(k)) {
      sum += *v;
      ++present;
    }
  }
  if (present == 0)
    throw ValueError("confusion: every class absent, mean IoU undefined");
  return sum / static_cast<double>(present);
}

double ConfusionMatrix::pixel_accuracy() const {
  int64_t t = total();
  if (t == 0)
    throw ValueError("confusion: no evaluated pixels, accuracy undefined");
  int64_t diag = 0;
  for (int64_t k = 0; k < c_; ++k)
    diag += counts_[static_cast<size_t>(k * c_ + k)];
  return static_cast<double>(diag) / static_cast<double>(t);
}

nlohmann::json ConfusionMatrix::report() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (int64_t k = 0; k < c_; ++k) {
    auto v = iou(k);
    if (v)
      per_class.push_back(*v);
    else
      per_class.push_back(nullptr);  // absent from both gt and prediction
  }
  nlohmann::json rows = nlohmann::json::array();
  for (int64_t g = 0; g < c_; ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (int64_t p = 0; p < c_; ++p)
      row.push_back(counts_[static_cast<size_t>(g * c_ + p)]);
    rows.push_back(row);
  }
  return nlohmann::json{{"per_class_iou", per_class},
                        {"mean_iou", mean_iou()},
                        {"pixel_accuracy", pixel_accuracy()},
                        {"confusion", rows}};
}

}  // namespace msfcn
