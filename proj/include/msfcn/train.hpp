#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfcn/adam.hpp"
#include "msfcn/metrics.hpp"
#include "msfcn/model.hpp"
#include "msfcn/synth_data.hpp"

namespace msfcn {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t batch_size = 2;
  int64_t max_epochs = 30;
  int64_t patience = 3;  // epochs without val mean-IoU improvement
  uint64_t seed = 0;

  AdamConfig adam() const { return {lr, beta1, beta2, eps}; }
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j,
                                   const std::string& path);

// Maximizes a monitored value with strict-improvement semantics: stop once
// `patience` consecutive epochs fail to beat the best seen; ties keep the
// earlier best epoch.
class EarlyStopping {
 public:
  explicit EarlyStopping(int64_t patience);

  // Feed one epoch's value; returns true when training should stop.
  bool update(double value);

  int64_t epochs_seen() const { return epoch_; }
  int64_t best_epoch() const { return best_epoch_; }  // 1-based, 0 = none
  double best_value() const { return best_; }
  int64_t bad_epochs() const { return bad_; }

 private:
  int64_t patience_;
  int64_t epoch_ = 0;
  int64_t best_epoch_ = 0;
  int64_t bad_ = 0;
  double best_ = 0;
  bool has_best_ = false;
};

struct EpochRecord {
  int64_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_mean_iou = 0;
  double val_pixel_accuracy = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int64_t stop_epoch = 0;
  std::string stop_reason;  // "early_stopping" or "max_epochs"
  int64_t best_epoch = 0;
  double best_val_mean_iou = 0;
  int64_t steps = 0;  // optimizer steps taken in total
  std::string best_checkpoint;
  std::string last_checkpoint;
};

nlohmann::json train_report_to_json(const TrainReport& report,
                                    const Model& model,
                                    const TrainConfig& cfg);

// One confusion matrix over every pixel of the split; forwards run in
// parallel, integer counts make the merge order irrelevant.
ConfusionMatrix evaluate(const Model& model,
                         const std::vector<VideoSample>& split);

// Trains in place. Writes best.ckpt / last.ckpt / trainer_state.json under
// out_dir after every epoch; with resume=true an existing last.ckpt +
// trainer_state.json continue the run as if it had never stopped.
TrainReport train(Model& model, const DatasetSplits& data,
                  const TrainConfig& cfg, const std::string& out_dir,
                  bool resume = false);

}  // namespace msfcn
