#include "msfcn/train.hpp"

#include <cmath>
#include <filesystem>
#include <utility>

#include "msfcn/checkpoint.hpp"
#include "msfcn/errors.hpp"
#include "msfcn/graph.hpp"
#include "msfcn/jsonio.hpp"
#include "msfcn/parallel.hpp"
#include "msfcn/rng.hpp"

namespace msfcn {

void TrainConfig::validate() const {
  if (lr <= 0) throw ValueError("train: lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ValueError("train: betas must lie in [0,1)");
  if (eps <= 0) throw ValueError("train: eps must be positive");
  if (batch_size < 1) throw ValueError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ValueError("train: max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs)
    throw ValueError("train: need 1 <= patience <= max_epochs");
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return nlohmann::json{
      {"lr", cfg.lr},         {"beta1", cfg.beta1},
      {"beta2", cfg.beta2},   {"eps", cfg.eps},
      {"batch_size", cfg.batch_size}, {"max_epochs", cfg.max_epochs},
      {"patience", cfg.patience},     {"seed", cfg.seed},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j,
                                   const std::string& path) {
  JsonView v(j, path);
  TrainConfig cfg;
  cfg.lr = v.get("lr", cfg.lr);
  cfg.beta1 = v.get("beta1", cfg.beta1);
  cfg.beta2 = v.get("beta2", cfg.beta2);
  cfg.eps = v.get("eps", cfg.eps);
  cfg.batch_size = v.get("batch_size", cfg.batch_size);
  cfg.max_epochs = v.get("max_epochs", cfg.max_epochs);
  cfg.patience = v.get("patience", cfg.patience);
  cfg.seed = v.get("seed", cfg.seed);
  v.finish();
  cfg.validate();
  return cfg;
}

EarlyStopping::EarlyStopping(int64_t patience) : patience_(patience) {
  if (patience < 1) throw ValueError("early stopping: patience must be >= 1");
}

bool EarlyStopping::update(double value) {
  ++epoch_;
  if (!has_best_ || value > best_) {
    has_best_ = true;
    best_ = value;
    best_epoch_ = epoch_;
    bad_ = 0;
  } else {
    ++bad_;
  }
  return bad_ >= patience_;
}

ConfusionMatrix evaluate(const Model& model,
                         const std::vector<VideoSample>& split) {
  if (split.empty()) throw DataError("evaluate: empty split");
  const int64_t n = static_cast<int64_t>(split.size());
  std::vector<ConfusionMatrix> parts(
      static_cast<size_t>(n), ConfusionMatrix(model.spec.num_classes));
  parallel_for(n, [&](int64_t i) {
    const VideoSample& s = split[static_cast<size_t>(i)];
    Tensor logits = forward(model, s.frames);
    parts[static_cast<size_t>(i)].update(argmax_classes(logits), s.mask);
  });
  ConfusionMatrix cm(model.spec.num_classes);
  for (const auto& p : parts) cm.merge(p);
  return cm;
}

namespace {

struct ResumePoint {
  int64_t epoch = 0;
  TrainReport report;
  EarlyStopping stopper{1};
};

nlohmann::json epoch_record_to_json(const EpochRecord& r) {
  return nlohmann::json{{"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"val_mean_iou", r.val_mean_iou},
                        {"val_pixel_accuracy", r.val_pixel_accuracy}};
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int64_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_mean_iou = j.at("val_mean_iou").get<double>();
  r.val_pixel_accuracy = j.at("val_pixel_accuracy").get<double>();
  return r;
}

void save_trainer_state(const std::string& path, const TrainReport& report,
                        const EarlyStopping& stopper) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : report.epochs) epochs.push_back(epoch_record_to_json(r));
  save_json_file(path, nlohmann::json{
                           {"epochs", epochs},
                           {"steps", report.steps},
                           {"best_epoch", stopper.best_epoch()},
                           {"best_value", stopper.best_value()},
                           {"bad_epochs", stopper.bad_epochs()},
                       });
}

}  // namespace

nlohmann::json train_report_to_json(const TrainReport& report,
                                    const Model& model,
                                    const TrainConfig& cfg) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : report.epochs) epochs.push_back(epoch_record_to_json(r));
  nlohmann::json j{
      {"model", model_spec_to_json(model.spec)},
      {"train", train_config_to_json(cfg)},
      {"epochs", epochs},
      {"stop_epoch", report.stop_epoch},
      {"stop_reason", report.stop_reason},
      {"best_epoch", report.best_epoch},
      {"best_val_mean_iou", report.best_val_mean_iou},
      {"steps", report.steps},
      {"best_checkpoint", report.best_checkpoint},
      {"last_checkpoint", report.last_checkpoint},
  };
  // run id: stable hash of everything that determines the trajectory
  nlohmann::json ident{{"model", j["model"]}, {"train", j["train"]}};
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(ident.dump())));
  j["run_id"] = hex;
  return j;
}

TrainReport train(Model& model, const DatasetSplits& data,
                  const TrainConfig& cfg, const std::string& out_dir,
                  bool resume) {
  cfg.validate();
  if (data.train.empty()) throw DataError("train: empty train split");
  if (data.val.empty()) throw DataError("train: empty val split");
  for (const auto& s : data.train)
    if (static_cast<int64_t>(s.frames.size()) != model.spec.order)
      throw ContractError("train: sample carries " +
                          std::to_string(s.frames.size()) +
                          " frames, model expects " +
                          std::to_string(model.spec.order));

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw DataError(out_dir + ": cannot create output directory: " +
                    ec.message());
  const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
  const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();
  const std::string state_path =
      (fs::path(out_dir) / "trainer_state.json").string();

  AdamState adam = make_adam_state(model.params);
  TrainReport report;
  EarlyStopping stopper(cfg.patience);
  int64_t start_epoch = 1;

  if (resume && fs::exists(last_path) && fs::exists(state_path)) {
    Model restored = load_checkpoint(last_path, &adam);
    if (!(restored.spec == model.spec))
      throw FormatError(last_path + ": checkpoint spec differs from model");
    model.params = std::move(restored.params);
    nlohmann::json st = load_json_file(state_path);
    try {
      for (const auto& e : st.at("epochs"))
        report.epochs.push_back(epoch_record_from_json(e));
      report.steps = st.at("steps").get<int64_t>();
      // replay the monitored series so the stopper state matches exactly
      for (const auto& r : report.epochs) stopper.update(r.val_mean_iou);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(state_path + ": " + e.what());
    }
    start_epoch = static_cast<int64_t>(report.epochs.size()) + 1;
  }

  report.best_checkpoint = best_path;
  report.last_checkpoint = last_path;

  const int64_t n_train = static_cast<int64_t>(data.train.size());
  bool stopped_early = stopper.bad_epochs() >= cfg.patience;
  int64_t epoch = start_epoch - 1;

  for (epoch = start_epoch; epoch <= cfg.max_epochs && !stopped_early;
       ++epoch) {
    // stateless per-epoch permutation, so a resumed run shuffles identically
    std::vector<int64_t> order(static_cast<size_t>(n_train));
    for (int64_t i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
    for (int64_t i = n_train - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(rng.uniform_int(0, i))]);

    double loss_sum = 0;
    int64_t n_steps_epoch = 0;
    for (int64_t begin = 0; begin < n_train; begin += cfg.batch_size) {
      const int64_t end = std::min(n_train, begin + cfg.batch_size);
      std::vector<LabelMask> masks;
      std::vector<ValueRef> frame_refs;
      Graph g;
      for (int64_t k = 0; k < model.spec.order; ++k) {
        std::vector<Tensor> stack;
        for (int64_t i = begin; i < end; ++i)
          stack.push_back(
              data.train[static_cast<size_t>(order[static_cast<size_t>(i)])]
                  .frames[static_cast<size_t>(k)]);
        frame_refs.push_back(g.input(stack_batch(stack)));
      }
      for (int64_t i = begin; i < end; ++i)
        masks.push_back(
            data.train[static_cast<size_t>(order[static_cast<size_t>(i)])]
                .mask);
      ValueRef logits =
          model_forward(g, model.spec, model.params, frame_refs);
      ValueRef loss = g.softmax_cross_entropy(logits, stack_batch_masks(masks));
      const double loss_v = g.scalar(loss);
      if (!std::isfinite(loss_v))
        throw NumericError("train: non-finite loss at step " +
                           std::to_string(report.steps + 1) + " (epoch " +
                           std::to_string(epoch) + ")");
      model.params.zero_grads();
      g.backward(loss);
      adam_step(model.params, adam, cfg.adam());
      report.steps += 1;
      loss_sum += loss_v;
      n_steps_epoch += 1;
    }

    ConfusionMatrix cm = evaluate(model, data.val);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_steps_epoch);
    rec.val_mean_iou = cm.mean_iou();
    rec.val_pixel_accuracy = cm.pixel_accuracy();
    report.epochs.push_back(rec);

    stopped_early = stopper.update(rec.val_mean_iou);
    if (stopper.best_epoch() == epoch)
      save_checkpoint(model, best_path, &adam);
    save_checkpoint(model, last_path, &adam);
    save_trainer_state(state_path, report, stopper);
  }

  report.stop_epoch = static_cast<int64_t>(report.epochs.size());
  report.stop_reason = stopped_early ? "early_stopping" : "max_epochs";
  report.best_epoch = stopper.best_epoch();
  report.best_val_mean_iou = stopper.best_value();
  return report;
}

}  // namespace msfcn
