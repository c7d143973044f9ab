#include "msfcn/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msfcn/checkpoint.hpp"
#include "msfcn/config.hpp"
#include "msfcn/errors.hpp"
#include "msfcn/image_io.hpp"
#include "msfcn/jsonio.hpp"
#include "msfcn/metrics.hpp"
#include "msfcn/synth_data.hpp"
#include "msfcn/train.hpp"

namespace msfcn {
namespace {

// overlay palette, background black; repeats past 8 classes
constexpr float kPalette[8][3] = {
    {0.00f, 0.00f, 0.00f}, {0.90f, 0.10f, 0.29f}, {0.24f, 0.71f, 0.29f},
    {0.00f, 0.51f, 0.78f}, {1.00f, 0.88f, 0.10f}, {0.57f, 0.12f, 0.71f},
    {0.27f, 0.94f, 0.94f}, {0.96f, 0.51f, 0.19f},
};

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void resize_samples(std::vector<VideoSample>& samples, int64_t h, int64_t w) {
  for (auto& s : samples) {
    if (s.frames.empty()) continue;
    if (s.frames[0].shape.h == h && s.frames[0].shape.w == w) continue;
    for (auto& f : s.frames) f = resize_bilinear(f, h, w);
    s.mask = resize_nearest(s.mask, h, w);
  }
}

DatasetSplits load_dataset(const std::string& root, int64_t order,
                           int64_t h, int64_t w) {
  namespace fs = std::filesystem;
  if (!fs::exists(fs::path(root) / "manifest.json"))
    throw DataError(root + ": no dataset found (missing manifest.json); run "
                    "`msfcn generate` first");
  DatasetSplits ds;
  ds.train = load_split(root, "train", order);
  ds.val = load_split(root, "val", order);
  ds.test = load_split(root, "test", order);
  resize_samples(ds.train, h, w);
  resize_samples(ds.val, h, w);
  resize_samples(ds.test, h, w);
  return ds;
}

int cmd_generate(const std::string& config_path, const std::string& out) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  std::string root = out.empty() ? cfg.data.root : out;
  if (root.empty())
    throw ValueError("generate: no dataset root (set data.root or pass --out)");
  write_dataset(root, cfg.data.scene, cfg.data.seed, cfg.data.num_sequences);
  SplitIds ids = split_sequences(cfg.data.num_sequences);
  std::cout << "wrote " << cfg.data.num_sequences << " sequences to " << root
            << " (train " << ids.train.size() << ", val " << ids.val.size()
            << ", test " << ids.test.size() << ")\n";
  return 0;
}

int cmd_train(const std::string& config_path, bool resume) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  const std::string started = utc_now();
  if (cfg.data.root.empty())
    throw ValueError("train: config has no data.root");
  DatasetSplits ds = load_dataset(cfg.data.root, cfg.model.order,
                                  cfg.model.input_height,
                                  cfg.model.input_width);
  Model model = build(cfg.model, cfg.train.seed);
  std::cout << model.spec.name() << ": " << model.parameter_count()
            << " parameters, " << ds.train.size() << " train / "
            << ds.val.size() << " val samples\n";
  TrainReport report = train(model, ds, cfg.train, cfg.output_dir, resume);
  for (const auto& e : report.epochs)
    std::printf("epoch %3lld  loss %.4f  val_miou %.4f  val_acc %.4f\n",
                static_cast<long long>(e.epoch), e.train_loss, e.val_mean_iou,
                e.val_pixel_accuracy);
  nlohmann::json j = train_report_to_json(report, model, cfg.train);
  j["config"] = experiment_config_to_json(cfg);
  j["timestamps"] = {{"started", started}, {"finished", utc_now()}};
  const std::string report_path =
      (std::filesystem::path(cfg.output_dir) / "report.json").string();
  save_json_file(report_path, j);
  std::cout << "stopped after epoch " << report.stop_epoch << " ("
            << report.stop_reason << "), best epoch " << report.best_epoch
            << " val_miou " << report.best_val_mean_iou << "\n"
            << "report: " << report_path << "\nbest checkpoint: "
            << report.best_checkpoint << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_root,
             const std::string& split, const std::string& out_path) {
  Model model = load_checkpoint(ckpt);
  auto samples = load_split(data_root, split, model.spec.order);
  if (samples.empty())
    throw DataError(data_root + ": split '" + split + "' is empty");
  resize_samples(samples, model.spec.input_height, model.spec.input_width);
  ConfusionMatrix cm = evaluate(model, samples);

  std::printf("%s on %s/%s (%zu samples)\n", model.spec.name().c_str(),
              data_root.c_str(), split.c_str(), samples.size());
  std::printf("%-8s %s\n", "class", "iou");
  for (int64_t k = 0; k < cm.num_classes(); ++k) {
    auto v = cm.iou(k);
    if (v)
      std::printf("%-8lld %.4f\n", static_cast<long long>(k), *v);
    else
      std::printf("%-8lld absent\n", static_cast<long long>(k));
  }
  std::printf("mean_iou %.4f\npixel_accuracy %.4f\n", cm.mean_iou(),
              cm.pixel_accuracy());

  nlohmann::json j = cm.report();
  j["split"] = split;
  j["model"] = model.spec.name();
  j["checkpoint"] = ckpt;
  std::cout << j.dump(2) << "\n";
  save_json_file(out_path, j);
  return 0;
}

int cmd_predict(const std::string& ckpt,
                const std::vector<std::string>& frame_paths,
                const std::string& out_prefix, bool overlay) {
  Model model = load_checkpoint(ckpt);
  if (static_cast<int64_t>(frame_paths.size()) != model.spec.order)
    throw ValueError("predict: " + model.spec.name() + " expected " +
                     std::to_string(model.spec.order) + " frames, got " +
                     std::to_string(frame_paths.size()));
  std::vector<Tensor> frames;
  for (const auto& p : frame_paths)
    frames.push_back(resize_bilinear(read_image(p), model.spec.input_height,
                                     model.spec.input_width));
  Tensor logits = forward(model, frames);
  LabelMask mask = argmax_classes(logits);
  const std::string mask_path = out_prefix + ".pgm";
  write_mask(mask_path, mask);
  std::cout << "mask: " << mask_path << "\n";
  if (overlay) {
    const Tensor& last = frames.back();
    Tensor blend(last.shape);
    for (int64_t y = 0; y < last.shape.h; ++y)
      for (int64_t x = 0; x < last.shape.w; ++x) {
        int cls = mask.at(0, y, x) % 8;
        for (int c = 0; c < 3; ++c)
          blend.at(0, c, y, x) =
              0.5f * last.at(0, c, y, x) + 0.5f * kPalette[cls][c];
      }
    const std::string overlay_path = out_prefix + "_overlay.ppm";
    write_image(overlay_path, blend);
    std::cout << "overlay: " << overlay_path << "\n";
  }
  return 0;
}

int cmd_inspect(const std::string& ckpt) {
  CheckpointInfo info = inspect_checkpoint(ckpt);
  std::printf("version %u\n", info.version);
  std::printf("model: %s\n", info.spec.dump().c_str());
  std::printf("%-36s %-18s %10s  %s\n", "name", "shape", "elems", "checksum");
  for (const auto& r : info.records)
    std::printf("%-36s %-18s %10lld  %016llx\n", r.name.c_str(),
                r.shape.str().c_str(),
                static_cast<long long>(r.shape.elems()),
                static_cast<unsigned long long>(r.checksum));
  std::printf("total parameters: %lld\n",
              static_cast<long long>(info.total_params));
  if (info.has_adam)
    std::printf("optimizer: adam, step %llu\n",
                static_cast<unsigned long long>(info.adam_t));
  else
    std::printf("optimizer: none\n");
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"moving-shapes video segmentation kit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ckpt, data_root, out_path;
  std::string split = "test", out_prefix = "prediction";
  std::vector<std::string> frame_paths;
  bool resume = false, overlay = false;

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--config", config_path, "experiment config JSON")
      ->required();
  gen->add_option("--out", out_dir, "dataset root (overrides data.root)");

  CLI::App* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", config_path, "experiment config JSON")
      ->required();
  tr->add_flag("--resume", resume, "continue from last.ckpt in output_dir");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--data", data_root, "dataset root")->required();
  ev->add_option("--split", split, "train|val|test (default test)");
  ev->add_option("--out", out_path, "metrics JSON path");

  CLI::App* pr = app.add_subcommand("predict", "segment frames");
  pr->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  pr->add_option("--frames", frame_paths, "input frames, oldest first")
      ->required()
      ->expected(1, 8);
  pr->add_option("--out", out_prefix, "output prefix (default 'prediction')");
  pr->add_flag("--overlay", overlay, "also write a color overlay PPM");

  CLI::App* in = app.add_subcommand("inspect", "list checkpoint contents");
  in->add_option("--checkpoint", ckpt, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen)) return cmd_generate(config_path, out_dir);
    if (app.got_subcommand(tr)) return cmd_train(config_path, resume);
    if (app.got_subcommand(ev)) {
      if (out_path.empty()) out_path = "metrics.json";
      return cmd_eval(ckpt, data_root, split, out_path);
    }
    if (app.got_subcommand(pr))
      return cmd_predict(ckpt, frame_paths, out_prefix, overlay);
    if (app.got_subcommand(in)) return cmd_inspect(ckpt);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace msfcn
