// Acceptance gate. Each criterion prints exactly one [PASS]/[FAIL] line on
// stdout; progress chatter goes to stderr. Run with no arguments for the full
// gate, or pass criterion numbers (1..9) to run a subset. Exit 0 iff every
// criterion that ran passed.
//
// Criterion 2 trains nine models and dominates the runtime (roughly half an
// hour on one core); everything else finishes within a few minutes.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "msfcn/adam.hpp"
#include "msfcn/checkpoint.hpp"
#include "msfcn/encoder.hpp"
#include "msfcn/errors.hpp"
#include "msfcn/fusion.hpp"
#include "msfcn/graph.hpp"
#include "msfcn/kernels.hpp"
#include "msfcn/layers.hpp"
#include "msfcn/metrics.hpp"
#include "msfcn/model.hpp"
#include "msfcn/synth_data.hpp"
#include "msfcn/train.hpp"

namespace fs = std::filesystem;
using namespace msfcn;

namespace {

using DStore = ParamStoreT<double>;
using DGraph = GraphT<double>;
using DTensor = TensorT<double>;

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "msfcn_acceptance" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// scalar loss with non-uniform weights so rescaled/transposed gradients
// cannot cancel out
ValueRef weighted_sum(DGraph& g, ValueRef y, uint64_t seed) {
  DTensor w = testing::random_tensor<double>(g.value(y).shape, seed);
  return g.reduce_sum(g.mul(y, g.input(w)));
}

// ---------------------------------------------------------------------------
// 1. scale disclaimer

bool criterion1(std::string& detail) {
  detail =
      "published full-scale mean-IoU figures (ResNet-50 encoders on road and "
      "video benchmarks) are not reproducible at desk scale; the ordering "
      "claim is checked on the synthetic camouflage benchmark by criterion 2";
  return true;
}

// ---------------------------------------------------------------------------
// 2. temporal-advantage ordering on the camouflage benchmark

double camo_mean_test_iou(ModelKind kind, int64_t order,
                          const SceneConfig& scene, const fs::path& work) {
  DatasetSplits data = make_dataset(scene, 2024, 600, order);
  double total = 0;
  for (uint64_t s = 1; s <= 3; ++s) {
    ModelSpec spec;
    spec.kind = kind;
    spec.order = order;
    spec.num_classes = scene.num_classes;
    spec.encoder.stage_channels = {16, 24, 32};
    spec.encoder.blocks_per_stage = 1;
    spec.tie_encoders = true;
    spec.input_height = scene.height;
    spec.input_width = scene.width;
    Model m = build(spec, s);

    TrainConfig cfg;
    cfg.lr = 1.5e-3;
    cfg.batch_size = 1;
    cfg.max_epochs = 30;
    cfg.patience = 3;
    cfg.seed = s;

    fs::path out = work / (spec.name() + "_s" + std::to_string(s));
    TrainReport r = train(m, data, cfg, out.string());
    Model best = load_checkpoint(r.best_checkpoint);
    double iou = evaluate(best, data.test).mean_iou();
    total += iou;
    fprintf(stderr, "  %s seed %llu: stop %lld best_ep %lld test mIoU %.4f\n",
            spec.name().c_str(), (unsigned long long)s,
            (long long)r.stop_epoch, (long long)r.best_epoch, iou);
  }
  return total / 3;
}

bool criterion2(std::string& detail) {
  // Camouflaged shapes are invisible frame-by-frame (sensor noise masks the
  // residual resampling cue), so single-frame accuracy pins the baseline and
  // any gain must come from motion. Sized so learning onset lands inside the
  // patience window for every seed: ~2.5 objects/frame, 6-8 px/frame motion
  // against a 0.4/0.9 px/frame background scroll, one optimizer step per
  // window.
  SceneConfig scene;
  scene.height = 64;
  scene.width = 96;
  scene.num_classes = 4;
  scene.min_objects = 2;
  scene.max_objects = 3;
  scene.speed_min = 6.0;
  scene.speed_max = 8.0;
  scene.scroll_y = 0.4;
  scene.scroll_x = 0.9;
  scene.camouflage = true;
  scene.noise_stddev = 0.07;
  scene.sequence_length = 4;
  scene.size_min = 15.0;
  scene.size_max = 16.0;

  fs::path work = fresh_dir("camo_ordering");
  double fcn = camo_mean_test_iou(ModelKind::FCN, 1, scene, work);
  double ms2 = camo_mean_test_iou(ModelKind::MSFCN, 2, scene, work);
  double ms3 = camo_mean_test_iou(ModelKind::MSFCN, 3, scene, work);
  fs::remove_all(work);

  detail = fmt(
      "camouflage benchmark (600 sequences, 64x96, C=4, 3 seeds, identical "
      "budgets): FCN %.4f, MSFCN-2 %.4f, MSFCN-3 %.4f; margin %.4f (need "
      "ordering and margin >= 0.05)",
      fcn, ms2, ms3, ms3 - fcn);
  return ms3 >= ms2 && ms2 >= fcn && ms3 - fcn >= 0.05;
}

// ---------------------------------------------------------------------------
// 3. gradient correctness: every op, then every architecture end to end

bool criterion3(std::string& detail) {
  double worst = 0;
  int64_t checks = 0;
  std::string worst_at;
  auto run = [&](const char* name, DStore& s, auto build, int64_t coords,
                 uint64_t seed) {
    auto res = testing::gradcheck(s, build, coords, seed);
    ++checks;
    if (res.coords < coords) {
      worst = std::numeric_limits<double>::infinity();
      worst_at = std::string(name) + " (too few smooth coordinates)";
    } else if (res.max_rel_err > worst) {
      worst = res.max_rel_err;
      worst_at = name;
    }
    fprintf(stderr, "  gradcheck %-22s rel err %.2e over %lld coords\n", name,
            res.max_rel_err, (long long)res.coords);
  };

  {
    DStore s;
    DTensor x = testing::random_tensor<double>(Shape4(1, 2, 4, 4), 1);
    testing::nudge_off_zero(x);
    s.add("x", x);
    run("relu", s,
        [&](DGraph& g) { return weighted_sum(g, g.relu(g.param(s.at("x"))), 10); },
        20, 2);
  }
  {
    DStore s;
    s.add("x", testing::random_tensor<double>(Shape4(1, 2, 3, 3), 3));
    run("sigmoid", s,
        [&](DGraph& g) {
          return weighted_sum(g, g.sigmoid(g.param(s.at("x"))), 11);
        },
        18, 4);
    run("tanh", s,
        [&](DGraph& g) { return weighted_sum(g, g.tanh(g.param(s.at("x"))), 12); },
        18, 5);
  }
  {
    DStore s;
    s.add("a", testing::random_tensor<double>(Shape4(2, 2, 3, 3), 6));
    s.add("b", testing::random_tensor<double>(Shape4(2, 2, 3, 3), 7));
    run("add+mul", s,
        [&](DGraph& g) {
          ValueRef a = g.param(s.at("a")), b = g.param(s.at("b"));
          return weighted_sum(g, g.add(g.mul(a, b), a), 13);
        },
        36, 8);
  }
  {
    DStore s;
    s.add("a", testing::random_tensor<double>(Shape4(1, 2, 3, 3), 9));
    s.add("b", testing::random_tensor<double>(Shape4(1, 3, 3, 3), 10));
    run("concat+slice", s,
        [&](DGraph& g) {
          ValueRef cat = g.concat({g.param(s.at("a")), g.param(s.at("b"))});
          return weighted_sum(g, g.slice(cat, 1, 4), 14);
        },
        40, 12);
  }
  {
    struct {
      int64_t stride, pad;
    } geoms[] = {{1, 1}, {2, 1}, {1, 0}};
    uint64_t seed = 20;
    for (auto [stride, pad] : geoms) {
      DStore s;
      s.add("x", testing::random_tensor<double>(Shape4(2, 3, 6, 6), seed++));
      s.add("w",
            testing::random_tensor<double>(Shape4(4, 3, 3, 3), seed++, 0.4));
      s.add("b", testing::random_tensor<double>(Shape4(4, 1, 1, 1), seed++));
      std::string name = fmt("conv2d s%lld p%lld", (long long)stride,
                             (long long)pad);
      run(name.c_str(), s,
          [&, stride = stride, pad = pad](DGraph& g) {
            ValueRef y = g.conv2d(g.param(s.at("x")), g.param(s.at("w")),
                                  g.param(s.at("b")), stride, pad);
            return weighted_sum(g, y, 99);
          },
          60, seed++);
    }
  }
  {
    DStore s;
    s.add("x", testing::random_tensor<double>(Shape4(1, 4, 5, 5), 30));
    s.add("w", testing::random_tensor<double>(Shape4(2, 4, 1, 1), 31, 0.5));
    s.add("b", testing::random_tensor<double>(Shape4(2, 1, 1, 1), 32));
    run("conv1x1", s,
        [&](DGraph& g) {
          ValueRef y = g.conv1x1(g.param(s.at("x")), g.param(s.at("w")),
                                 g.param(s.at("b")));
          return weighted_sum(g, y, 33);
        },
        45, 34);
  }
  for (int64_t factor : {2, 8}) {
    DStore s;
    s.add("x", testing::random_tensor<double>(
                   Shape4(1, 2, 3, 4), 40 + static_cast<uint64_t>(factor)));
    std::string name = fmt("upsample x%lld", (long long)factor);
    run(name.c_str(), s,
        [&, factor](DGraph& g) {
          return weighted_sum(g, g.upsample_bilinear(g.param(s.at("x")), factor),
                              41);
        },
        24, 42);
  }
  {
    LabelMask labels = testing::random_mask(4, 4, 3, 50);
    LabelMask ignored = labels;
    ignored.data[0] = 255;
    ignored.data[7] = 255;
    DStore s;
    s.add("logits", testing::random_tensor<double>(Shape4(1, 3, 4, 4), 51));
    run("softmax CE", s,
        [&](DGraph& g) {
          return g.softmax_cross_entropy(g.param(s.at("logits")), labels, {});
        },
        48, 52);
    run("softmax CE + ignore", s,
        [&](DGraph& g) {
          return g.softmax_cross_entropy(g.param(s.at("logits")), ignored,
                                         std::optional<int32_t>(255));
        },
        48, 53);
  }
  {
    const int64_t hc = 2, xc = 2;
    DStore s;
    s.add("w", testing::random_tensor<double>(Shape4(4 * hc, xc + hc, 3, 3),
                                              80, 0.3));
    s.add("b",
          testing::random_tensor<double>(Shape4(4 * hc, 1, 1, 1), 81, 0.1));
    DTensor x1 = testing::random_tensor<double>(Shape4(1, xc, 3, 3), 82);
    DTensor x2 = testing::random_tensor<double>(Shape4(1, xc, 3, 3), 83);
    run("ConvLSTM (2 steps)", s,
        [&](DGraph& g) {
          LstmStateRefs st{g.input(DTensor(Shape4(1, hc, 3, 3))),
                           g.input(DTensor(Shape4(1, hc, 3, 3)))};
          ValueRef w = g.param(s.at("w")), b = g.param(s.at("b"));
          st = conv_lstm_step(g, g.input(x1), st, w, b);
          st = conv_lstm_step(g, g.input(x2), st, w, b);
          return weighted_sum(g, st.h, 84);
        },
        60, 85);
  }

  struct {
    ModelKind kind;
    int64_t order;
  } archs[] = {{ModelKind::FCN, 1},
               {ModelKind::MSFCN, 2},
               {ModelKind::MSFCN, 3},
               {ModelKind::RFCN, 2}};
  uint64_t seed = 160;
  for (const auto& a : archs) {
    ModelSpec spec;
    spec.kind = a.kind;
    spec.order = a.order;
    spec.num_classes = 3;
    spec.input_height = 32;
    spec.input_width = 32;
    spec.encoder.stage_channels = {8, 12, 16};
    spec.encoder.blocks_per_stage = 1;
    Model m = build(spec, seed++);
    DStore s = m.params.cast<double>();
    std::vector<DTensor> frames;
    for (int64_t k = 0; k < spec.order; ++k)
      frames.push_back(
          testing::random_tensor<double>(Shape4(1, 3, 32, 32), seed++, 0.5));
    LabelMask labels = testing::random_mask(32, 32, spec.num_classes, seed++);
    run(spec.name().c_str(), s,
        [&](DGraph& g) {
          std::vector<ValueRef> refs;
          for (const auto& f : frames) refs.push_back(g.input(f));
          return g.softmax_cross_entropy(model_forward(g, spec, s, refs),
                                         labels, {});
        },
        100, seed++);
  }

  detail = fmt(
      "analytic gradients vs central differences, %lld op checks + 4 "
      "architectures at 1x3x32x32/C=3: max rel err %.2e at %s (need < 1e-3)",
      (long long)(checks - 4), worst, worst_at.c_str());
  return worst < 1e-3;
}

// ---------------------------------------------------------------------------
// 4. selector fusion collapses MSFCN onto the single-frame network

bool criterion4(std::string& detail) {
  double worst = 0;
  int draws = 0;
  for (int64_t order : {2, 3}) {
    for (uint64_t draw = 0; draw < 5; ++draw, ++draws) {
      ModelSpec fcn_spec;
      fcn_spec.kind = ModelKind::FCN;
      fcn_spec.order = 1;
      fcn_spec.num_classes = 3;
      fcn_spec.input_height = 32;
      fcn_spec.input_width = 32;
      fcn_spec.encoder.stage_channels = {8, 12, 16};
      fcn_spec.encoder.blocks_per_stage = 1;
      Model fcn = build(fcn_spec, 1000 + 31 * draw + (uint64_t)order);

      ModelSpec ms_spec = fcn_spec;
      ms_spec.kind = ModelKind::MSFCN;
      ms_spec.order = order;
      ms_spec.tie_encoders = true;
      Model ms = build(ms_spec, 2000 + 31 * draw + (uint64_t)order);

      // shared encoder + decoder copied from the single-frame net
      for (size_t i = 0; i < fcn.params.size(); ++i) {
        const Param& p = fcn.params[i];
        std::string name = p.name;
        if (name.rfind("encoder0.", 0) == 0)
          name = "encoder." + name.substr(9);
        ms.params.at(name).value = p.value;
      }
      // fusion = pick the newest stream, pass it through unchanged
      const char* levels[3] = {"conv3", "conv4", "conv5"};
      for (int l = 0; l < 3; ++l) {
        const int64_t c = ms_spec.encoder.stage_channels[l];
        auto& w = ms.params.at(std::string("fusion.") + levels[l] + ".weight");
        w.value = make_selector_fusion_weight<float>(order, c, order - 1);
        auto& b = ms.params.at(std::string("fusion.") + levels[l] + ".bias");
        std::fill(b.value.data.begin(), b.value.data.end(), 0.0f);
      }

      std::vector<Tensor> frames;
      for (int64_t k = 0; k < order; ++k)
        frames.push_back(testing::random_tensor<float>(
            Shape4(1, 3, 32, 32), 3000 + 10 * draw + (uint64_t)(order + k),
            0.5));
      double diff = testing::max_abs_diff(forward(ms, frames),
                                          forward(fcn, {frames.back()}));
      worst = std::max(worst, diff);
    }
  }
  detail = fmt(
      "MSFCN-2/MSFCN-3 with selector fusion weights reproduce FCN's forward "
      "output: %d random draws, max abs diff %.2e (need <= 1e-5)",
      draws, worst);
  return worst <= 1e-5;
}

// ---------------------------------------------------------------------------
// 5. overfit capacity at the pinned budget (500 steps, lr 1e-3)

bool criterion5(std::string& detail) {
  // 8 windows of large slow circles; full-batch steps so the last epochs are
  // not disturbed by shuffle noise near the optimum.
  SceneConfig scene;
  scene.height = 64;
  scene.width = 64;
  scene.num_classes = 2;
  scene.min_objects = 1;
  scene.max_objects = 1;
  scene.speed_min = 0.3;
  scene.speed_max = 0.8;
  scene.scroll_y = 0;
  scene.scroll_x = 0;
  scene.camouflage = false;
  scene.noise_stddev = 0;
  scene.sequence_length = 4;
  scene.size_min = 20;
  scene.size_max = 24;

  DatasetSplits data = make_dataset(scene, 77, 4, 1);
  data.val = data.train;  // monitor train IoU directly

  ModelSpec spec;
  spec.kind = ModelKind::FCN;
  spec.order = 1;
  spec.num_classes = 2;
  spec.encoder.stage_channels = {8, 12, 16};
  spec.encoder.blocks_per_stage = 1;
  spec.input_height = 64;
  spec.input_width = 64;
  Model m = build(spec, 2);

  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 8;  // the whole train split
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.seed = 1;

  fs::path work = fresh_dir("overfit");
  TrainReport r = train(m, data, cfg, work.string());
  Model best = load_checkpoint(r.best_checkpoint);
  double train_iou = evaluate(best, data.train).mean_iou();
  fs::remove_all(work);

  detail = fmt(
      "single-shape overfit (8 train windows): FCN train mean IoU %.4f after "
      "%lld optimizer steps at lr 1e-3 (need >= 0.95 within 500)",
      train_iou, (long long)r.steps);
  return train_iou >= 0.95 && r.steps <= 500;
}

// ---------------------------------------------------------------------------
// 6. confusion-matrix metrics vs brute-force recount

bool criterion6(std::string& detail) {
  double worst = 0;
  ConfusionMatrix all(5);
  std::vector<LabelMask> preds, gts;
  for (uint64_t i = 0; i < 100; ++i) {
    LabelMask pred = testing::random_mask(23, 31, 5, 900 + 2 * i);
    LabelMask gt = testing::random_mask(23, 31, 5, 901 + 2 * i);
    ConfusionMatrix cm(5);
    cm.update(pred, gt);
    all.update(pred, gt);
    preds.push_back(pred);
    gts.push_back(gt);

    auto brute = testing::brute_force_metrics({pred}, {gt}, 5);
    for (int64_t c = 0; c < 5; ++c) {
      int64_t tp = cm.at(c, c), fp = 0, fn = 0;
      for (int64_t o = 0; o < 5; ++o) {
        if (o != c) fp += cm.at(o, c);
        if (o != c) fn += cm.at(c, o);
      }
      if (tp != brute.tp[c] || fp != brute.fp[c] || fn != brute.fn[c]) {
        detail = fmt("integer count mismatch at pair %llu class %lld",
                     (unsigned long long)i, (long long)c);
        return false;
      }
      if (auto iou = cm.iou(c))
        worst = std::max(worst, std::abs(*iou - brute.iou[c]));
    }
    worst = std::max(worst, std::abs(cm.mean_iou() - brute.mean_iou));
    worst =
        std::max(worst, std::abs(cm.pixel_accuracy() - brute.pixel_accuracy));
  }
  auto brute_all = testing::brute_force_metrics(preds, gts, 5);
  worst = std::max(worst, std::abs(all.mean_iou() - brute_all.mean_iou));
  worst = std::max(
      worst, std::abs(all.pixel_accuracy() - brute_all.pixel_accuracy));

  detail = fmt(
      "confusion-matrix metrics equal the brute-force per-pixel recount on "
      "100 random mask pairs: exact integer counts, max IoU/accuracy diff "
      "%.2e (need <= 1e-12)",
      worst);
  return worst <= 1e-12;
}

// ---------------------------------------------------------------------------
// 7. scalar oracles: conv2d, ConvLSTM, Adam

bool criterion7(std::string& detail) {
  double conv_diff = 0;
  {
    struct {
      int64_t stride, pad;
    } geoms[] = {{1, 1}, {2, 1}, {1, 0}};
    uint64_t seed = 700;
    for (auto [stride, pad] : geoms) {
      Tensor x = testing::random_tensor<float>(Shape4(2, 3, 8, 8), seed++);
      Tensor w = testing::random_tensor<float>(Shape4(4, 3, 3, 3), seed++, 0.4);
      Tensor b = testing::random_tensor<float>(Shape4(4, 1, 1, 1), seed++);
      conv_diff = std::max(
          conv_diff,
          testing::max_abs_diff(conv2d_forward(x, w, b, stride, pad),
                                testing::conv2d_direct(x, w, b, stride, pad)));
    }
  }

  double lstm_diff = 0;
  {
    // hidden = input = 1 channel at 1x1 spatial: with pad 1 only the center
    // taps see data, so the cell must reduce to the scalar LSTM
    testing::ScalarLstmWeights sw{};
    Rng rng(710);
    for (int gate = 0; gate < 4; ++gate) {
      sw.wi[gate] = rng.normal() * 0.5;
      sw.wh[gate] = rng.normal() * 0.5;
      sw.b[gate] = rng.normal() * 0.1;
    }
    TensorT<float> w(Shape4(4, 2, 3, 3));
    TensorT<float> b(Shape4(4, 1, 1, 1));
    for (auto& v : w.data) v = static_cast<float>(rng.normal());  // junk taps
    for (int64_t gate = 0; gate < 4; ++gate) {
      w.at(gate, 0, 1, 1) = static_cast<float>(sw.wi[gate]);
      w.at(gate, 1, 1, 1) = static_cast<float>(sw.wh[gate]);
      b.data[static_cast<size_t>(gate)] = static_cast<float>(sw.b[gate]);
    }
    ConvLstmState state{TensorT<float>(Shape4(1, 1, 1, 1)),
                        TensorT<float>(Shape4(1, 1, 1, 1))};
    testing::ScalarLstmState ref;
    for (int step = 0; step < 5; ++step) {
      double xv = rng.normal();
      TensorT<float> x(Shape4(1, 1, 1, 1));
      x.data[0] = static_cast<float>(xv);
      state = conv_lstm_step(x, state, w, b);
      ref = testing::scalar_lstm_step(xv, ref, sw);
      lstm_diff = std::max(lstm_diff, std::abs(state.h.data[0] - ref.h));
      lstm_diff = std::max(lstm_diff, std::abs(state.c.data[0] - ref.c));
    }
  }

  double adam_diff = 0;
  {
    ParamStore params;
    params.add("a", testing::random_tensor<float>(Shape4(3, 2, 1, 1), 720));
    params.add("b", testing::random_tensor<float>(Shape4(2, 1, 2, 2), 721));
    AdamState state = make_adam_state(params);
    std::vector<std::vector<testing::ScalarAdam>> ref(params.size());
    std::vector<std::vector<float>> theta(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      ref[i].resize(params[i].value.data.size());
      theta[i] = params[i].value.data;
    }
    Rng rng(722);
    AdamConfig cfg;
    for (int step = 0; step < 10; ++step) {
      for (size_t i = 0; i < params.size(); ++i)
        for (auto& gv : params[i].grad.data)
          gv = static_cast<float>(rng.normal());
      adam_step(params, state, cfg);
      for (size_t i = 0; i < params.size(); ++i)
        for (size_t k = 0; k < theta[i].size(); ++k) {
          theta[i][k] = ref[i][k].step(
              theta[i][k], static_cast<double>(params[i].grad.data[k]),
              cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
          adam_diff = std::max(
              adam_diff,
              std::abs((double)theta[i][k] - (double)params[i].value.data[k]));
        }
    }
  }

  detail = fmt(
      "scalar oracles: conv2d vs direct loop %.2e (<= 1e-5), ConvLSTM vs "
      "scalar LSTM %.2e (<= 1e-5), Adam vs scalar Adam over 10 steps %.2e "
      "(<= 1e-7)",
      conv_diff, lstm_diff, adam_diff);
  return conv_diff <= 1e-5 && lstm_diff <= 1e-5 && adam_diff <= 1e-7;
}

// ---------------------------------------------------------------------------
// 8. determinism & persistence

bool criterion8(std::string& detail) {
  // (a) same config + seed => byte-identical dataset trees
  SceneConfig scene;
  scene.height = 64;
  scene.width = 96;
  scene.num_classes = 3;
  scene.sequence_length = 3;
  fs::path da = fresh_dir("det_data_a"), db = fresh_dir("det_data_b");
  write_dataset(da.string(), scene, 5, 6);
  write_dataset(db.string(), scene, 5, 6);
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(da))
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), da));
  std::sort(rel.begin(), rel.end());
  if (rel.empty()) {
    detail = "dataset writer produced no files";
    return false;
  }
  for (const auto& r : rel)
    if (!fs::exists(db / r) || read_bytes(da / r) != read_bytes(db / r)) {
      detail = fmt("dataset file %s differs between identical runs",
                   r.string().c_str());
      return false;
    }

  // (b) same config + seed => identical reports and checkpoint bytes
  SceneConfig tiny;
  tiny.height = 32;
  tiny.width = 32;
  tiny.num_classes = 2;
  tiny.max_objects = 1;
  tiny.sequence_length = 3;
  tiny.speed_min = 0.5;
  tiny.speed_max = 1.5;
  tiny.scroll_y = 0;
  tiny.scroll_x = 0;
  tiny.size_min = 5;
  tiny.size_max = 8;
  DatasetSplits data = make_dataset(tiny, 9, 4, 1);
  ModelSpec spec;
  spec.kind = ModelKind::FCN;
  spec.order = 1;
  spec.num_classes = 2;
  spec.encoder.stage_channels = {4, 6, 8};
  spec.encoder.blocks_per_stage = 1;
  spec.input_height = 32;
  spec.input_width = 32;
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 3;
  cfg.patience = 3;
  cfg.seed = 5;
  fs::path ta = fresh_dir("det_train_a"), tb = fresh_dir("det_train_b");
  Model ma = build(spec, 6), mb = build(spec, 6);
  TrainReport ra = train(ma, data, cfg, ta.string());
  TrainReport rb = train(mb, data, cfg, tb.string());
  nlohmann::json ja = train_report_to_json(ra, ma, cfg);
  nlohmann::json jb = train_report_to_json(rb, mb, cfg);
  // checkpoint paths embed the caller-chosen out_dir; everything else must
  // match bit for bit
  for (auto* j : {&ja, &jb}) {
    j->erase("best_checkpoint");
    j->erase("last_checkpoint");
  }
  if (ja.dump() != jb.dump()) {
    detail = "training reports differ between identical runs";
    return false;
  }
  for (const char* name : {"best.ckpt", "last.ckpt"})
    if (read_bytes(ta / name) != read_bytes(tb / name)) {
      detail = fmt("%s differs between identical runs", name);
      return false;
    }

  // (c) save -> load -> forward is bit-exact
  ModelSpec rspec = spec;
  rspec.kind = ModelKind::RFCN;
  rspec.order = 2;
  rspec.num_classes = 3;
  Model rm = build(rspec, 77);
  std::vector<Tensor> frames{
      testing::random_tensor<float>(Shape4(1, 3, 32, 32), 800, 0.5),
      testing::random_tensor<float>(Shape4(1, 3, 32, 32), 801, 0.5)};
  Tensor before = forward(rm, frames);
  fs::path ck = fresh_dir("det_ckpt") / "model.ckpt";
  save_checkpoint(rm, ck.string());
  Model loaded = load_checkpoint(ck.string());
  Tensor after = forward(loaded, frames);
  bool bit_exact = before.data == after.data;
  fs::path ck2 = ck.parent_path() / "resaved.ckpt";
  save_checkpoint(loaded, ck2.string());
  bool bytes_equal = read_bytes(ck) == read_bytes(ck2);
  for (const auto& d : {da, db, ta, tb, ck.parent_path()}) fs::remove_all(d);
  if (!bit_exact || !bytes_equal) {
    detail = "checkpoint save->load round trip is not bit-exact";
    return false;
  }

  detail = fmt(
      "identical config+seed give byte-identical dataset trees (%zu files), "
      "training reports, and checkpoints; save->load->forward is bit-exact",
      rel.size());
  return true;
}

// ---------------------------------------------------------------------------
// 9. early-stopping contract, exhaustive over short series

struct StopRef {
  int64_t stop_epoch = 0;  // 0 = ran to the end
  int64_t best_epoch = 0;
  double best_value = 0;
};

StopRef stop_reference(const std::vector<double>& values, int64_t patience) {
  StopRef ref;
  double best = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < values.size(); ++i) {
    int64_t epoch = static_cast<int64_t>(i) + 1;
    if (values[i] > best) {
      best = values[i];
      ref.best_epoch = epoch;
      ref.best_value = values[i];
    }
    if (epoch - ref.best_epoch >= patience) {
      ref.stop_epoch = epoch;
      return ref;
    }
  }
  return ref;
}

bool criterion9(std::string& detail) {
  const double alphabet[] = {0.1, 0.2, 0.3, 0.4};
  int64_t checked = 0;
  for (int64_t patience = 1; patience <= 4; ++patience)
    for (int64_t len = 1; len <= 8; ++len) {
      std::vector<size_t> digits(len, 0);
      while (true) {
        std::vector<double> series(len);
        for (int64_t i = 0; i < len; ++i) series[i] = alphabet[digits[i]];

        StopRef ref = stop_reference(series, patience);
        EarlyStopping stopper(patience);
        int64_t stopped_at = 0;
        for (size_t i = 0; i < series.size(); ++i)
          if (stopper.update(series[i])) {
            stopped_at = static_cast<int64_t>(i) + 1;
            break;
          }
        ++checked;
        if (stopped_at != ref.stop_epoch ||
            stopper.best_epoch() != ref.best_epoch ||
            stopper.best_value() != ref.best_value) {
          std::string s;
          for (double v : series) s += fmt(" %.1f", v);
          detail = fmt(
              "series[%s ] patience %lld: stopped at %lld (expected %lld), "
              "best epoch %lld (expected %lld)",
              s.c_str(), (long long)patience, (long long)stopped_at,
              (long long)ref.stop_epoch, (long long)stopper.best_epoch(),
              (long long)ref.best_epoch);
          return false;
        }

        int64_t k = len - 1;
        while (k >= 0 && ++digits[k] == 4) digits[k--] = 0;
        if (k < 0) break;
      }
    }
  detail = fmt(
      "early stopping matches the declarative patience rule on all %lld "
      "value series (lengths 1..8, four-value alphabet, patience 1..4)",
      (long long)checked);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    int n = std::atoi(argv[i]);
    if (n < 1 || n > 9) {
      fprintf(stderr, "usage: %s [criterion numbers 1..9]\n", argv[0]);
      return 2;
    }
    wanted.insert(n);
  }

  struct Row {
    int num;
    bool (*fn)(std::string&);
  };
  const Row rows[] = {{1, criterion1}, {2, criterion2}, {3, criterion3},
                      {4, criterion4}, {5, criterion5}, {6, criterion6},
                      {7, criterion7}, {8, criterion8}, {9, criterion9}};

  bool all_ok = true;
  for (const Row& row : rows) {
    if (!wanted.empty() && !wanted.count(row.num)) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = row.fn(detail);
    } catch (const std::exception& e) {
      detail += fmt(" [unexpected exception: %s]", e.what());
    }
    printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", row.num,
           detail.c_str());
    fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
