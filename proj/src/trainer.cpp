#include "mixcam/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mixcam/adam.hpp"
#include "mixcam/ops.hpp"
#include "mixcam/parallel.hpp"
#include "mixcam/rng.hpp"

namespace mixcam {
namespace {

constexpr std::uint64_t kShuffleSalt = 0x50FF1E;
constexpr std::uint64_t kStepSalt = 0x57E9;

std::string checkpoint_name(std::size_t epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_epoch_%03zu.mxcm", epoch);
  return buf;
}

void append_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::app);
  if (!os) fail(ErrorCategory::io, "trainer: cannot append to '" + path.string() + "'");
  os << text;
}

}  // namespace

void save_training_checkpoint(const std::filesystem::path& path, ClassNet& net,
                              const Adam& optimizer, std::size_t completed_epochs) {
  NamedTensors ckpt;
  for (auto& [name, p] : net.parameters()) ckpt.put(name, p.clone());
  for (auto& [name, p] : net.parameters()) {
    ckpt.put("adam/m/" + name, optimizer.moment1(name).clone());
    ckpt.put("adam/v/" + name, optimizer.moment2(name).clone());
  }
  ckpt.put("adam/step", Tensor::from_data({1}, {static_cast<double>(optimizer.step_count())}));
  ckpt.put("meta/epoch", Tensor::from_data({1}, {static_cast<double>(completed_epochs)}));
  net.describe(ckpt);
  save_checkpoint(path, ckpt);
}

std::shared_ptr<ClassNet> load_model_checkpoint(const std::filesystem::path& path) {
  NamedTensors ckpt = load_checkpoint(path);
  auto net = std::make_shared<ClassNet>(ClassNet::config_from_meta(ckpt), 0);
  net->load_parameters(ckpt);
  return net;
}

TrainResult train_model(const RunConfig& cfg, const Dataset& train, const Dataset& val,
                        const TrainOptions& opts) {
  cfg.validate();
  if (train.samples.empty()) fail(ErrorCategory::data, "trainer: empty training split");
  if (train.classes != cfg.model.classes) {
    fail(ErrorCategory::data, "trainer: dataset has " + std::to_string(train.classes) +
                                  " classes, config expects " +
                                  std::to_string(cfg.model.classes));
  }
  const std::size_t batch = std::min(cfg.batch_size, train.samples.size());
  const std::size_t steps_per_epoch = train.samples.size() / batch;  // drop partial batch
  if (steps_per_epoch == 0) fail(ErrorCategory::data, "trainer: batch larger than dataset");

  TrainResult result;
  result.model = std::make_shared<ClassNet>(cfg.model, cfg.seed);
  ClassNet& net = *result.model;

  AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  acfg.weight_decay = cfg.weight_decay;
  Adam optimizer(net.parameters(), acfg);

  std::size_t start_epoch = 0;
  if (!opts.resume.empty()) {
    NamedTensors ckpt = load_checkpoint(opts.resume);
    net.load_parameters(ckpt);
    for (auto& [name, p] : net.parameters()) {
      optimizer.set_moment1(name, ckpt.require("adam/m/" + name));
      optimizer.set_moment2(name, ckpt.require("adam/v/" + name));
    }
    optimizer.set_step_count(
        static_cast<std::uint64_t>(ckpt.require("adam/step").value()[0]));
    start_epoch = static_cast<std::size_t>(ckpt.require("meta/epoch").value()[0]);
    if (start_epoch >= cfg.epochs) {
      fail(ErrorCategory::state, "trainer: checkpoint already covers " +
                                     std::to_string(start_epoch) + " of " +
                                     std::to_string(cfg.epochs) + " epochs");
    }
  }

  const bool to_disk = !opts.out_dir.empty();
  std::filesystem::path loss_path;
  if (to_disk) {
    std::filesystem::create_directories(opts.out_dir);
    std::ofstream cfg_os(opts.out_dir / "resolved.cfg");
    cfg_os << serialize_config(cfg);
    loss_path = opts.out_dir / "loss.csv";
  }
  std::ostringstream log;
  if (start_epoch == 0) {
    log << "step,cls,ent,con,total,lambda_mix\n";
  }

  std::vector<std::size_t> order(train.samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto shuffle_rng = make_rng(cfg.seed, kShuffleSalt, epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      auto step_rng = make_rng(cfg.seed, kStepSalt, epoch, step);

      // Mixing coefficient (one per step) and the in-batch partner shuffle.
      double lambda = 1.0;
      std::vector<std::size_t> partner(batch);
      std::iota(partner.begin(), partner.end(), 0);
      if (cfg.mixup) {
        lambda = sample_lambda(cfg.augment.alpha, step_rng);
        std::shuffle(partner.begin(), partner.end(), step_rng);
      }

      // Label-preserving augmentation runs per source sample, before mixing.
      std::vector<SceneSample> augmented(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        const SceneSample& src = train.samples[order[step * batch + i]];
        augmented[i] = label_preserving_augment(src, cfg.augment, step_rng);
      }

      Tape tape;
      Tensor cls_sum = Tensor::scalar(0.0);
      Tensor ent_sum = Tensor::scalar(0.0);
      Tensor con_sum = Tensor::scalar(0.0);
      for (std::size_t i = 0; i < batch; ++i) {
        MixupSample mixed = cfg.mixup
                                ? mixup(augmented[i], augmented[partner[i]], lambda)
                                : mixup(augmented[i], augmented[i], 1.0);
        Tensor target = Tensor::from_data({mixed.label.size()}, mixed.label);
        Tensor features = net.extract_features(mixed.image);
        Tensor logits = net.classify(features);
        cls_sum = ops::add(cls_sum, classification_loss(logits, target));

        ResponseMap map;
        map.raw = net.cam_from_features(features);
        map.valid = mixed.valid_classes();
        ent_sum = ops::add(ent_sum, entropy_loss(spatial_class_probability(map)));
        con_sum = ops::add(con_sum, concentration_loss(map));
      }
      const double inv_batch = 1.0 / static_cast<double>(batch);
      LossBreakdown breakdown;
      Tensor total = total_loss_graph(ops::scalar_mul(cls_sum, inv_batch),
                                      ops::scalar_mul(ent_sum, inv_batch),
                                      ops::scalar_mul(con_sum, inv_batch), cfg.loss, &breakdown);

      const std::size_t global_step = epoch * steps_per_epoch + step;
      char row[192];
      std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", global_step,
                    breakdown.cls, breakdown.ent, breakdown.con, breakdown.total, lambda);
      log << row;

      if (!std::isfinite(breakdown.total)) {
        result.diverged = true;
        result.diverged_step = global_step;
        result.loss_log += log.str();
        if (to_disk) {
          append_file(loss_path, log.str());
          std::ofstream note(opts.out_dir / "divergence.txt");
          note << "non-finite loss at step " << global_step << "\n";
        }
        return result;
      }

      tape.backward(total);
      optimizer.step();
      for (auto& [name, p] : net.parameters()) p.zero_grad();
      ++result.steps;
    }

    result.loss_log += log.str();
    if (to_disk) {
      append_file(loss_path, log.str());
      result.final_checkpoint = opts.out_dir / checkpoint_name(epoch + 1);
      save_training_checkpoint(result.final_checkpoint, net, optimizer, epoch + 1);
    }
    log.str("");
  }

  if (!val.samples.empty()) {
    EvalSummary summary = evaluate_model(net, val, cfg.pseudo);
    result.val_accuracy = summary.exact_match_accuracy;
    if (to_disk) {
      std::ofstream os(opts.out_dir / "summary.txt");
      char buf[128];
      std::snprintf(buf, sizeof(buf), "final_val_accuracy = %.6f\nsteps = %zu\n",
                    result.val_accuracy, result.steps);
      os << buf;
    }
  }
  return result;
}

EvalSummary evaluate_model(const ClassNet& net, const Dataset& split,
                           const PseudoLabelConfig& pseudo) {
  pseudo.validate();
  const std::size_t classes = net.config().classes;
  if (split.classes != classes) {
    fail(ErrorCategory::data, "evaluate: dataset has " + std::to_string(split.classes) +
                                  " classes, model expects " + std::to_string(classes));
  }

  struct PerSample {
    IoUAccumulator acc{0};
    double coverage = 0.0, uniformity = 0.0;
    std::size_t diag_classes = 0;
    bool exact = false;
    std::uint64_t background = 0;
  };
  std::vector<PerSample> rows(split.samples.size());

  parallel_for(split.samples.size(), [&](std::size_t i) {
    const SceneSample& s = split.samples[i];
    std::vector<std::size_t> valid;
    for (std::size_t c = 0; c < s.label.size(); ++c) {
      if (s.label[c] > 0.0) valid.push_back(c);
    }
    ResponseMap map = cam_normalized(net.cam_raw(s.image, valid));
    PseudoLabelResult pl = pseudo_labels(map, pseudo, s.mask.height, s.mask.width);

    PerSample row;
    row.acc = IoUAccumulator(classes);
    row.acc.add(pl.mask, s.mask);
    const ResponseDiagnostics d = response_diagnostics(map, s.mask);
    row.coverage = d.coverage;
    row.uniformity = d.uniformity;
    row.diag_classes = d.classes_evaluated;
    for (std::uint8_t px : pl.mask.data) row.background += px == 0 ? 1 : 0;

    Tensor logits = net.logits(s.image);
    bool exact = true;
    for (std::size_t c = 0; c < classes; ++c) {
      const bool predicted = logits.value()[c] > 0.0;  // sigmoid(z) > 0.5
      if (predicted != (s.label[c] > 0.0)) exact = false;
    }
    row.exact = exact;
    rows[i] = std::move(row);
  });

  EvalSummary out;
  IoUAccumulator acc(classes);
  double cov = 0.0, uni = 0.0;
  std::size_t diag_rows = 0, exact = 0;
  for (const PerSample& row : rows) {
    acc.merge(row.acc);
    if (row.diag_classes > 0) {
      cov += row.coverage;
      uni += row.uniformity;
      ++diag_rows;
    }
    exact += row.exact ? 1 : 0;
    out.background_pixels += row.background;
  }
  out.iou = acc.report();
  if (diag_rows > 0) {
    out.coverage = cov / static_cast<double>(diag_rows);
    out.uniformity = uni / static_cast<double>(diag_rows);
  }
  out.exact_match_accuracy =
      split.samples.empty() ? 0.0
                            : static_cast<double>(exact) /
                                  static_cast<double>(split.samples.size());
  return out;
}

}  // namespace mixcam
