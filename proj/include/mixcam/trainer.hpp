#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mixcam/config.hpp"

namespace mixcam {

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  std::filesystem::path resume;   // empty: train from scratch
  bool quiet = true;
};

struct TrainResult {
  double val_accuracy = 0.0;  // exact-match multi-label accuracy, final epoch
  std::size_t steps = 0;
  bool diverged = false;
  std::size_t diverged_step = 0;
  std::filesystem::path final_checkpoint;
  std::string loss_log;  // CSV including header (also written to disk)
  std::shared_ptr<ClassNet> model;
};

// Online-mixup training: per step, sample a minibatch (partial final batches
// dropped), apply label-preserving augmentation, mix within the batch, take
// one Adam step on the combined objective. Checkpoints are written per epoch;
// a non-finite loss aborts the run with the offending step recorded and the
// last epoch checkpoint retained. Ground-truth masks are never read here.
TrainResult train_model(const RunConfig& cfg, const Dataset& train, const Dataset& val,
                        const TrainOptions& opts);

struct EvalSummary {
  IoUReport iou;
  double coverage = 0.0;
  double uniformity = 0.0;
  double exact_match_accuracy = 0.0;
  std::uint64_t background_pixels = 0;
};

// cam -> normalize -> pseudo-labels -> IoU + diagnostics over a split, with
// C-bar taken from each sample's image-level label.
EvalSummary evaluate_model(const ClassNet& net, const Dataset& split,
                           const PseudoLabelConfig& pseudo);

// Checkpoint helpers shared by the trainer, the CLI and the ablation harness.
void save_training_checkpoint(const std::filesystem::path& path, ClassNet& net,
                              const Adam& optimizer, std::size_t completed_epochs);
std::shared_ptr<ClassNet> load_model_checkpoint(const std::filesystem::path& path);

}  // namespace mixcam
