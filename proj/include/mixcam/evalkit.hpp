#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixcam/classnet.hpp"
#include "mixcam/image.hpp"

namespace mixcam {

struct PseudoLabelConfig {
  double tau_bg = 0.25;
  enum class Upsample { nearest, bilinear } mode = Upsample::bilinear;

  void validate() const;
};

struct PseudoLabelResult {
  Mask mask;
  bool empty_valid_warning = false;  // empty C-bar: all-background output
};

// Upsamples each valid class's normalized map to the output extent and takes
// the per-pixel argmax over valid classes when it clears tau_bg, background
// otherwise. Classes outside C-bar are never predicted.
PseudoLabelResult pseudo_labels(const ResponseMap& map, const PseudoLabelConfig& cfg,
                                std::size_t out_h, std::size_t out_w);

struct IoUReport {
  // Indexed 0..classes with 0 = background. iou[c] is meaningful only where
  // union_count[c] > 0; miou averages exactly those classes.
  std::vector<double> iou;
  std::vector<std::uint64_t> intersection_count, union_count;
  double miou = 0.0;
};

// Confusion counts merge associatively, so evaluation parallelizes per sample
// and reduces in index order.
class IoUAccumulator {
 public:
  explicit IoUAccumulator(std::size_t classes);
  void add(const Mask& pred, const Mask& truth);
  void merge(const IoUAccumulator& other);
  IoUReport report() const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> inter_, pred_, truth_;
};

IoUReport iou(const Mask& pred, const Mask& truth, std::size_t classes);

struct ResponseDiagnostics {
  double coverage = 0.0;    // fraction of object pixels with response >= 0.5
  double uniformity = 0.0;  // 1 - std/mean over object pixels, clamped to [0,1]
  std::size_t classes_evaluated = 0;
};

// Consumes only the normalized view (scale-invariant by construction);
// classes without ground-truth pixels are skipped.
ResponseDiagnostics response_diagnostics(const ResponseMap& map, const Mask& truth);

std::string iou_report_csv(const IoUReport& report, std::size_t classes);
std::string iou_report_table(const IoUReport& report, std::size_t classes);

}  // namespace mixcam
