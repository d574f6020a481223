#include "mixcam/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mixcam/synthdata.hpp"

namespace mixcam {

void PseudoLabelConfig::validate() const {
  if (!(tau_bg > 0.0 && tau_bg < 1.0)) {
    fail(ErrorCategory::config, "pseudo-labels: tau_bg must lie in (0,1)");
  }
}

PseudoLabelResult pseudo_labels(const ResponseMap& map, const PseudoLabelConfig& cfg,
                                std::size_t out_h, std::size_t out_w) {
  cfg.validate();
  if (!map.normalized.defined()) {
    fail(ErrorCategory::state, "pseudo_labels: normalized map not computed");
  }
  PseudoLabelResult result;
  result.mask = Mask(out_h, out_w);
  if (map.valid.empty()) {
    result.empty_valid_warning = true;
    return result;
  }
  const std::size_t hf = map.normalized.shape()[1], wf = map.normalized.shape()[2];
  const std::size_t out_hw = out_h * out_w;

  std::vector<std::vector<double>> up;
  up.reserve(map.valid.size());
  for (std::size_t c : map.valid) {
    const double* plane = map.normalized.value().data() + c * hf * wf;
    up.push_back(cfg.mode == PseudoLabelConfig::Upsample::bilinear
                     ? resize_plane_bilinear(plane, hf, wf, out_h, out_w)
                     : resize_plane_nearest(plane, hf, wf, out_h, out_w));
  }
  for (std::size_t p = 0; p < out_hw; ++p) {
    double best = -1.0;
    std::size_t best_class = 0;
    for (std::size_t i = 0; i < map.valid.size(); ++i) {
      if (up[i][p] > best) {
        best = up[i][p];
        best_class = map.valid[i];
      }
    }
    result.mask.data[p] =
        best >= cfg.tau_bg ? static_cast<std::uint8_t>(best_class + 1) : 0;
  }
  return result;
}

IoUAccumulator::IoUAccumulator(std::size_t classes)
    : classes_(classes), inter_(classes + 1, 0), pred_(classes + 1, 0), truth_(classes + 1, 0) {}

void IoUAccumulator::add(const Mask& pred, const Mask& truth) {
  if (pred.height != truth.height || pred.width != truth.width) {
    fail(ErrorCategory::shape, "iou: mask extents differ (" + std::to_string(pred.width) + "x" +
                                   std::to_string(pred.height) + " vs " +
                                   std::to_string(truth.width) + "x" +
                                   std::to_string(truth.height) + ")");
  }
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const std::uint8_t p = pred.data[i], t = truth.data[i];
    if (p > classes_ || t > classes_) {
      fail(ErrorCategory::data, "iou: mask index exceeds class count");
    }
    ++pred_[p];
    ++truth_[t];
    if (p == t) ++inter_[p];
  }
}

void IoUAccumulator::merge(const IoUAccumulator& other) {
  if (other.classes_ != classes_) fail(ErrorCategory::shape, "iou: class count mismatch");
  for (std::size_t c = 0; c <= classes_; ++c) {
    inter_[c] += other.inter_[c];
    pred_[c] += other.pred_[c];
    truth_[c] += other.truth_[c];
  }
}

IoUReport IoUAccumulator::report() const {
  IoUReport r;
  r.iou.assign(classes_ + 1, 0.0);
  r.intersection_count.assign(classes_ + 1, 0);
  r.union_count.assign(classes_ + 1, 0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c <= classes_; ++c) {
    r.intersection_count[c] = inter_[c];
    r.union_count[c] = pred_[c] + truth_[c] - inter_[c];
    if (r.union_count[c] > 0) {
      r.iou[c] = static_cast<double>(inter_[c]) / static_cast<double>(r.union_count[c]);
      sum += r.iou[c];
      ++present;
    }
  }
  r.miou = present > 0 ? sum / static_cast<double>(present) : 0.0;
  return r;
}

IoUReport iou(const Mask& pred, const Mask& truth, std::size_t classes) {
  IoUAccumulator acc(classes);
  acc.add(pred, truth);
  return acc.report();
}

ResponseDiagnostics response_diagnostics(const ResponseMap& map, const Mask& truth) {
  if (!map.normalized.defined()) {
    fail(ErrorCategory::state, "response_diagnostics: normalized map not computed");
  }
  const std::size_t hf = map.normalized.shape()[1], wf = map.normalized.shape()[2];
  ResponseDiagnostics d;
  double coverage_sum = 0.0, uniformity_sum = 0.0;
  for (std::size_t c : map.valid) {
    const double* plane = map.normalized.value().data() + c * hf * wf;
    const auto up = resize_plane_bilinear(plane, hf, wf, truth.height, truth.width);
    std::size_t object = 0, covered = 0;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t p = 0; p < up.size(); ++p) {
      if (truth.data[p] != c + 1) continue;
      ++object;
      sum += up[p];
      sum2 += up[p] * up[p];
      if (up[p] >= 0.5) ++covered;
    }
    if (object == 0) continue;  // class without ground-truth pixels
    const double mean = sum / static_cast<double>(object);
    const double var = std::max(0.0, sum2 / static_cast<double>(object) - mean * mean);
    coverage_sum += static_cast<double>(covered) / static_cast<double>(object);
    uniformity_sum +=
        mean > 1e-12 ? std::clamp(1.0 - std::sqrt(var) / mean, 0.0, 1.0) : 0.0;
    ++d.classes_evaluated;
  }
  if (d.classes_evaluated > 0) {
    d.coverage = coverage_sum / static_cast<double>(d.classes_evaluated);
    d.uniformity = uniformity_sum / static_cast<double>(d.classes_evaluated);
  }
  return d;
}

std::string iou_report_csv(const IoUReport& report, std::size_t classes) {
  std::ostringstream os;
  os << "class,iou,intersection,union\n";
  for (std::size_t c = 0; c <= classes; ++c) {
    os << (c == 0 ? "background" : class_name(c - 1, classes)) << ",";
    if (report.union_count[c] > 0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", report.iou[c]);
      os << buf;
    }
    os << "," << report.intersection_count[c] << "," << report.union_count[c] << "\n";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", report.miou);
  os << "mean," << buf << ",,\n";
  return os.str();
}

std::string iou_report_table(const IoUReport& report, std::size_t classes) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-12s %8s %12s %12s\n", "class", "IoU", "intersection",
                "union");
  os << line;
  for (std::size_t c = 0; c <= classes; ++c) {
    const std::string name = c == 0 ? "background" : class_name(c - 1, classes);
    if (report.union_count[c] > 0) {
      std::snprintf(line, sizeof(line), "%-12s %8.4f %12llu %12llu\n", name.c_str(),
                    report.iou[c],
                    static_cast<unsigned long long>(report.intersection_count[c]),
                    static_cast<unsigned long long>(report.union_count[c]));
    } else {
      std::snprintf(line, sizeof(line), "%-12s %8s %12llu %12llu\n", name.c_str(), "-",
                    static_cast<unsigned long long>(report.intersection_count[c]),
                    static_cast<unsigned long long>(report.union_count[c]));
    }
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-12s %8.4f\n", "mean", report.miou);
  os << line;
  return os.str();
}

}  // namespace mixcam
