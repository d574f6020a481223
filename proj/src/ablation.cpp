#include "mixcam/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace mixcam {
namespace {

AblationCell make_cell(std::vector<double> values) {
  AblationCell c;
  c.per_seed = std::move(values);
  if (c.per_seed.empty()) return c;
  double sum = 0.0;
  for (double v : c.per_seed) sum += v;
  c.mean = sum / static_cast<double>(c.per_seed.size());
  if (c.per_seed.size() > 1) {
    double ss = 0.0;
    for (double v : c.per_seed) ss += (v - c.mean) * (v - c.mean);
    c.stddev = std::sqrt(ss / static_cast<double>(c.per_seed.size() - 1));
  }
  return c;
}

AblationResult::Row run_row(const Dataset& train, const Dataset& val, const RunConfig& base,
                            const AblationRow& row, std::span<const std::uint64_t> seeds) {
  AblationResult::Row out;
  out.name = row.name;
  std::vector<double> miou, coverage, uniformity;
  for (std::uint64_t seed : seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.data.seed = base.data.seed;  // the dataset is shared across the grid
    cfg.mixup = row.mixup;
    cfg.loss.lambda_ent = row.lambda_ent;
    cfg.loss.lambda_con = row.lambda_con;
    TrainResult tr = train_model(cfg, train, val, TrainOptions{});
    if (tr.diverged) {
      out.failed = true;
      continue;
    }
    EvalSummary summary = evaluate_model(*tr.model, val, cfg.pseudo);
    miou.push_back(summary.iou.miou);
    coverage.push_back(summary.coverage);
    uniformity.push_back(summary.uniformity);
  }
  out.miou = make_cell(std::move(miou));
  out.coverage = make_cell(std::move(coverage));
  out.uniformity = make_cell(std::move(uniformity));
  return out;
}

}  // namespace

std::vector<AblationRow> standard_ablation_rows(const LossWeights& weights) {
  return {
      {"baseline", false, 0.0, 0.0},
      {"mixup", true, 0.0, 0.0},
      {"mixup_ent", true, weights.lambda_ent, 0.0},
      {"mixup_con", true, 0.0, weights.lambda_con},
      {"full", true, weights.lambda_ent, weights.lambda_con},
  };
}

const AblationRow* find_row(const std::vector<AblationRow>& rows, const std::string& name) {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

AblationResult run_ablation(const Dataset& train, const Dataset& val, const RunConfig& base,
                            std::span<const AblationRow> rows,
                            std::span<const std::uint64_t> seeds) {
  if (rows.empty() || seeds.empty()) {
    fail(ErrorCategory::config, "ablation: need at least one row and one seed");
  }
  AblationResult result;
  result.seeds.assign(seeds.begin(), seeds.end());
  for (const AblationRow& row : rows) {
    result.rows.push_back(run_row(train, val, base, row, seeds));
  }
  return result;
}

AblationResult run_sweep(const Dataset& train, const Dataset& val, const RunConfig& base,
                         const std::string& parameter, std::span<const double> values,
                         std::span<const std::uint64_t> seeds) {
  if (values.empty()) fail(ErrorCategory::config, "sweep: no values given");
  std::vector<AblationRow> rows;
  for (double v : values) {
    AblationRow row;
    row.mixup = true;
    row.lambda_ent = base.loss.lambda_ent;
    row.lambda_con = base.loss.lambda_con;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s=%g", parameter.c_str(), v);
    row.name = buf;
    rows.push_back(row);
  }
  AblationResult result;
  result.seeds.assign(seeds.begin(), seeds.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunConfig cfg = base;
    if (parameter == "alpha") {
      cfg.augment.alpha = values[i];
    } else if (parameter == "lambda_ent") {
      cfg.loss.lambda_ent = values[i];
    } else if (parameter == "lambda_con") {
      cfg.loss.lambda_con = values[i];
    } else {
      fail(ErrorCategory::config,
           "sweep: unknown parameter '" + parameter + "' (alpha|lambda_ent|lambda_con)");
    }
    AblationRow row = rows[i];
    row.lambda_ent = cfg.loss.lambda_ent;
    row.lambda_con = cfg.loss.lambda_con;
    result.rows.push_back(run_row(train, val, cfg, row, seeds));
  }
  return result;
}

std::string ablation_csv(const AblationResult& r) {
  std::ostringstream os;
  os << "configuration,seeds,miou_mean,miou_std,coverage_mean,coverage_std,"
        "uniformity_mean,uniformity_std,failed\n";
  for (const auto& row : r.rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                  row.name.c_str(), r.seeds.size(), row.miou.mean, row.miou.stddev,
                  row.coverage.mean, row.coverage.stddev, row.uniformity.mean,
                  row.uniformity.stddev, row.failed ? 1 : 0);
    os << buf;
  }
  return os.str();
}

std::string ablation_table(const AblationResult& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %18s %18s %18s\n", "configuration",
                "mIoU", "coverage", "uniformity");
  os << line;
  for (const auto& row : r.rows) {
    if (row.failed) {
      std::snprintf(line, sizeof(line), "%-14s %18s %18s %18s\n", row.name.c_str(), "failed",
                    "failed", "failed");
    } else {
      std::snprintf(line, sizeof(line), "%-14s %9.4f +- %.4f %8.4f +- %.4f %8.4f +- %.4f\n",
                    row.name.c_str(), row.miou.mean, row.miou.stddev, row.coverage.mean,
                    row.coverage.stddev, row.uniformity.mean, row.uniformity.stddev);
    }
    os << line;
  }
  return os.str();
}

}  // namespace mixcam
