#pragma once

#include <span>
#include <string>
#include <vector>

#include "mixcam/trainer.hpp"

namespace mixcam {

// One loss configuration of the ablation grid.
struct AblationRow {
  std::string name;
  bool mixup = true;
  double lambda_ent = 0.0;
  double lambda_con = 0.0;
};

// The five-row grid: plain-CAM baseline (no mixing, no regularizers), mixup
// alone, mixup plus each regularizer, and the full objective.
std::vector<AblationRow> standard_ablation_rows(const LossWeights& weights);
const AblationRow* find_row(const std::vector<AblationRow>& rows, const std::string& name);

struct AblationCell {
  double mean = 0.0;
  double stddev = 0.0;  // sample std over seeds (0 for a single seed)
  std::vector<double> per_seed;
};

struct AblationResult {
  struct Row {
    std::string name;
    bool failed = false;  // training diverged for at least one seed
    AblationCell miou, coverage, uniformity;
  };
  std::vector<Row> rows;
  std::vector<std::uint64_t> seeds;
};

// Trains every (row, seed) pair with identical schedules and scores CAM
// pseudo-labels on the validation split. Divergent rows are marked failed and
// the grid continues.
AblationResult run_ablation(const Dataset& train, const Dataset& val, const RunConfig& base,
                            std::span<const AblationRow> rows,
                            std::span<const std::uint64_t> seeds);

// 1-D parameter sweep (alpha / lambda_ent / lambda_con) on the full objective.
AblationResult run_sweep(const Dataset& train, const Dataset& val, const RunConfig& base,
                         const std::string& parameter, std::span<const double> values,
                         std::span<const std::uint64_t> seeds);

std::string ablation_csv(const AblationResult& r);
std::string ablation_table(const AblationResult& r);

}  // namespace mixcam
