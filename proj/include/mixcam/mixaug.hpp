#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mixcam/synthdata.hpp"
#include "mixcam/tensor.hpp"

namespace mixcam {

struct AugmentConfig {
  double alpha = 0.2;  // Beta(alpha, alpha) shape for the mixing coefficient
  double flip_prob = 0.5;
  double crop_min = 0.8, crop_max = 1.0;    // crop side as a fraction of the image
  double scale_min = 1.0, scale_max = 1.25;  // resample factor applied before cropping
  double color_jitter = 0.10;
  std::uint64_t seed = 0;  // base for per-worker rng streams

  void validate() const;
};

// Beta(alpha, alpha) via the gamma ratio X/(X+Y), X,Y ~ Gamma(alpha, 1).
double sample_lambda(double alpha, std::mt19937_64& rng);

struct MixupSample {
  Tensor image;               // I' = lambda*I1 + (1-lambda)*I2
  std::vector<double> label;  // Y' = lambda*Y1 + (1-lambda)*Y2
  double lambda = 1.0;
  std::pair<std::uint64_t, std::uint64_t> sources{0, 0};

  // C-bar: classes with positive soft-label mass.
  std::vector<std::size_t> valid_classes() const;
};

MixupSample mixup(const SceneSample& a, const SceneSample& b, double lambda);

// Flip / scale / crop / color jitter; the label is untouched and the mask is
// transformed geometrically in lockstep.
SceneSample label_preserving_augment(const SceneSample& s, const AugmentConfig& cfg,
                                     std::mt19937_64& rng);

}  // namespace mixcam
