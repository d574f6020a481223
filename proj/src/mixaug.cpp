#include "mixcam/mixaug.hpp"

#include <algorithm>
#include <cmath>

namespace mixcam {

void AugmentConfig::validate() const {
  if (!(alpha > 0.0)) fail(ErrorCategory::config, "augment: alpha must be > 0");
  if (flip_prob < 0.0 || flip_prob > 1.0) {
    fail(ErrorCategory::config, "augment: flip probability must lie in [0,1]");
  }
  if (!(crop_min > 0.0 && crop_min <= crop_max)) {
    fail(ErrorCategory::config, "augment: invalid crop range");
  }
  if (!(scale_min > 0.0 && scale_min <= scale_max)) {
    fail(ErrorCategory::config, "augment: invalid scale range");
  }
  if (color_jitter < 0.0) fail(ErrorCategory::config, "augment: color jitter must be >= 0");
}

double sample_lambda(double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0)) fail(ErrorCategory::config, "sample_lambda: alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (;;) {
    const double x = gamma(rng);
    const double y = gamma(rng);
    const double s = x + y;
    if (s > 0.0) return x / s;
  }
}

std::vector<std::size_t> MixupSample::valid_classes() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < label.size(); ++c) {
    if (label[c] > 0.0) out.push_back(c);
  }
  return out;
}

MixupSample mixup(const SceneSample& a, const SceneSample& b, double lambda) {
  if (!a.image.defined() || !b.image.defined() ||
      !same_shape(a.image.shape(), b.image.shape()) || a.label.size() != b.label.size()) {
    fail(ErrorCategory::shape, "mixup: source samples have mismatching shapes");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    fail(ErrorCategory::config, "mixup: lambda must lie in [0,1]");
  }
  MixupSample m;
  m.lambda = lambda;
  m.sources = {a.id, b.id};
  m.image = Tensor::zeros(a.image.shape());
  const auto av = a.image.value();
  const auto bv = b.image.value();
  auto ov = m.image.value_mut();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    ov[i] = lambda * av[i] + (1.0 - lambda) * bv[i];
  }
  m.label.resize(a.label.size());
  for (std::size_t c = 0; c < m.label.size(); ++c) {
    m.label[c] = lambda * a.label[c] + (1.0 - lambda) * b.label[c];
  }
  return m;
}

namespace {

void flip_horizontal(Tensor& image, Mask& mask) {
  const std::size_t h = image.shape()[1], w = image.shape()[2];
  auto v = image.value_mut();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      double* row = v.data() + (c * h + y) * w;
      std::reverse(row, row + w);
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    auto* row = mask.data.data() + y * w;
    std::reverse(row, row + w);
  }
}

Mask crop_mask(const Mask& m, std::size_t oy, std::size_t ox, std::size_t side) {
  Mask out(side, side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) out.at(y, x) = m.at(oy + y, ox + x);
  }
  return out;
}

Tensor crop_image(const Tensor& img, std::size_t oy, std::size_t ox, std::size_t side) {
  const std::size_t h = img.shape()[1], w = img.shape()[2];
  Tensor out = Tensor::zeros({3, side, side});
  const auto v = img.value();
  auto o = out.value_mut();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < side; ++y) {
      const double* src = v.data() + (c * h + oy + y) * w + ox;
      std::copy(src, src + side, o.data() + (c * side + y) * side);
    }
  }
  return out;
}

}  // namespace

SceneSample label_preserving_augment(const SceneSample& s, const AugmentConfig& cfg,
                                     std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t extent = s.image.shape()[1];

  // All random draws happen up front in a fixed order.
  std::uniform_real_distribution<double> scale_d(cfg.scale_min, cfg.scale_max);
  std::uniform_real_distribution<double> crop_d(cfg.crop_min, cfg.crop_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> jit(-cfg.color_jitter, cfg.color_jitter);
  const double scale = scale_d(rng);
  const double crop_frac = crop_d(rng);
  const double off_y = unit(rng), off_x = unit(rng);
  const bool flip = unit(rng) < cfg.flip_prob;
  double factor[3], offset[3];
  for (int c = 0; c < 3; ++c) {
    factor[c] = 1.0 + jit(rng);
    offset[c] = 0.5 * jit(rng);
  }

  const auto scaled_side = static_cast<std::size_t>(std::lround(scale * extent));
  const auto crop_side =
      static_cast<std::size_t>(std::lround(crop_frac * static_cast<double>(scaled_side)));
  if (crop_side > scaled_side || crop_side == 0) {
    fail(ErrorCategory::data, "augment: crop window larger than the image (crop fraction " +
                                  std::to_string(crop_frac) + ")");
  }

  SceneSample out;
  out.id = s.id;
  out.label = s.label;

  Tensor img = s.image;
  Mask mask = s.mask;
  if (scaled_side != extent) {
    img = resize_bilinear(img, scaled_side, scaled_side);
    mask = resize_nearest(mask, scaled_side, scaled_side);
  }
  const auto max_off = scaled_side - crop_side;
  const auto oy = static_cast<std::size_t>(std::floor(off_y * static_cast<double>(max_off + 1)));
  const auto ox = static_cast<std::size_t>(std::floor(off_x * static_cast<double>(max_off + 1)));
  if (crop_side != scaled_side || oy != 0 || ox != 0) {
    img = crop_image(img, std::min(oy, max_off), std::min(ox, max_off), crop_side);
    mask = crop_mask(mask, std::min(oy, max_off), std::min(ox, max_off), crop_side);
  }
  if (crop_side != extent) {
    img = resize_bilinear(img, extent, extent);
    mask = resize_nearest(mask, extent, extent);
  }
  // Flip and jitter mutate in place; detach from the source storage first.
  if (img.node() == s.image.node()) img = img.clone();
  if (flip) flip_horizontal(img, mask);

  if (cfg.color_jitter > 0.0) {
    auto v = img.value_mut();
    const std::size_t hw = extent * extent;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < hw; ++i) {
        v[c * hw + i] = std::clamp(v[c * hw + i] * factor[c] + offset[c], 0.0, 1.0);
      }
    }
  }

  out.image = std::move(img);
  out.mask = std::move(mask);
  return out;
}

}  // namespace mixcam
