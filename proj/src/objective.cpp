#include "mixcam/objective.hpp"

#include <cmath>
#include <string>

#include "mixcam/ops.hpp"

namespace mixcam {

void LossWeights::validate() const {
  if (lambda_ent < 0.0 || lambda_con < 0.0) {
    fail(ErrorCategory::config, "loss weights must be >= 0");
  }
}

Tensor classification_loss(const Tensor& logits, const Tensor& soft_label) {
  if (!logits.defined() || !soft_label.defined() ||
      !same_shape(logits.shape(), soft_label.shape())) {
    fail(ErrorCategory::shape, "classification_loss: logits and labels must share a shape");
  }
  for (double y : soft_label.value()) {
    if (!(y >= 0.0 && y <= 1.0)) {
      fail(ErrorCategory::data,
           "classification_loss: label entry " + std::to_string(y) + " outside [0,1]");
    }
  }
  // Per class: BCE(sigmoid(z), y) = softplus(z) - z*y.
  return ops::mean_all(ops::sub(ops::softplus(logits), ops::mul(logits, soft_label)));
}

Tensor entropy_loss(const Tensor& class_probability) {
  if (!class_probability.defined() || class_probability.rank() != 3) {
    fail(ErrorCategory::shape, "entropy_loss: expected [C,H,W] probabilities");
  }
  const std::size_t c = class_probability.shape()[0];
  const std::size_t hw = class_probability.shape()[1] * class_probability.shape()[2];
  const auto p = class_probability.value();
  for (std::size_t j = 0; j < hw; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) sum += p[i * hw + j];
    if (std::abs(sum - 1.0) > 1e-6) {
      fail(ErrorCategory::numeric, "entropy_loss: position " + std::to_string(j) +
                                       " has class mass " + std::to_string(sum));
    }
  }
  Tensor plogp = ops::mul(class_probability, ops::log(ops::clamp_min(class_probability, 1e-12)));
  return ops::scalar_mul(ops::sum_all(plogp), -1.0 / static_cast<double>(hw));
}

Tensor concentration_loss(const ResponseMap& map) {
  if (!map.raw.defined() || map.raw.rank() != 3) {
    fail(ErrorCategory::state, "concentration_loss: raw map not computed");
  }
  if (map.valid.empty()) {
    fail(ErrorCategory::state, "concentration_loss: empty valid-class set");
  }
  const std::size_t classes = map.raw.shape()[0];
  const std::size_t h = map.raw.shape()[1], w = map.raw.shape()[2];

  // Normalized coordinate grids; a singleton axis maps to coordinate 0.
  std::vector<double> hcoord(h * w), wcoord(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const double hy = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      const double wx = w > 1 ? static_cast<double>(x) / static_cast<double>(w - 1) : 0.0;
      hcoord[y * w + x] = hy;
      wcoord[y * w + x] = wx;
    }
  }
  Tensor hgrid = Tensor::from_data({h, w}, hcoord);
  Tensor wgrid = Tensor::from_data({h, w}, wcoord);

  Tensor loss = Tensor::scalar(0.0);
  for (std::size_t c : map.valid) {
    if (c >= classes) {
      fail(ErrorCategory::shape, "concentration_loss: class " + std::to_string(c) +
                                     " out of range for " + std::to_string(classes) + " classes");
    }
    Tensor plane = ops::reshape(ops::slice(map.raw, 0, c, 1), {h, w});
    Tensor active = ops::relu(plane);
    Tensor mass = ops::sum_all(active);
    if (!(mass.item() > 1e-12)) continue;  // vanishing response contributes nothing
    Tensor prob = ops::div(active, ops::broadcast_to(ops::reshape(mass, {1, 1}), {h, w}));
    Tensor mu_h = ops::sum_all(ops::mul(hgrid, prob));
    Tensor mu_w = ops::sum_all(ops::mul(wgrid, prob));
    Tensor dh = ops::sub(hgrid, ops::broadcast_to(ops::reshape(mu_h, {1, 1}), {h, w}));
    Tensor dw = ops::sub(wgrid, ops::broadcast_to(ops::reshape(mu_w, {1, 1}), {h, w}));
    Tensor dist2 = ops::add(ops::mul(dh, dh), ops::mul(dw, dw));
    loss = ops::add(loss, ops::sum_all(ops::mul(dist2, prob)));
  }
  return loss;
}

LossBreakdown total_loss(double cls, double ent, double con, const LossWeights& w) {
  w.validate();
  LossBreakdown b;
  b.cls = cls;
  b.ent = ent;
  b.con = con;
  b.total = cls + w.lambda_ent * ent + w.lambda_con * con;
  return b;
}

Tensor total_loss_graph(const Tensor& cls, const Tensor& ent, const Tensor& con,
                        const LossWeights& w, LossBreakdown* out) {
  w.validate();
  Tensor total =
      ops::add(ops::add(cls, ops::scalar_mul(ent, w.lambda_ent)), ops::scalar_mul(con, w.lambda_con));
  if (out) {
    out->cls = cls.item();
    out->ent = ent.item();
    out->con = con.item();
    out->total = total.item();
  }
  return total;
}

}  // namespace mixcam
