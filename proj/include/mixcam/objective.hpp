#pragma once

#include "mixcam/classnet.hpp"
#include "mixcam/tensor.hpp"

namespace mixcam {

struct LossWeights {
  double lambda_ent = 0.02;
  double lambda_con = 2e-4;

  void validate() const;
};

struct LossBreakdown {
  double cls = 0.0, ent = 0.0, con = 0.0, total = 0.0;
};

// Mean over classes of binary cross-entropy between sigmoid(logit_c) and the
// (possibly soft) target. Differentiable in the logits.
Tensor classification_loss(const Tensor& logits, const Tensor& soft_label);

// Mean per-position Shannon entropy of P [C,H,W] (natural log, probabilities
// clamped at 1e-12 inside the log). Errors when any position's class
// distribution is off 1 by more than 1e-6.
Tensor entropy_loss(const Tensor& class_probability);

// Response-mass-weighted squared distance to the per-class response centroid,
// summed over the valid classes. Coordinates are normalized to [0,1]; each
// class plane is relu'd and sum-normalized into a spatial probability map
// (planes with vanishing mass contribute zero).
Tensor concentration_loss(const ResponseMap& map);

LossBreakdown total_loss(double cls, double ent, double con, const LossWeights& w);

// Graph-building counterpart used by the trainer; fills `out` from the
// forward values when non-null.
Tensor total_loss_graph(const Tensor& cls, const Tensor& ent, const Tensor& con,
                        const LossWeights& w, LossBreakdown* out = nullptr);

}  // namespace mixcam
