#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mixcam/tensor.hpp"

namespace mixcam {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // classic L2: folded into the gradient
};

// Adam with bias correction over a fixed set of named parameters. Moments are
// exposed by name so checkpoints can round-trip optimizer state exactly.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, AdamConfig cfg);

  // Applies one update from the populated gradients, then leaves gradients
  // untouched (callers zero them). Errors if any parameter has no gradient.
  void step();

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
  Tensor moment1(const std::string& name) const;
  Tensor moment2(const std::string& name) const;

  // Checkpoint restore hooks.
  void set_moment1(const std::string& name, const Tensor& m);
  void set_moment2(const std::string& name, const Tensor& m);
  void set_step_count(std::uint64_t t) { step_ = t; }

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
};

}  // namespace mixcam
