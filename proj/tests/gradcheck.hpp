#pragma once

// Central finite-difference oracle for gradient checks. Test-only code,
// deliberately independent of the tape's backward implementation.

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mixcam/tensor.hpp"

namespace gc {

using mixcam::Shape;
using mixcam::Tape;
using mixcam::Tensor;

using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct Options {
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_floor = 1e-7;
};

// No tape active: ops compute forward values only.
inline double eval_scalar(const LossFn& fn, const std::vector<Tensor>& xs) {
  return fn(xs).item();
}

inline void check_gradients(const LossFn& fn, std::vector<Tensor> xs, Options opt = {}) {
  std::vector<std::vector<double>> analytic(xs.size());
  {
    Tape tape;
    Tensor loss = fn(xs);
    REQUIRE(loss.size() == 1);
    tape.backward(loss);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!xs[i].requires_grad()) continue;
      REQUIRE(xs[i].has_grad());
      analytic[i].assign(xs[i].grad().begin(), xs[i].grad().end());
      xs[i].zero_grad();
    }
  }

  std::size_t checked = 0, fails = 0;
  std::string first_fail;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs[i].requires_grad()) continue;
    auto v = xs[i].value_mut();
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double orig = v[j];
      v[j] = orig + opt.step;
      const double lp = eval_scalar(fn, xs);
      v[j] = orig - opt.step;
      const double lm = eval_scalar(fn, xs);
      v[j] = orig;
      const double fd = (lp - lm) / (2.0 * opt.step);
      const double an = analytic[i][j];
      const double tol =
          std::max(opt.abs_floor, opt.rel_tol * std::max(std::abs(an), std::abs(fd)));
      ++checked;
      if (!(std::abs(an - fd) <= tol)) {
        ++fails;
        if (first_fail.empty()) {
          std::ostringstream os;
          os << "input " << i << " element " << j << ": analytic " << an << " vs fd " << fd;
          first_fail = os.str();
        }
      }
    }
  }
  INFO("first mismatch: ", first_fail);
  CHECK(fails == 0);
  CHECK(checked > 0);
}

inline Tensor rand_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                          bool requires_grad = true) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> data(mixcam::shape_numel(s));
  for (double& v : data) v = d(rng);
  return Tensor::from_data(std::move(s), std::move(data), requires_grad);
}

// Keeps every element at least `margin` away from `kink` so subgradient
// choices cannot disagree with finite differences.
inline Tensor rand_tensor_off_kink(Shape s, std::mt19937_64& rng, double kink, double margin,
                                   double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> data(mixcam::shape_numel(s));
  for (double& v : data) {
    do {
      v = d(rng);
    } while (std::abs(v - kink) < margin);
  }
  return Tensor::from_data(std::move(s), std::move(data), requires_grad);
}

}  // namespace gc
