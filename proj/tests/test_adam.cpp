#include <doctest.h>

#include <cmath>

#include "mixcam/adam.hpp"
#include "mixcam/ops.hpp"
#include "mixcam/tensor.hpp"

using mixcam::Adam;
using mixcam::AdamConfig;
using mixcam::Tape;
using mixcam::Tensor;
namespace ops = mixcam::ops;

TEST_CASE("first Adam step moves a scalar parameter by ~lr") {
  Tensor w = Tensor::scalar(1.0, true);
  AdamConfig cfg;  // lr 1e-3, beta1 0.9, beta2 0.999, eps 1e-8, wd 0
  Adam opt({{"w", w}}, cfg);
  {
    Tape tape;
    Tensor loss = ops::sum_all(w);  // d(loss)/dw = 1
    tape.backward(loss);
  }
  opt.step();
  // Hand-computed: m=0.1, mhat=1; v=1e-3, vhat=1; w -= 1e-3 * 1/(1+1e-8).
  const double expected = 1.0 - 1e-3 / (1.0 + 1e-8);
  CHECK(std::abs(w.value()[0] - expected) <= 1e-15);
  CHECK(std::abs(w.value()[0] - 0.999) <= 1e-9);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("zero gradient and zero weight decay is a fixed point") {
  Tensor w = Tensor::from_data({3}, {0.5, -1.0, 2.0}, true);
  Adam opt({{"w", w}}, AdamConfig{});
  {
    Tape tape;
    Tensor loss = ops::sum_all(ops::scalar_mul(w, 0.0));
    tape.backward(loss);
  }
  opt.step();
  CHECK(w.value()[0] == 0.5);
  CHECK(w.value()[1] == -1.0);
  CHECK(w.value()[2] == 2.0);
}

TEST_CASE("two identical-gradient steps advance the counter and moments") {
  Tensor w = Tensor::scalar(1.0, true);
  Adam opt({{"w", w}}, AdamConfig{});
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(ops::sum_all(w));
    opt.step();
    w.zero_grad();
  }
  CHECK(opt.step_count() == 2);
  CHECK(opt.moment1("w").value()[0] != 0.0);
  CHECK(opt.moment2("w").value()[0] != 0.0);
}

TEST_CASE("missing gradient errors with the parameter name") {
  Tensor w = Tensor::scalar(1.0, true);
  Tensor u = Tensor::scalar(2.0, true);
  Adam opt({{"w", w}, {"offender", u}}, AdamConfig{});
  {
    Tape tape;
    tape.backward(ops::sum_all(w));  // u never contributes
  }
  CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("offender"), mixcam::Error);
}

TEST_CASE("weight decay is folded into the gradient before the moments") {
  // With loss gradient 0 and decay wd, the effective gradient is wd*w, so the
  // first step must match Adam on g = wd*w.
  Tensor w = Tensor::scalar(2.0, true);
  AdamConfig cfg;
  cfg.weight_decay = 5e-4;
  Adam opt({{"w", w}}, cfg);
  {
    Tape tape;
    tape.backward(ops::sum_all(ops::scalar_mul(w, 0.0)));
  }
  opt.step();
  const double g = 5e-4 * 2.0;
  const double m = 0.1 * g, v = 1e-3 * (g * g);
  const double expected = 2.0 - 1e-3 * (m / 0.1) / (std::sqrt(v / 1e-3) + 1e-8);
  CHECK(w.value()[0] == doctest::Approx(expected).epsilon(1e-12));
}
