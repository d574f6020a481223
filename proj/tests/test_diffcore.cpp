#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "mixcam/ops.hpp"
#include "mixcam/rng.hpp"
#include "mixcam/tensor.hpp"

using mixcam::Shape;
using mixcam::Tape;
using mixcam::Tensor;
namespace ops = mixcam::ops;

namespace {

// Random weights make the scalarized loss sensitive to every output element.
gc::LossFn weighted(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                    std::mt19937_64& rng) {
  auto shared = std::make_shared<std::vector<double>>();
  auto seed = rng();
  return [fn, shared, seed](const std::vector<Tensor>& xs) {
    Tensor y = fn(xs);
    if (shared->empty()) {
      auto wrng = std::mt19937_64(seed);
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      shared->resize(y.size());
      for (double& v : *shared) v = d(wrng);
    }
    Tensor w = Tensor::from_data(y.shape(), *shared);
    return ops::sum_all(ops::mul(y, w));
  };
}

Shape rand_shape(std::mt19937_64& rng, std::size_t max_rank = 3, std::size_t max_extent = 5) {
  std::uniform_int_distribution<std::size_t> rd(1, max_rank), ed(1, max_extent);
  Shape s(rd(rng));
  for (auto& e : s) e = ed(rng);
  return s;
}

}  // namespace

TEST_CASE("forward primitive examples") {
  Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
  auto r = ops::relu(x);
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[1] == 0.0);
  CHECK(r.value()[2] == 2.0);

  // 1x1 convolution with an identity kernel leaves a single-channel image unchanged.
  auto rng = mixcam::make_rng(3);
  Tensor img = gc::rand_tensor({1, 6, 6}, rng, 0.0, 1.0, false);
  Tensor ident = Tensor::from_data({1, 1, 1, 1}, {1.0});
  Tensor out = ops::conv2d(img, ident, Tensor(), 1, 0);
  REQUIRE(out.shape() == Shape{1, 6, 6});
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(out.value()[i] == img.value()[i]);

  Tensor two = Tensor::from_data({2}, {0.0, 0.0});
  auto sm = ops::softmax(two, 0);
  CHECK(sm.value()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sm.value()[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backward examples: analytic derivatives") {
  {
    Tape tape;
    Tensor x = Tensor::scalar(3.0, true);
    Tensor y = ops::mul(x, x);
    tape.backward(ops::sum_all(y));
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
  }
  {
    Tape tape;
    Tensor x = Tensor::from_data({2}, {-1.0, 2.0}, true);
    Tensor loss = ops::sum_all(ops::relu(x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
  }
}

TEST_CASE("conv2d kernel gradient matches finite differences on random 5x5 inputs") {
  auto rng = mixcam::make_rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor x = gc::rand_tensor({2, 5, 5}, rng, -1.0, 1.0, false);
    Tensor k = gc::rand_tensor({3, 2, 3, 3}, rng);
    Tensor b = gc::rand_tensor({3}, rng);
    gc::check_gradients(
        [&](const std::vector<Tensor>& xs) {
          return ops::mean_all(ops::conv2d(x, xs[0], xs[1], 1, 1));
        },
        {k, b});
    // Strided + gradient w.r.t. the input as well.
    Tensor x2 = gc::rand_tensor({2, 5, 5}, rng);
    gc::check_gradients(
        [&](const std::vector<Tensor>& xs) {
          return ops::mean_all(ops::conv2d(xs[0], xs[1], Tensor(), 2, 1));
        },
        {x2, k});
  }
}

TEST_CASE("finite-difference suite over every primitive op-kind") {
  auto rng = mixcam::make_rng(20250809);
  const int reps = 20;

  for (int rep = 0; rep < reps; ++rep) {
    // Elementwise binary ops share a shape per repetition.
    Shape s = rand_shape(rng);
    auto a = gc::rand_tensor(s, rng);
    auto b = gc::rand_tensor(s, rng);
    gc::check_gradients(weighted([](const auto& xs) { return ops::add(xs[0], xs[1]); }, rng),
                        {a, b});
    gc::check_gradients(weighted([](const auto& xs) { return ops::sub(xs[0], xs[1]); }, rng),
                        {a, b});
    gc::check_gradients(weighted([](const auto& xs) { return ops::mul(xs[0], xs[1]); }, rng),
                        {a, b});
    auto bpos = gc::rand_tensor(s, rng, 0.5, 1.5);
    gc::check_gradients(weighted([](const auto& xs) { return ops::div(xs[0], xs[1]); }, rng),
                        {a, bpos});
    gc::check_gradients(
        weighted([](const auto& xs) { return ops::scalar_mul(xs[0], -1.3); }, rng), {a});
    gc::check_gradients(
        weighted([](const auto& xs) { return ops::scalar_add(xs[0], 0.7); }, rng), {a});

    // Unary ops; inputs steered away from kinks / domain edges.
    auto off0 = gc::rand_tensor_off_kink(s, rng, 0.0, 0.05);
    gc::check_gradients(weighted([](const auto& xs) { return ops::relu(xs[0]); }, rng), {off0});
    gc::check_gradients(weighted([](const auto& xs) { return ops::sigmoid(xs[0]); }, rng), {a});
    gc::check_gradients(weighted([](const auto& xs) { return ops::softplus(xs[0]); }, rng), {a});
    auto pos = gc::rand_tensor(s, rng, 0.2, 2.0);
    gc::check_gradients(weighted([](const auto& xs) { return ops::log(xs[0]); }, rng), {pos});
    gc::check_gradients(weighted([](const auto& xs) { return ops::exp(xs[0]); }, rng), {a});
    gc::check_gradients(weighted([](const auto& xs) { return ops::pow(xs[0], 1.7); }, rng),
                        {pos});
    auto offc = gc::rand_tensor_off_kink(s, rng, 0.25, 0.05);
    gc::check_gradients(
        weighted([](const auto& xs) { return ops::clamp_min(xs[0], 0.25); }, rng), {offc});

    // Softmax over a random axis.
    std::uniform_int_distribution<std::size_t> ax(0, s.size() - 1);
    const std::size_t axis = ax(rng);
    gc::check_gradients(
        weighted([axis](const auto& xs) { return ops::softmax(xs[0], axis); }, rng), {a});

    // Reductions.
    const std::size_t raxis = ax(rng);
    gc::check_gradients(
        weighted([raxis](const auto& xs) { return ops::sum(xs[0], {raxis}); }, rng), {a});
    gc::check_gradients(
        weighted([raxis](const auto& xs) { return ops::mean(xs[0], {raxis}); }, rng), {a});
    gc::check_gradients([](const auto& xs) { return ops::sum_all(xs[0]); }, {a});
    gc::check_gradients([](const auto& xs) { return ops::mean_all(xs[0]); }, {a});

    // max: spread values so the argmax is unambiguous at fd step scale.
    auto spread = gc::rand_tensor(s, rng, -8.0, 8.0);
    gc::check_gradients(
        weighted([raxis](const auto& xs) { return ops::reduce_max(xs[0], {raxis}); }, rng),
        {spread});
    gc::check_gradients([](const auto& xs) { return ops::reduce_max_all(xs[0]); }, {spread});

    // matmul
    std::uniform_int_distribution<std::size_t> ed(1, 5);
    const std::size_t m = ed(rng), k = ed(rng), n = ed(rng);
    auto ma = gc::rand_tensor({m, k}, rng);
    auto mb = gc::rand_tensor({k, n}, rng);
    gc::check_gradients(weighted([](const auto& xs) { return ops::matmul(xs[0], xs[1]); }, rng),
                        {ma, mb});

    // conv2d (stride/padding vary)
    const std::size_t stride = 1 + (rng() % 2), pad = rng() % 2;
    auto cx = gc::rand_tensor({2, 4, 4}, rng);
    auto ck = gc::rand_tensor({2, 2, 3, 3}, rng);
    auto cb = gc::rand_tensor({2}, rng);
    gc::check_gradients(
        weighted(
            [stride, pad](const auto& xs) {
              return ops::conv2d(xs[0], xs[1], xs[2], stride, pad);
            },
            rng),
        {cx, ck, cb});

    // global average pooling
    auto gx = gc::rand_tensor({3, 4, 4}, rng);
    gc::check_gradients(weighted([](const auto& xs) { return ops::global_avg_pool(xs[0]); }, rng),
                        {gx});

    // broadcast / reshape / concat
    auto small = gc::rand_tensor({1, 3}, rng);
    gc::check_gradients(
        weighted([](const auto& xs) { return ops::broadcast_to(xs[0], {4, 2, 3}); }, rng),
        {small});
    auto sc = gc::rand_tensor(Shape{}, rng);
    gc::check_gradients(
        weighted([](const auto& xs) { return ops::broadcast_to(xs[0], {3, 3}); }, rng), {sc});
    gc::check_gradients(
        weighted([](const auto& xs) { return ops::reshape(xs[0], {xs[0].size()}); }, rng), {a});
    auto c1 = gc::rand_tensor({2, 3}, rng);
    auto c2 = gc::rand_tensor({1, 3}, rng);
    auto c3 = gc::rand_tensor({2, 3}, rng);
    gc::check_gradients(weighted(
                            [](const auto& xs) {
                              std::vector<Tensor> parts{xs[0], xs[1], xs[2]};
                              return ops::concat(parts, 0);
                            },
                            rng),
                        {c1, c2, c3});
    auto sl = gc::rand_tensor({3, 4}, rng);
    gc::check_gradients(
        weighted([](const auto& xs) { return ops::slice(xs[0], 1, 1, 2); }, rng), {sl});
  }
}

TEST_CASE("gradients accumulate across multiple uses of a tensor") {
  auto rng = mixcam::make_rng(55);
  Tensor x = gc::rand_tensor({4}, rng);
  std::vector<double> g_shared;
  {
    Tape tape;
    Tensor loss = ops::sum_all(ops::mul(x, x));
    tape.backward(loss);
    g_shared.assign(x.grad().begin(), x.grad().end());
    x.zero_grad();
  }
  // Duplicated-variable formulation: y = a*b with independent leaves.
  Tensor a = x.clone();
  Tensor b = x.clone();
  {
    Tape tape;
    Tensor loss = ops::sum_all(ops::mul(a, b));
    tape.backward(loss);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(g_shared[i] == a.grad()[i] + b.grad()[i]);
  }
}

TEST_CASE("softmax outputs are a probability distribution along the axis") {
  auto rng = mixcam::make_rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor x = gc::rand_tensor({4, 3, 5}, rng, -6.0, 6.0, false);
    const std::size_t axis = rep % 3;
    Tensor y = ops::softmax(x, axis);
    for (double v : y.value()) CHECK(v >= 0.0);
    Tensor s = ops::sum(y, {axis});
    for (double v : s.value()) CHECK(std::abs(v - 1.0) <= 1e-9);
  }
}

TEST_CASE("forward and backward are bit-deterministic for identical inputs") {
  auto run = [] {
    auto rng = mixcam::make_rng(2024);
    Tensor x = gc::rand_tensor({3, 8, 8}, rng);
    Tensor k = gc::rand_tensor({4, 3, 3, 3}, rng);
    Tape tape;
    Tensor y = ops::conv2d(x, k, Tensor(), 2, 1);
    Tensor loss = ops::mean_all(ops::mul(ops::relu(y), y));
    tape.backward(loss);
    std::vector<double> out(loss.value().begin(), loss.value().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    out.insert(out.end(), k.grad().begin(), k.grad().end());
    return out;
  };
  const auto r1 = run();
  const auto r2 = run();
  CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
}

TEST_CASE("error paths: shape mismatches name the op, tape misuse rejected") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 2});
  CHECK_THROWS_WITH_AS(ops::add(a, b), doctest::Contains("add"), mixcam::Error);
  CHECK_THROWS_WITH_AS(ops::matmul(a, a), doctest::Contains("matmul"), mixcam::Error);
  CHECK_THROWS_WITH_AS(ops::conv2d(a, b, Tensor(), 1, 0), doctest::Contains("conv2d"),
                       mixcam::Error);

  {
    Tape tape;
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tensor y = ops::relu(x);
    CHECK_THROWS_AS(tape.backward(y), mixcam::Error);  // non-scalar root
  }
  {
    Tape tape;
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y = ops::mul(x, x);
    tape.backward(y);
    CHECK_THROWS_AS(tape.backward(y), mixcam::Error);  // consumed tape
  }
  {
    Tape tape;
    Tensor leaf = Tensor::scalar(1.0, true);
    CHECK_THROWS_AS(tape.backward(leaf), mixcam::Error);  // not produced on this tape
  }
}

TEST_CASE("every requires-grad ancestor is populated after backward") {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {0.5, -0.25}, true);
  Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor dead = Tensor::from_data({2}, {3.0, 4.0}, true);
  Tensor used = ops::mul(x, w);
  Tensor unused = ops::mul(dead, dead);
  (void)unused;
  tape.backward(ops::sum_all(used));
  CHECK(x.has_grad());
  CHECK(w.has_grad());
  CHECK_FALSE(dead.has_grad());  // not an ancestor of the root
}
