#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "mixcam/kernels.hpp"
#include "mixcam/rng.hpp"

using mixcam::kernels::Table;

namespace {

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng, double lo = -2.0,
                             double hi = 2.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(a[i])));
  }
}

// Independent triple-loop reference used to anchor both lanes.
void naive_gemm(char mode, std::size_t m, std::size_t n, std::size_t k,
                const std::vector<double>& a, std::size_t lda, const std::vector<double>& b,
                std::size_t ldb, std::vector<double>& c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = mode == 't' ? a[p * lda + i] : a[i * lda + p];
        const double bv = mode == 'n' ? b[j * ldb + p] : b[p * ldb + j];
        // mode: 'g' = nn, 'n' = nt, 't' = tn
        s += av * bv;
      }
      c[i * ldc + j] += s;
    }
  }
}

const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 33, 64, 129, 257};

}  // namespace

TEST_CASE("gemm variants match the naive reference on both lanes") {
  std::vector<const Table*> lanes{&mixcam::kernels::scalar_table()};
  if (const Table* t = mixcam::kernels::avx2_table()) lanes.push_back(t);

  auto rng = mixcam::make_rng(1234);
  const std::size_t dims[][3] = {{1, 1, 1},  {3, 5, 7},    {16, 64, 27},
                                 {8, 33, 12}, {5, 129, 17}, {27, 1024, 16}};
  for (const Table* lane : lanes) {
    for (const auto& d : dims) {
      const std::size_t m = d[0], n = d[1], k = d[2];
      const auto a = rand_vec(std::max(m, k) * std::max(m, k) + m * k, rng);
      const auto b = rand_vec(std::max(n, k) * std::max(n, k) + n * k, rng);
      std::vector<double> ref(m * n, 0.5), got(m * n, 0.5);

      naive_gemm('g', m, n, k, a, k, b, n, ref, n);
      lane->gemm_nn(m, n, k, a.data(), k, b.data(), n, got.data(), n);
      check_close(got, ref, 1e-12);

      std::fill(ref.begin(), ref.end(), -0.25);
      std::fill(got.begin(), got.end(), -0.25);
      naive_gemm('n', m, n, k, a, k, b, k, ref, n);
      lane->gemm_nt(m, n, k, a.data(), k, b.data(), k, got.data(), n);
      check_close(got, ref, 1e-12);

      std::fill(ref.begin(), ref.end(), 0.0);
      std::fill(got.begin(), got.end(), 0.0);
      naive_gemm('t', m, n, k, a, m, b, n, ref, n);
      lane->gemm_tn(m, n, k, a.data(), m, b.data(), n, got.data(), n);
      check_close(got, ref, 1e-12);
    }
  }
}

TEST_CASE("elementwise kernels agree bitwise across lanes") {
  const Table* avx2 = mixcam::kernels::avx2_table();
  if (!avx2) {
    MESSAGE("avx2 lane unavailable; skipping cross-lane checks");
    return;
  }
  const Table& scalar = mixcam::kernels::scalar_table();
  auto rng = mixcam::make_rng(99);
  for (std::size_t n : kSizes) {
    const auto a = rand_vec(n, rng);
    const auto b = rand_vec(n, rng);
    std::vector<double> r1(n), r2(n);

    scalar.add(a.data(), b.data(), r1.data(), n);
    avx2->add(a.data(), b.data(), r2.data(), n);
    CHECK(bitwise_equal(r1, r2));

    scalar.sub(a.data(), b.data(), r1.data(), n);
    avx2->sub(a.data(), b.data(), r2.data(), n);
    CHECK(bitwise_equal(r1, r2));

    scalar.mul(a.data(), b.data(), r1.data(), n);
    avx2->mul(a.data(), b.data(), r2.data(), n);
    CHECK(bitwise_equal(r1, r2));

    scalar.scale(a.data(), 1.7, r1.data(), n);
    avx2->scale(a.data(), 1.7, r2.data(), n);
    CHECK(bitwise_equal(r1, r2));

    scalar.relu(a.data(), r1.data(), n);
    avx2->relu(a.data(), r2.data(), n);
    CHECK(bitwise_equal(r1, r2));

    std::vector<double> acc1(n, 0.125), acc2(n, 0.125);
    scalar.relu_grad(a.data(), b.data(), acc1.data(), n);
    avx2->relu_grad(a.data(), b.data(), acc2.data(), n);
    CHECK(bitwise_equal(acc1, acc2));

    CHECK(scalar.reduce_max(a.data(), n) == avx2->reduce_max(a.data(), n));
  }
}

TEST_CASE("reduction and fused kernels agree across lanes within tolerance") {
  const Table* avx2 = mixcam::kernels::avx2_table();
  if (!avx2) {
    MESSAGE("avx2 lane unavailable; skipping cross-lane checks");
    return;
  }
  const Table& scalar = mixcam::kernels::scalar_table();
  auto rng = mixcam::make_rng(7);
  for (std::size_t n : kSizes) {
    const auto a = rand_vec(n, rng);
    const auto b = rand_vec(n, rng);

    CHECK(std::abs(scalar.reduce_sum(a.data(), n) - avx2->reduce_sum(a.data(), n)) <= 1e-12);
    CHECK(std::abs(scalar.dot(a.data(), b.data(), n) - avx2->dot(a.data(), b.data(), n)) <=
          1e-12);

    std::vector<double> y1 = b, y2 = b;
    scalar.axpy(0.37, a.data(), y1.data(), n);
    avx2->axpy(0.37, a.data(), y2.data(), n);
    check_close(y1, y2, 1e-14);

    auto w1 = rand_vec(n, rng), m1 = rand_vec(n, rng, 0.0, 0.1), v1 = rand_vec(n, rng, 0.0, 0.1);
    auto g = rand_vec(n, rng);
    auto w2 = w1, m2 = m1, v2 = v1;
    scalar.adam_update(w1.data(), m1.data(), v1.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                       5e-4, 0.1, 0.001);
    avx2->adam_update(w2.data(), m2.data(), v2.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8, 5e-4,
                      0.1, 0.001);
    check_close(w1, w2, 1e-14);
    check_close(m1, m2, 1e-14);
    check_close(v1, v2, 1e-14);
  }
}

TEST_CASE("kernels are deterministic across repeated calls") {
  const Table& t = mixcam::kernels::active();
  auto rng = mixcam::make_rng(5);
  const std::size_t m = 9, n = 33, k = 14;
  const auto a = rand_vec(m * k, rng);
  const auto b = rand_vec(k * n, rng);
  std::vector<double> c1(m * n, 0.0), c2(m * n, 0.0);
  t.gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
  t.gemm_nn(m, n, k, a.data(), k, b.data(), n, c2.data(), n);
  CHECK(bitwise_equal(c1, c2));
  CHECK(t.reduce_sum(a.data(), a.size()) == t.reduce_sum(a.data(), a.size()));
}

TEST_CASE("gemm respects leading-dimension strides") {
  const Table& t = mixcam::kernels::active();
  // 2x2 view inside 2x4 storage: A = [[1,2],[3,4]] with lda=4.
  std::vector<double> a{1, 2, -9, -9, 3, 4, -9, -9};
  std::vector<double> b{1, 0, 0, 1};  // identity, ldb=2
  std::vector<double> c(4, 0.0);
  t.gemm_nn(2, 2, 2, a.data(), 4, b.data(), 2, c.data(), 2);
  CHECK(c == std::vector<double>{1, 2, 3, 4});
}
