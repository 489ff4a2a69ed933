#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "racing/kernels.hpp"

namespace rk = racing::kernels;

namespace {

// Deterministic test vectors; mt19937 with fixed seeds keeps runs identical.
std::vector<double> random_vec(std::mt19937& rng, std::size_t n, double lo = -10.0,
                               double hi = 10.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

struct BackendGuard {
  rk::Backend saved = rk::active_backend();
  ~BackendGuard() { rk::set_backend(saved); }
};

}  // namespace

TEST_CASE("kernels: scalar reference basics") {
  BackendGuard guard;
  rk::set_backend(rk::Backend::scalar);

  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{4.0, -5.0, 6.0};
  CHECK(rk::dot(a, b) == doctest::Approx(4.0 - 10.0 + 18.0));

  std::vector<double> y{1.0, 1.0, 1.0};
  rk::axpy(2.0, a, y);
  CHECK(y[0] == 3.0);
  CHECK(y[2] == 7.0);

  CHECK(rk::norm_inf(b) == 6.0);
  CHECK(rk::norm_inf(std::vector<double>{}) == 0.0);

  const std::vector<double> lo{0.0, 0.0, 0.0};
  const std::vector<double> hi{1.0, 1.0, 1.0};
  std::vector<double> out(3);
  rk::clamp(std::vector<double>{-1.0, 0.5, 2.0}, lo, hi, out);
  CHECK(out == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("kernels: nearest_point exhaustive scan with smallest-index ties") {
  BackendGuard guard;
  for (const auto backend : {rk::Backend::scalar, rk::Backend::avx2}) {
    if (!rk::backend_supported(backend)) continue;
    rk::set_backend(backend);

    // Two equidistant points: index 3 and 7 both at distance 1.
    std::vector<double> xs{0, 10, 20, 5, 40, 50, 60, 5, 80, 90, 100};
    std::vector<double> ys{9, 9, 9, 1, 9, 9, 9, -1, 9, 9, 9};
    const auto np = rk::nearest_point(xs, ys, 5.0, 0.0);
    CHECK(np.index == 3);
    CHECK(np.dist_sq == doctest::Approx(1.0));
  }
}

TEST_CASE("kernels: AVX2 variants match the scalar reference") {
  if (!rk::backend_supported(rk::Backend::avx2)) return;
  BackendGuard guard;

  std::mt19937 rng(42);
  for (const std::size_t n : {1u, 3u, 4u, 7u, 100u, 257u}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    const auto lo = random_vec(rng, n, -20.0, -1.0);
    const auto hi = random_vec(rng, n, 1.0, 20.0);

    rk::set_backend(rk::Backend::scalar);
    const double dot_s = rk::dot(a, b);
    const double ninf_s = rk::norm_inf(a);
    std::vector<double> clamp_s(n), sub_s(n);
    rk::clamp(a, lo, hi, clamp_s);
    rk::sub(a, b, sub_s);
    std::vector<double> axpy_s = b;
    rk::axpy(1.7, a, axpy_s);

    rk::set_backend(rk::Backend::avx2);
    const double dot_v = rk::dot(a, b);
    const double ninf_v = rk::norm_inf(a);
    std::vector<double> clamp_v(n), sub_v(n);
    rk::clamp(a, lo, hi, clamp_v);
    rk::sub(a, b, sub_v);
    std::vector<double> axpy_v = b;
    rk::axpy(1.7, a, axpy_v);

    // Elementwise kernels are bit-identical; reductions agree to rounding.
    CHECK(clamp_v == clamp_s);
    CHECK(sub_v == sub_s);
    CHECK(axpy_v == axpy_s);
    CHECK(ninf_v == ninf_s);
    CHECK(dot_v == doctest::Approx(dot_s).epsilon(1e-13));
  }
}

TEST_CASE("kernels: nearest_point AVX2 equals scalar exactly on random scans") {
  if (!rk::backend_supported(rk::Backend::avx2)) return;
  BackendGuard guard;

  std::mt19937 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 5 + static_cast<std::size_t>(rng() % 400);
    const auto xs = random_vec(rng, n, -50.0, 50.0);
    const auto ys = random_vec(rng, n, -50.0, 50.0);
    std::uniform_real_distribution<double> q(-60.0, 60.0);
    const double px = q(rng);
    const double py = q(rng);

    rk::set_backend(rk::Backend::scalar);
    const auto s = rk::nearest_point(xs, ys, px, py);
    rk::set_backend(rk::Backend::avx2);
    const auto v = rk::nearest_point(xs, ys, px, py);

    CHECK(v.index == s.index);
    CHECK(v.dist_sq == s.dist_sq);
  }
}

TEST_CASE("kernels: size mismatch is rejected") {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0};
  CHECK_THROWS_AS((void)rk::dot(a, b), std::invalid_argument);
  CHECK_THROWS_AS((void)rk::nearest_point(a, b, 0, 0), std::invalid_argument);
}
