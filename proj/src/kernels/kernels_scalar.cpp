#include "racing/kernels.hpp"

#include <cmath>

// Scalar reference kernels. Kept free of manual unrolling so they stay the
// readable ground truth the SIMD variants are checked against.

namespace racing::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void clamp_scalar(const double* v, const double* lo, const double* hi, double* out,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double x = v[i];
    if (x < lo[i]) x = lo[i];
    if (x > hi[i]) x = hi[i];
    out[i] = x;
  }
}

double norm_inf_scalar(const double* v, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::fabs(v[i]);
    if (a > m) m = a;
  }
  return m;
}

NearestPoint nearest_point_scalar(const double* xs, const double* ys, double px,
                                  double py, std::size_t n) {
  std::size_t best = 0;
  double best_d = (xs[0] - px) * (xs[0] - px) + (ys[0] - py) * (ys[0] - py);
  for (std::size_t i = 1; i < n; ++i) {
    const double dx = xs[i] - px;
    const double dy = ys[i] - py;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {best, best_d};
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{dot_scalar,  axpy_scalar,     scale_scalar,        sub_scalar,
                       clamp_scalar, norm_inf_scalar, nearest_point_scalar};
  return ops;
}

}  // namespace racing::kernels::detail
