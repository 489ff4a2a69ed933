#include "racing/kernels.hpp"

// AVX2 variants, 4 doubles per 256-bit lane. This translation unit is the
// only one built with -mavx2; everything here must stay behind the runtime
// dispatch in kernels.cpp. FMA is deliberately not used so that per-element
// results match the scalar reference exactly.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace racing::kernels::detail {

namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  const std::size_t tail = n % 4;
  const std::size_t end = n - tail;
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < end; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (std::size_t i = end; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const std::size_t tail = n % 4;
  const std::size_t end = n - tail;
  const __m256d va = _mm256_set1_pd(alpha);
  for (std::size_t i = 0; i < end; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (std::size_t i = end; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double alpha, double* x, std::size_t n) {
  const std::size_t tail = n % 4;
  const std::size_t end = n - tail;
  const __m256d va = _mm256_set1_pd(alpha);
  for (std::size_t i = 0; i < end; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (std::size_t i = end; i < n; ++i) x[i] *= alpha;
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t tail = n % 4;
  const std::size_t end = n - tail;
  for (std::size_t i = 0; i < end; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (std::size_t i = end; i < n; ++i) out[i] = a[i] - b[i];
}

void clamp_avx2(const double* v, const double* lo, const double* hi, double* out,
                std::size_t n) {
  const std::size_t tail = n % 4;
  const std::size_t end = n - tail;
  for (std::size_t i = 0; i < end; i += 4) {
    const __m256d clamped = _mm256_min_pd(
        _mm256_max_pd(_mm256_loadu_pd(v + i), _mm256_loadu_pd(lo + i)),
        _mm256_loadu_pd(hi + i));
    _mm256_storeu_pd(out + i, clamped);
  }
  for (std::size_t i = end; i < n; ++i) {
    double x = v[i];
    if (x < lo[i]) x = lo[i];
    if (x > hi[i]) x = hi[i];
    out[i] = x;
  }
}

double norm_inf_avx2(const double* v, std::size_t n) {
  const std::size_t tail = n % 4;
  const std::size_t end = n - tail;
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d m = _mm256_setzero_pd();
  for (std::size_t i = 0; i < end; i += 4) {
    m = _mm256_max_pd(m, _mm256_and_pd(abs_mask, _mm256_loadu_pd(v + i)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double r = lanes[0];
  if (lanes[1] > r) r = lanes[1];
  if (lanes[2] > r) r = lanes[2];
  if (lanes[3] > r) r = lanes[3];
  for (std::size_t i = end; i < n; ++i) {
    const double a = std::fabs(v[i]);
    if (a > r) r = a;
  }
  return r;
}

NearestPoint nearest_point_avx2(const double* xs, const double* ys, double px,
                                double py, std::size_t n) {
  if (n < 8) return scalar_ops().nearest_point(xs, ys, px, py, n);

  const __m256d vpx = _mm256_set1_pd(px);
  const __m256d vpy = _mm256_set1_pd(py);
  __m256d best_d = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d best_i = _mm256_setzero_pd();
  __m256d idx = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  const __m256d four = _mm256_set1_pd(4.0);

  const std::size_t end = n - n % 4;
  for (std::size_t i = 0; i < end; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vpx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vpy);
    const __m256d d = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    // Strict less-than keeps the first (lowest-index) hit within each lane.
    const __m256d mask = _mm256_cmp_pd(d, best_d, _CMP_LT_OQ);
    best_d = _mm256_blendv_pd(best_d, d, mask);
    best_i = _mm256_blendv_pd(best_i, idx, mask);
    idx = _mm256_add_pd(idx, four);
  }

  alignas(32) double lane_d[4];
  alignas(32) double lane_i[4];
  _mm256_store_pd(lane_d, best_d);
  _mm256_store_pd(lane_i, best_i);

  std::size_t best = static_cast<std::size_t>(lane_i[0]);
  double bd = lane_d[0];
  for (int l = 1; l < 4; ++l) {
    const auto li = static_cast<std::size_t>(lane_i[l]);
    if (lane_d[l] < bd || (lane_d[l] == bd && li < best)) {
      bd = lane_d[l];
      best = li;
    }
  }
  for (std::size_t i = end; i < n; ++i) {
    const double dx = xs[i] - px;
    const double dy = ys[i] - py;
    const double d = dx * dx + dy * dy;
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return {best, bd};
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops{dot_avx2,  axpy_avx2,     scale_avx2,        sub_avx2,
                       clamp_avx2, norm_inf_avx2, nearest_point_avx2};
  return ops;
}

}  // namespace racing::kernels::detail

#else  // non-x86 fallback: route to scalar so dispatch stays uniform

namespace racing::kernels::detail {
const Ops& avx2_ops() { return scalar_ops(); }
}  // namespace racing::kernels::detail

#endif
