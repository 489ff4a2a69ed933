#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel vector kernels used by the solver and track-projection hot
// loops. Every kernel has a scalar reference implementation and, on x86-64
// with AVX2, a 4-lane double-precision variant. The backend is picked once at
// startup from CPUID and can be overridden (tests run both and compare).
//
// clamp, sub, scale, axpy and nearest_point perform the same per-element IEEE
// operations in both backends and match bit-for-bit (the kernel translation
// units are built with FP contraction off). dot and norm reductions
// reassociate across lanes and agree only to rounding.

namespace racing::kernels {

enum class Backend { scalar, avx2 };

/// Backend currently used by all kernels.
Backend active_backend();

/// True if this CPU can run the given backend.
bool backend_supported(Backend b);

/// Force a backend; throws std::runtime_error if unsupported on this CPU.
void set_backend(Backend b);

std::string_view backend_name(Backend b);

/// sum_i a[i]*b[i]
double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// x *= alpha
void scale(double alpha, std::span<double> x);

/// out = a - b
void sub(std::span<const double> a, std::span<const double> b, std::span<double> out);

/// out[i] = min(max(v[i], lo[i]), hi[i])
void clamp(std::span<const double> v, std::span<const double> lo,
           std::span<const double> hi, std::span<double> out);

/// max_i |v[i]| (0 for an empty span)
double norm_inf(std::span<const double> v);

struct NearestPoint {
  std::size_t index;
  double dist_sq;
};

/// argmin_i (xs[i]-px)^2 + (ys[i]-py)^2 over i in [0, xs.size()),
/// ties broken toward the smallest index. xs and ys must be non-empty
/// and of equal length.
NearestPoint nearest_point(std::span<const double> xs, std::span<const double> ys,
                           double px, double py);

namespace detail {

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*sub)(const double*, const double*, double*, std::size_t);
  void (*clamp)(const double*, const double*, const double*, double*, std::size_t);
  double (*norm_inf)(const double*, std::size_t);
  NearestPoint (*nearest_point)(const double*, const double*, double, double, std::size_t);
};

const Ops& scalar_ops();
const Ops& avx2_ops();

}  // namespace detail

}  // namespace racing::kernels
