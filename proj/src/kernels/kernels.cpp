#include "racing/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace racing::kernels {

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend detect_backend() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

std::atomic<Backend> g_backend{detect_backend()};

const detail::Ops& ops() {
  return g_backend.load(std::memory_order_relaxed) == Backend::avx2
             ? detail::avx2_ops()
             : detail::scalar_ops();
}

void check_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel size mismatch");
}

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

bool backend_supported(Backend b) { return b == Backend::scalar || cpu_has_avx2(); }

void set_backend(Backend b) {
  if (!backend_supported(b)) throw std::runtime_error("kernel backend not supported on this CPU");
  g_backend.store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a, b);
  return ops().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x, y);
  ops().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { ops().scale(alpha, x.data(), x.size()); }

void sub(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check_same_size(a, b);
  check_same_size(a, out);
  ops().sub(a.data(), b.data(), out.data(), a.size());
}

void clamp(std::span<const double> v, std::span<const double> lo,
           std::span<const double> hi, std::span<double> out) {
  check_same_size(v, lo);
  check_same_size(v, hi);
  check_same_size(v, out);
  ops().clamp(v.data(), lo.data(), hi.data(), out.data(), v.size());
}

double norm_inf(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return ops().norm_inf(v.data(), v.size());
}

NearestPoint nearest_point(std::span<const double> xs, std::span<const double> ys,
                           double px, double py) {
  check_same_size(xs, ys);
  if (xs.empty()) throw std::invalid_argument("nearest_point: empty point set");
  return ops().nearest_point(xs.data(), ys.data(), px, py, xs.size());
}

}  // namespace racing::kernels
