#include <cmath>
#include <stdexcept>

#include "racing/kernels.hpp"
#include "racing/solver.hpp"

namespace racing::solver {

LbfgsHistory::LbfgsHistory(std::size_t memory, std::size_t n) : mem_(memory), n_(n) {
  if (memory < 1) throw std::invalid_argument("lbfgs memory must be at least 1");
  s_.assign(mem_, std::vector<double>(n_));
  y_.assign(mem_, std::vector<double>(n_));
  rho_.assign(mem_, 0.0);
}

void LbfgsHistory::push(std::span<const double> s, std::span<const double> y) {
  const double sy = kernels::dot(s, y);
  const double ss = kernels::dot(s, s);
  const double yy = kernels::dot(y, y);
  // Curvature guard: reject pairs that would break positive definiteness.
  if (!(sy > 1e-12 * std::sqrt(ss * yy)) || !std::isfinite(sy)) return;

  head_ = (head_ + 1) % mem_;
  std::copy(s.begin(), s.end(), s_[head_].begin());
  std::copy(y.begin(), y.end(), y_[head_].begin());
  rho_[head_] = 1.0 / sy;
  if (count_ < mem_) ++count_;
}

void LbfgsHistory::reset() {
  count_ = 0;
  head_ = 0;
}

void LbfgsHistory::direction(std::span<const double> g, std::span<double> d) const {
  std::copy(g.begin(), g.end(), d.begin());

  if (count_ == 0) {
    kernels::scale(-1.0, d);
    return;
  }

  // Two-loop recursion, newest pair first.
  std::vector<double> alpha(count_);
  for (std::size_t k = 0; k < count_; ++k) {
    const std::size_t i = (head_ + mem_ - k) % mem_;
    alpha[k] = rho_[i] * kernels::dot(s_[i], d);
    kernels::axpy(-alpha[k], y_[i], d);
  }

  // Initial scaling from the most recent pair: H0 = (s'y / y'y) I.
  const double yy = kernels::dot(y_[head_], y_[head_]);
  const double gamma0 = yy > 0.0 ? 1.0 / (rho_[head_] * yy) : 1.0;
  kernels::scale(gamma0, d);

  for (std::size_t k = count_; k-- > 0;) {
    const std::size_t i = (head_ + mem_ - k) % mem_;
    const double beta = rho_[i] * kernels::dot(y_[i], d);
    kernels::axpy(alpha[k] - beta, s_[i], d);
  }

  kernels::scale(-1.0, d);
}

}  // namespace racing::solver
