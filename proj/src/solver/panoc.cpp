#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "panoc_inner.hpp"
#include "racing/errors.hpp"
#include "racing/kernels.hpp"
#include "racing/solver.hpp"

namespace racing::solver {

void BoxBounds::validate(std::size_t n) const {
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("box bounds dimension mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) {
      throw std::invalid_argument("box bounds require lower <= upper");
    }
  }
}

std::vector<double> project_box(std::span<const double> u, const BoxBounds& box) {
  box.validate(u.size());
  std::vector<double> out(u.size());
  kernels::clamp(u, box.lower, box.upper, out);
  return out;
}

void project_box_in_place(std::span<double> u, const BoxBounds& box) {
  box.validate(u.size());
  kernels::clamp(u, box.lower, box.upper, u);
}

void SolverConfig::validate() const {
  if (!(eps_inner > 0.0) || !(eps_outer > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
  if (lbfgs_mem < 1) throw std::invalid_argument("lbfgs_mem must be at least 1");
  if (!(penalty_update_factor > 1.0)) {
    throw std::invalid_argument("penalty_update_factor must exceed 1");
  }
  if (!(penalty_init > 0.0) || !(max_penalty >= penalty_init)) {
    throw std::invalid_argument("penalty range invalid");
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max-iters";
    case SolveStatus::infeasible_penalty_exhausted: return "infeasible-penalty-exhausted";
  }
  return "unknown";
}

namespace detail {

namespace {

constexpr double k_gamma_min = 1e-14;
constexpr double k_lipschitz_probe = 1e-6;
constexpr int k_max_linesearch = 24;

double inf() { return std::numeric_limits<double>::infinity(); }

/// Evaluate f, returning +inf on overflow inside the evaluator so the line
/// search can back off instead of aborting.
double guarded_eval(const CostGradFn& f, std::span<const double> u, std::span<double> g,
                    bool* threw = nullptr) {
  try {
    const double v = f(u, g);
    if (threw) *threw = false;
    return std::isfinite(v) ? v : inf();
  } catch (const NumericalError&) {
    if (threw) *threw = true;
    return inf();
  }
}

}  // namespace

InnerResult panoc_inner(const CostGradFn& f, const BoxBounds& box,
                        std::span<const double> u0, const SolverConfig& cfg,
                        std::vector<std::pair<double, double>>* fbe_trace) {
  const std::size_t n = u0.size();
  box.validate(n);

  std::vector<double> u(u0.begin(), u0.end());
  project_box_in_place(u, box);

  std::vector<double> g(n), g_probe(n), u_probe(n);
  double f_u = f(u, g);
  if (!std::isfinite(f_u)) {
    throw std::invalid_argument("panoc: cost not finite at the projected start point");
  }

  // Deterministic Lipschitz probe along the first step direction (the
  // negative normalized gradient; coordinate-wise when the gradient
  // vanishes). Probing along a fixed coordinate direction instead can pick up
  // enormous curvature in directions the iteration never takes and freeze
  // the solve with a uselessly small step size.
  const double g0_norm = std::sqrt(kernels::dot(g, g));
  if (g0_norm > 0.0 && std::isfinite(g0_norm)) {
    for (std::size_t i = 0; i < n; ++i) {
      u_probe[i] = u[i] - k_lipschitz_probe * g[i] / g0_norm;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) u_probe[i] = u[i] + k_lipschitz_probe;
  }
  guarded_eval(f, u_probe, g_probe);
  std::vector<double> diff(n);
  kernels::sub(g_probe, g, diff);
  double lip = std::sqrt(kernels::dot(diff, diff)) / k_lipschitz_probe;
  if (!std::isfinite(lip)) lip = 1.0;
  lip = std::min(std::max(lip, 1e-10), 1e15);
  double gamma = 0.95 / lip;

  LbfgsHistory lbfgs(cfg.lbfgs_mem, n);

  std::vector<double> u_hat(n), r(n), res_map(n), d(n);
  std::vector<double> u_try(n), g_try(n), u_hat_try(n), r_try(n), res_try(n);

  InnerResult out;

  auto forward_backward = [&](std::span<const double> at, std::span<const double> grad,
                              std::span<double> hat, std::span<double> step) {
    // hat = clamp(at - gamma * grad), step = hat - at
    std::copy(at.begin(), at.end(), hat.begin());
    kernels::axpy(-gamma, grad, hat);
    kernels::clamp(hat, box.lower, box.upper, hat);
    kernels::sub(hat, at, step);
  };

  std::size_t iter = 0;
  for (; iter < cfg.max_inner_iters; ++iter) {
    forward_backward(u, g, u_hat, r);

    // Quadratic-upper-bound check on gamma; halve until the forward step is a
    // valid majorizer (L-BFGS memory is stale after a change).
    double f_hat = guarded_eval(f, u_hat, {});
    for (int halvings = 0; halvings < 60; ++halvings) {
      const double quad = f_u + kernels::dot(g, r) + 0.5 / gamma * kernels::dot(r, r);
      if (f_hat <= quad + 1e-10 * std::max(1.0, std::abs(f_u)) || gamma <= k_gamma_min) break;
      gamma *= 0.5;
      lbfgs.reset();
      forward_backward(u, g, u_hat, r);
      f_hat = guarded_eval(f, u_hat, {});
    }

    if (gamma <= k_gamma_min) break;  // stalled: steps below representable progress

    const double res_norm = kernels::norm_inf(r) / gamma;
    const double fbe = f_u + kernels::dot(g, r) + 0.5 / gamma * kernels::dot(r, r);
    if (fbe_trace) fbe_trace->emplace_back(gamma, fbe);

    if (res_norm <= cfg.eps_inner) {
      out.u = u_hat;  // projected point: feasible w.r.t. the box exactly
      out.cost = f_hat;
      out.residual = res_norm;
      out.iters = iter + 1;
      out.converged = true;
      return out;
    }

    // Residual mapping R = (u - u_hat) / gamma drives the quasi-Newton model.
    // Until curvature pairs exist the candidate is the forward-backward step
    // itself; a raw -R step would be 1/gamma times too long.
    for (std::size_t i = 0; i < n; ++i) res_map[i] = -r[i] / gamma;
    if (lbfgs.size() == 0) {
      std::copy(r.begin(), r.end(), d.begin());
    } else {
      lbfgs.direction(res_map, d);
      bool d_ok = true;
      for (double v : d) {
        if (!std::isfinite(v)) { d_ok = false; break; }
      }
      if (!d_ok) {
        lbfgs.reset();
        std::copy(r.begin(), r.end(), d.begin());
      }
    }

    // Blend the L-BFGS candidate with the projected-gradient step; halve tau
    // until the forward-backward envelope decreases.
    const double decrease_margin = 1e-6 * kernels::dot(r, r) / gamma;
    double tau = 1.0;
    bool accepted = false;
    double f_new = 0.0, fbe_new = 0.0;
    for (int ls = 0; ls < k_max_linesearch; ++ls) {
      for (std::size_t i = 0; i < n; ++i) u_try[i] = u[i] + (1.0 - tau) * r[i] + tau * d[i];
      f_new = guarded_eval(f, u_try, g_try);
      if (std::isfinite(f_new)) {
        forward_backward(u_try, g_try, u_hat_try, r_try);
        fbe_new = f_new + kernels::dot(g_try, r_try) +
                  0.5 / gamma * kernels::dot(r_try, r_try);
        if (std::isfinite(fbe_new) && fbe_new <= fbe - decrease_margin) {
          accepted = true;
          break;
        }
      }
      tau *= 0.5;
    }

    if (!accepted) {
      // Safeguard: plain forward-backward step, guaranteed to decrease the
      // envelope once gamma satisfies the quadratic upper bound.
      std::copy(u_hat.begin(), u_hat.end(), u_try.begin());
      bool threw = false;
      f_new = guarded_eval(f, u_try, g_try, &threw);
      if (threw || !std::isfinite(f_new)) {
        throw NumericalError(
            "cost", "panoc: non-finite cost at the proximal point (iter " +
                        std::to_string(iter) + ", |u|_inf " +
                        std::to_string(kernels::norm_inf(u_try)) + ")");
      }
      forward_backward(u_try, g_try, u_hat_try, r_try);
    }

    // L-BFGS pair from consecutive residual-mapping values.
    for (std::size_t i = 0; i < n; ++i) {
      res_try[i] = (u_try[i] - u_hat_try[i]) / gamma;
      diff[i] = u_try[i] - u[i];
    }
    kernels::sub(res_try, res_map, res_map);
    lbfgs.push(diff, res_map);

    std::swap(u, u_try);
    std::swap(g, g_try);
    f_u = f_new;
    out.residual = res_norm;
  }

  // Iteration budget exhausted: report the projected current iterate.
  forward_backward(u, g, u_hat, r);
  out.u = u_hat;
  out.cost = guarded_eval(f, u_hat, {});
  out.residual = kernels::norm_inf(r) / gamma;
  out.iters = iter;
  out.converged = false;
  return out;
}

}  // namespace detail

NlpSolution panoc_solve(const NlpProblem& problem, std::span<const double> u0,
                        const SolverConfig& cfg) {
  cfg.validate();
  if (problem.alm_map || problem.pm_map) {
    throw std::invalid_argument("panoc_solve handles box-only problems; use alm_pm_solve");
  }
  if (u0.size() != problem.n) throw std::invalid_argument("panoc_solve: u0 dimension mismatch");

  const auto t0 = std::chrono::steady_clock::now();
  NlpSolution sol;
  std::vector<std::pair<double, double>> trace;
  const auto inner = detail::panoc_inner(problem.cost_grad, problem.box, u0, cfg,
                                         cfg.record_fbe_trace ? &trace : nullptr);
  sol.u_star = inner.u;
  sol.cost = inner.cost;
  sol.fbe_residual = inner.residual;
  sol.inner_iters = inner.iters;
  sol.outer_iters = 1;
  sol.status = inner.converged ? SolveStatus::converged : SolveStatus::max_iters;
  sol.constraint_violation = 0.0;
  sol.fbe_trace = std::move(trace);
  sol.solve_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

}  // namespace racing::solver
