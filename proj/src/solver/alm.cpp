#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "panoc_inner.hpp"
#include "racing/kernels.hpp"
#include "racing/solver.hpp"

namespace racing::solver {

namespace {

double interval_violation(std::span<const double> v, const IntervalSet& set,
                          std::span<double> scratch) {
  kernels::clamp(v, set.lower, set.upper, scratch);
  for (std::size_t i = 0; i < v.size(); ++i) scratch[i] = v[i] - scratch[i];
  return kernels::norm_inf(scratch);
}

}  // namespace

NlpSolution alm_pm_solve(const NlpProblem& problem, std::span<const double> u0,
                         const SolverConfig& cfg, const DualWarmStart* warm) {
  cfg.validate();
  if (u0.size() != problem.n) throw std::invalid_argument("alm_pm_solve: u0 dimension mismatch");

  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t m1 = problem.alm_map ? problem.alm_map->dim : 0;
  const std::size_t m2 = problem.pm_map ? problem.pm_map->dim : 0;
  if (m1 > 0 &&
      (problem.alm_set.lower.size() != m1 || problem.alm_set.upper.size() != m1)) {
    throw std::invalid_argument("alm_pm_solve: target set dimension mismatch");
  }

  std::vector<double> lambda(m1, 0.0);
  double penalty = cfg.penalty_init;
  if (warm) {
    if (warm->multipliers.size() == m1) lambda = warm->multipliers;
    if (warm->penalty > 0.0) {
      // Re-test one notch below the carried penalty: an easy tick relaxes,
      // while a tick with a persistently active constraint pays at most one
      // escalation. Carrying the penalty unchanged makes the inner problem
      // needlessly stiff tick after tick.
      penalty = std::clamp(warm->penalty / cfg.penalty_update_factor, cfg.penalty_init,
                           cfg.max_penalty);
    }
  }

  std::vector<double> f1(m1), shifted(m1), proj(m1), pen_weight1(m1);
  std::vector<double> f2(m2), pen_weight2(m2);

  // Augmented cost: f(u) + (c/2) dist^2(F1(u) + lambda/c, C) + (c/2) |F2(u)|^2.
  const auto augmented = [&](std::span<const double> u, std::span<double> grad) {
    double value = problem.cost_grad(u, grad);
    if (m1 > 0) {
      problem.alm_map->value(u, f1);
      for (std::size_t i = 0; i < m1; ++i) shifted[i] = f1[i] + lambda[i] / penalty;
      kernels::clamp(shifted, problem.alm_set.lower, problem.alm_set.upper, proj);
      kernels::sub(shifted, proj, pen_weight1);
      value += 0.5 * penalty * kernels::dot(pen_weight1, pen_weight1);
      if (!grad.empty()) {
        kernels::scale(penalty, pen_weight1);
        problem.alm_map->add_vjp(u, pen_weight1, grad);
      }
    }
    if (m2 > 0) {
      problem.pm_map->value(u, f2);
      value += 0.5 * penalty * kernels::dot(f2, f2);
      if (!grad.empty()) {
        for (std::size_t i = 0; i < m2; ++i) pen_weight2[i] = penalty * f2[i];
        problem.pm_map->add_vjp(u, pen_weight2, grad);
      }
    }
    return value;
  };

  NlpSolution sol;
  std::vector<double> u(u0.begin(), u0.end());
  project_box_in_place(u, problem.box);

  std::vector<std::pair<double, double>> trace;
  double violation_prev = std::numeric_limits<double>::infinity();
  bool inner_converged = false;
  double violation = 0.0;

  const std::size_t max_outer = (m1 + m2) == 0 ? 1 : cfg.max_outer_iters;
  sol.status = SolveStatus::max_iters;

  // Early outer iterations run at a loose inner tolerance: the subproblem is
  // about to change anyway. Convergence is only declared once an inner solve
  // has met the configured eps_inner.
  double inner_eps = (m1 + m2) == 0 ? cfg.eps_inner
                                    : std::max(cfg.eps_inner, 1e-2);

  for (std::size_t outer = 0; outer < max_outer; ++outer) {
    if (cfg.record_fbe_trace) trace.clear();  // keep the final inner solve's trace
    SolverConfig inner_cfg = cfg;
    inner_cfg.eps_inner = inner_eps;
    const bool at_final_eps = inner_eps == cfg.eps_inner;
    const auto inner = detail::panoc_inner(augmented, problem.box, u, inner_cfg,
                                           cfg.record_fbe_trace ? &trace : nullptr);
    u = inner.u;
    sol.inner_iters += inner.iters;
    sol.outer_iters = outer + 1;
    sol.fbe_residual = inner.residual;
    inner_converged = inner.converged;

    // Constraint violation at the new iterate (unshifted residuals).
    violation = 0.0;
    if (m1 > 0) {
      problem.alm_map->value(u, f1);
      violation = interval_violation(f1, problem.alm_set, pen_weight1);
    }
    if (m2 > 0) {
      problem.pm_map->value(u, f2);
      violation = std::max(violation, kernels::norm_inf(f2));
    }

    if (m1 > 0) {
      // Clipped multiplier update: lambda <- clip(c (F1 + lambda/c - proj_C)).
      for (std::size_t i = 0; i < m1; ++i) shifted[i] = f1[i] + lambda[i] / penalty;
      kernels::clamp(shifted, problem.alm_set.lower, problem.alm_set.upper, proj);
      for (std::size_t i = 0; i < m1; ++i) {
        lambda[i] = std::clamp(penalty * (shifted[i] - proj[i]), cfg.multiplier_min,
                               cfg.multiplier_max);
      }
    }

    if (violation <= cfg.eps_outer && inner_converged && at_final_eps) {
      sol.status = SolveStatus::converged;
      break;
    }
    inner_eps = std::max(cfg.eps_inner, 0.1 * inner_eps);

    // Raise the penalty unless the violation shrank at least tenfold.
    if (violation > violation_prev / 10.0) {
      if (penalty >= cfg.max_penalty && violation > cfg.eps_outer) {
        sol.status = SolveStatus::infeasible_penalty_exhausted;
        break;
      }
      penalty = std::min(penalty * cfg.penalty_update_factor, cfg.max_penalty);
    }
    violation_prev = violation;
  }

  sol.u_star = std::move(u);
  sol.cost = problem.cost_grad(sol.u_star, {});
  sol.constraint_violation = violation;
  sol.multipliers = std::move(lambda);
  sol.penalty = penalty;
  sol.fbe_trace = std::move(trace);
  sol.solve_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

}  // namespace racing::solver
