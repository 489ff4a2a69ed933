#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

// Box-constrained NLP solver: a PANOC-style proximal-gradient inner loop with
// L-BFGS acceleration, wrapped by an augmented-Lagrangian / penalty-method
// outer loop for general constraint mappings. Fully deterministic: no
// randomized components, so identical inputs produce identical iterates.

namespace racing::solver {

struct BoxBounds {
  std::vector<double> lower;
  std::vector<double> upper;
  void validate(std::size_t n) const;
};

/// Elementwise clamp of u into the box; idempotent.
std::vector<double> project_box(std::span<const double> u, const BoxBounds& box);
void project_box_in_place(std::span<double> u, const BoxBounds& box);

/// Cost-with-gradient evaluator. When `grad` is empty only the value is
/// needed; otherwise grad must be filled with the n-dimensional gradient.
using CostGradFn = std::function<double(std::span<const double> u, std::span<double> grad)>;

/// Interval target set, elementwise [lower, upper] (entries may be +-inf).
struct IntervalSet {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Vector-valued constraint mapping with a transposed-Jacobian product,
/// which is all the outer loop needs to differentiate its penalty terms.
struct ConstraintMap {
  std::size_t dim = 0;
  /// out = F(u), out.size() == dim
  std::function<void(std::span<const double> u, std::span<double> out)> value;
  /// grad += J_F(u)^T y, y.size() == dim
  std::function<void(std::span<const double> u, std::span<const double> y,
                     std::span<double> grad)>
      add_vjp;
};

struct NlpProblem {
  std::size_t n = 0;
  CostGradFn cost_grad;
  BoxBounds box;
  /// ALM-handled mapping F1 with target set alm_set (F1(u) in C).
  std::optional<ConstraintMap> alm_map;
  IntervalSet alm_set;
  /// PM-handled mapping F2; feasibility means F2(u) = 0 (one-sided residuals
  /// are expressed as max(0, .) compositions by the problem builder).
  std::optional<ConstraintMap> pm_map;
};

enum class SolveStatus {
  converged,
  max_iters,
  infeasible_penalty_exhausted,
};

const char* to_string(SolveStatus s);

struct SolverConfig {
  double eps_inner = 1e-4;  // fixed-point residual tolerance (inf-norm)
  double eps_outer = 1e-3;  // constraint violation tolerance (inf-norm)
  std::size_t lbfgs_mem = 30;
  std::size_t max_inner_iters = 500;  // per inner solve
  std::size_t max_outer_iters = 10;
  double penalty_init = 10.0;
  double penalty_update_factor = 5.0;  // rho > 1
  double max_penalty = 1e8;
  double multiplier_min = -1e6;
  double multiplier_max = 1e6;
  bool record_fbe_trace = false;  // debug: keep (gamma, fbe) per accepted iterate
  void validate() const;
};

struct NlpSolution {
  std::vector<double> u_star;
  SolveStatus status = SolveStatus::max_iters;
  std::size_t inner_iters = 0;  // summed over outer iterations
  std::size_t outer_iters = 0;
  double cost = 0.0;                  // smooth cost f(u_star), penalties excluded
  double fbe_residual = 0.0;          // final inf-norm fixed-point residual
  double constraint_violation = 0.0;  // inf-norm over both mappings
  std::vector<double> multipliers;    // ALM multipliers at exit
  double penalty = 0.0;
  double solve_time_s = 0.0;
  /// (gamma, fbe) per accepted inner iterate when record_fbe_trace is set;
  /// non-increasing between consecutive entries sharing the same gamma.
  std::vector<std::pair<double, double>> fbe_trace;
};

/// L-BFGS memory with the standard two-loop recursion. Pairs that do not
/// satisfy the curvature condition s'y > 0 are skipped at insertion.
class LbfgsHistory {
 public:
  LbfgsHistory(std::size_t memory, std::size_t n);

  void push(std::span<const double> s, std::span<const double> y);
  void reset();
  std::size_t size() const { return count_; }

  /// d = -H g where H is the implicit inverse-Hessian estimate; with empty
  /// history this is -g (identity scaling).
  void direction(std::span<const double> g, std::span<double> d) const;

 private:
  std::size_t mem_;
  std::size_t n_;
  std::size_t count_ = 0;
  std::size_t head_ = 0;  // ring buffer slot of the most recent pair
  std::vector<std::vector<double>> s_, y_;
  std::vector<double> rho_;  // 1 / s'y per stored pair
};

/// Inner solver for box-only problems (alm_map / pm_map must be absent).
NlpSolution panoc_solve(const NlpProblem& problem, std::span<const double> u0,
                        const SolverConfig& cfg);

/// Dual warm start carried across repeated solves of a slowly varying problem.
struct DualWarmStart {
  std::vector<double> multipliers;
  double penalty = 0.0;
};

/// Full solve with ALM multipliers for alm_map and quadratic penalties for
/// pm_map. With neither mapping present this reduces to panoc_solve.
NlpSolution alm_pm_solve(const NlpProblem& problem, std::span<const double> u0,
                         const SolverConfig& cfg,
                         const DualWarmStart* warm = nullptr);

}  // namespace racing::solver
