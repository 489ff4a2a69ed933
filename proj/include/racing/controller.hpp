#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "racing/dynamics.hpp"
#include "racing/solver.hpp"
#include "racing/track.hpp"

// Single-shooting NMPC: the decision vector stacks N control inputs
// [d_0, delta_0, ..., d_{N-1}, delta_{N-1}]; states are eliminated by rolling
// the Euler prediction model forward. The terminal cost pulls the last
// predicted position toward a pure-pursuit reference; input rates are
// penalized against the previously applied input. Track-boundary residuals
// are handled by the solver's augmented-Lagrangian path, obstacle and
// velocity-bound residuals by its penalty path.

namespace racing {

struct OcpConfig {
  std::size_t horizon = 50;  // N
  double ts = 0.033;         // prediction step [s]
  std::array<double, 2> q1{10.0, 10.0};  // terminal position weight (diagonal)
  std::array<double, 2> q2{10.0, 10.0};  // input rate weight (diagonal)
  ControlInput input_lower{0.0, -0.5235987755982988};  // [0, -pi/6]
  ControlInput input_upper{1.0, 0.5235987755982988};   // [1,  pi/6]
  double vx_min = 0.0;
  double vx_max = 5.0;
  double vx_penalty_weight = 1.0;
  std::size_t lookahead = 90;  // P, samples ahead of the projection
  /// Corridor shrink applied to R_g - R_c inside the boundary constraint so
  /// solver tolerance and model mismatch cannot push the plant past the
  /// physical bound.
  double boundary_margin = 0.05;
  bool warm_start_duals = true;

  std::size_t projection_window() const { return 2 * lookahead; }
  void validate() const;
};

struct ControllerState {
  ControlInput u_prev{0.0, 0.0};
  std::vector<ControlInput> warm_start;
  std::size_t last_projection_index = 0;
  bool has_projection_hint = false;
  solver::DualWarmStart duals;
  bool has_duals = false;

  /// Mid-throttle, wheels-straight warm start; u_prev = (0, 0).
  static ControllerState initial(const OcpConfig& cfg);
};

struct HorizonSolution {
  std::vector<ControlInput> inputs;          // N entries
  std::vector<VehicleState> predicted;       // N+1 states, [0] = measured
  solver::NlpSolution diagnostics;
  Vec2 reference;                            // p_d used by this solve
  std::size_t projection_index = 0;
  bool degraded = false;
};

/// Sequential Euler chain from x0; returns N+1 states.
std::vector<VehicleState> rollout(const VehicleState& x0,
                                  std::span<const ControlInput> inputs,
                                  const VehicleParams& params, double ts);

/// Terminal tracking cost plus input-rate cost (u_{-1} = u_prev).
double ocp_cost(std::span<const ControlInput> inputs, const VehicleState& x0,
                const ControlInput& u_prev, Vec2 p_ref, const VehicleParams& params,
                const OcpConfig& cfg);

/// Exact gradient of ocp_cost w.r.t. the stacked inputs via a reverse sweep
/// over the Euler chain (costate recursion on the analytic step Jacobians).
std::vector<double> ocp_gradient(std::span<const ControlInput> inputs,
                                 const VehicleState& x0, const ControlInput& u_prev,
                                 Vec2 p_ref, const VehicleParams& params,
                                 const OcpConfig& cfg);

/// Shared per-solve machinery: caches the rollout, step linearizations and
/// hinted center-line projections of the last decision vector so the cost
/// evaluator and both constraint maps price a given u exactly once.
class OcpEvaluator {
 public:
  OcpEvaluator(VehicleState x0, ControlInput u_prev, Vec2 p_ref,
               const VehicleParams& params, const OcpConfig& cfg,
               const TrackLayout* layout, std::size_t projection_hint);

  solver::CostGradFn cost_grad();

  const VehicleState& x0() const { return x0_; }
  const OcpConfig& config() const { return cfg_; }
  const TrackLayout* layout() const { return layout_; }

  // Constraint-map building blocks (see build_constraint_maps).
  void boundary_residuals(std::span<const double> u, std::span<double> out);
  void boundary_vjp(std::span<const double> u, std::span<const double> y,
                    std::span<double> grad);
  void penalty_residuals(std::span<const double> u, std::span<double> out);
  void penalty_vjp(std::span<const double> u, std::span<const double> y,
                   std::span<double> grad);

  std::size_t boundary_dim() const;
  std::size_t penalty_dim() const;
  const std::vector<std::size_t>& active_obstacles() const { return obstacles_; }

 private:
  struct Cache;
  void ensure(std::span<const double> u);
  void adjoint_sweep(std::span<const double> terminal_seed,
                     const std::vector<std::array<double, 6>>& step_seeds,
                     std::span<double> grad_out, bool add_rate_terms,
                     std::span<const double> u) const;

  VehicleState x0_;
  ControlInput u_prev_;
  Vec2 p_ref_;
  VehicleParams params_;
  OcpConfig cfg_;
  const TrackLayout* layout_;
  std::size_t hint_;
  std::vector<std::size_t> obstacles_;  // indices into layout->obstacles after culling
  std::shared_ptr<Cache> cache_;
};

struct ConstraintMaps {
  solver::ConstraintMap alm;
  solver::IntervalSet alm_set;
  solver::ConstraintMap pm;
};

/// ALM map: per-step boundary residuals |p_k - p'_k|^2 with interval target
/// [0, (R_g - R_c - margin)^2] for k = 2..N-1. PM map: obstacle residuals
/// max(0, Gamma_j^2 - |p_k - p_j|^2) for k = 2..N and every kept obstacle,
/// then v_x bound residuals for k = 1..N. Rows the inputs cannot influence
/// are omitted: x_0 is measured, and positions respond to inputs with a
/// two-step lag through the Euler chain.
ConstraintMaps build_constraint_maps(const std::shared_ptr<OcpEvaluator>& rollout,
                                     const TrackLayout& layout, const OcpConfig& cfg);

struct ControlStepResult {
  ControlInput u;
  HorizonSolution horizon;
  ControllerState next;
};

/// One NMPC tick: project, look ahead, assemble and solve the OCP from the
/// warm start, apply the first input, shift the warm start. If the solver
/// reports penalty exhaustion the projected warm-start head is applied and
/// the result is flagged degraded.
ControlStepResult control_step(const VehicleState& x_measured, const TrackLayout& layout,
                               const ControllerState& cstate, const VehicleParams& params,
                               const OcpConfig& cfg, const solver::SolverConfig& scfg);

}  // namespace racing
