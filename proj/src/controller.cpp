#include "racing/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace racing {

namespace {

void unpack_inputs(std::span<const double> u, std::vector<ControlInput>& out) {
  out.resize(u.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {u[2 * k], u[2 * k + 1]};
}

std::vector<double> flatten_inputs(std::span<const ControlInput> inputs) {
  std::vector<double> u(2 * inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    u[2 * k] = inputs[k].d;
    u[2 * k + 1] = inputs[k].delta;
  }
  return u;
}

solver::BoxBounds replicated_box(const OcpConfig& cfg) {
  solver::BoxBounds box;
  box.lower.resize(2 * cfg.horizon);
  box.upper.resize(2 * cfg.horizon);
  for (std::size_t k = 0; k < cfg.horizon; ++k) {
    box.lower[2 * k] = cfg.input_lower.d;
    box.lower[2 * k + 1] = cfg.input_lower.delta;
    box.upper[2 * k] = cfg.input_upper.d;
    box.upper[2 * k + 1] = cfg.input_upper.delta;
  }
  return box;
}

}  // namespace

void OcpConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("ocp horizon must be at least 1");
  if (!(ts > 0.0)) throw std::invalid_argument("ocp ts must be positive");
  if (q1[0] < 0.0 || q1[1] < 0.0 || q2[0] < 0.0 || q2[1] < 0.0) {
    throw std::invalid_argument("ocp weights must be non-negative");
  }
  if (!(input_lower.d <= input_upper.d) || !(input_lower.delta <= input_upper.delta)) {
    throw std::invalid_argument("ocp input bounds out of order");
  }
  if (!(vx_min <= vx_max)) throw std::invalid_argument("ocp vx bounds out of order");
  if (boundary_margin < 0.0) throw std::invalid_argument("ocp boundary margin negative");
}

ControllerState ControllerState::initial(const OcpConfig& cfg) {
  ControllerState s;
  ControlInput mid{0.5, 0.0};
  mid.d = std::clamp(mid.d, cfg.input_lower.d, cfg.input_upper.d);
  mid.delta = std::clamp(mid.delta, cfg.input_lower.delta, cfg.input_upper.delta);
  s.warm_start.assign(cfg.horizon, mid);
  return s;
}

std::vector<VehicleState> rollout(const VehicleState& x0,
                                  std::span<const ControlInput> inputs,
                                  const VehicleParams& params, double ts) {
  std::vector<VehicleState> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    try {
      states.push_back(step_euler(states.back(), inputs[k], ts, params));
    } catch (const NumericalError& e) {
      throw NumericalError(e.field(), "rollout blew up at step " + std::to_string(k) +
                                          ": " + e.what());
    }
  }
  return states;
}

// ---------------------------------------------------------------------------
// OcpEvaluator

struct OcpEvaluator::Cache {
  std::vector<double> u;  // decision vector the rest of the cache matches
  bool valid = false;
  std::vector<ControlInput> inputs;
  std::vector<VehicleState> states;       // N+1
  std::vector<Linearization> lin;         // N
  std::vector<std::size_t> proj_index;    // N (boundary steps 0..N-1)
  std::vector<Vec2> proj_point;           // N
  std::vector<std::array<double, 6>> seeds;  // scratch, N+1
};

OcpEvaluator::OcpEvaluator(VehicleState x0, ControlInput u_prev, Vec2 p_ref,
                           const VehicleParams& params, const OcpConfig& cfg,
                           const TrackLayout* layout, std::size_t projection_hint)
    : x0_(x0),
      u_prev_(u_prev),
      p_ref_(p_ref),
      params_(params),
      cfg_(cfg),
      layout_(layout),
      hint_(projection_hint),
      cache_(std::make_shared<Cache>()) {
  cfg_.validate();
  if (layout_ != nullptr) {
    // Obstacles beyond horizon reach can never produce an active residual.
    const double reach =
        static_cast<double>(cfg_.horizon) * cfg_.ts * cfg_.vx_max + 2.0;
    const Vec2 p{x0_.p_x, x0_.p_y};
    for (std::size_t j = 0; j < layout_->obstacles.size(); ++j) {
      const Obstacle& o = layout_->obstacles[j];
      if (dist(p, o.center) <= reach + o.clearance) obstacles_.push_back(j);
    }
  }
}

void OcpEvaluator::ensure(std::span<const double> u) {
  Cache& c = *cache_;
  if (c.valid && c.u.size() == u.size() && std::equal(u.begin(), u.end(), c.u.begin())) {
    return;
  }
  c.u.assign(u.begin(), u.end());
  unpack_inputs(u, c.inputs);
  const std::size_t N = c.inputs.size();

  c.states.clear();
  c.states.reserve(N + 1);
  c.states.push_back(x0_);
  c.lin.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    c.lin[k] = linearize(c.states.back(), c.inputs[k], params_);
    const auto x = c.states.back().to_array();
    const auto f = c.lin[k].f.to_array();
    std::array<double, 6> next;
    for (int i = 0; i < 6; ++i) next[i] = x[i] + cfg_.ts * f[i];
    c.states.push_back(VehicleState::from_array(next));
    if (!c.states.back().all_finite()) {
      throw NumericalError("rollout", "prediction rollout left the finite range at step " +
                                          std::to_string(k));
    }
  }

  if (layout_ != nullptr) {
    // Chain the hints: consecutive predicted positions move a fraction of a
    // metre, so a narrow window suffices and keeps the scan cost flat even
    // when the configured window covers the whole track.
    const std::size_t window = std::min<std::size_t>(cfg_.projection_window(), 48);
    c.proj_index.resize(N);
    c.proj_point.resize(N);
    std::size_t hint = hint_;
    for (std::size_t k = 0; k < N; ++k) {
      const auto pr =
          project(layout_->center_line, {c.states[k].p_x, c.states[k].p_y}, hint, window);
      c.proj_index[k] = pr.index;
      c.proj_point[k] = pr.point;
      hint = pr.index;
    }
  }
  c.seeds.assign(N + 1, std::array<double, 6>{});
  c.valid = true;
}

void OcpEvaluator::adjoint_sweep(std::span<const double> terminal_seed,
                                 const std::vector<std::array<double, 6>>& step_seeds,
                                 std::span<double> grad_out, bool add_rate_terms,
                                 std::span<const double> u) const {
  const Cache& c = *cache_;
  const std::size_t N = c.inputs.size();

  std::array<double, 6> costate{};
  for (int i = 0; i < 6; ++i) costate[i] = terminal_seed[i];
  if (!step_seeds.empty()) {
    for (int i = 0; i < 6; ++i) costate[i] += step_seeds[N][i];
  }

  for (std::size_t k = N; k-- > 0;) {
    const auto& A = c.lin[k].df_dx;
    const auto& B = c.lin[k].df_du;
    // Input block: g_k += (ts * df_du)^T costate
    double gd = 0.0, gdelta = 0.0;
    for (int i = 0; i < 6; ++i) {
      gd += B[i][0] * costate[i];
      gdelta += B[i][1] * costate[i];
    }
    grad_out[2 * k] += cfg_.ts * gd;
    grad_out[2 * k + 1] += cfg_.ts * gdelta;

    // Costate: (I + ts * df_dx)^T costate, then the seed attached to x_k.
    std::array<double, 6> next{};
    for (int j = 0; j < 6; ++j) {
      double acc = costate[j];
      for (int i = 0; i < 6; ++i) acc += cfg_.ts * A[i][j] * costate[i];
      next[j] = acc;
    }
    if (!step_seeds.empty() && k > 0) {
      for (int i = 0; i < 6; ++i) next[i] += step_seeds[k][i];
    }
    costate = next;
  }

  if (add_rate_terms) {
    for (std::size_t k = 0; k < N; ++k) {
      const double d_prev = k == 0 ? u_prev_.d : u[2 * (k - 1)];
      const double de_prev = k == 0 ? u_prev_.delta : u[2 * (k - 1) + 1];
      grad_out[2 * k] += 2.0 * cfg_.q2[0] * (u[2 * k] - d_prev);
      grad_out[2 * k + 1] += 2.0 * cfg_.q2[1] * (u[2 * k + 1] - de_prev);
      if (k + 1 < N) {
        grad_out[2 * k] -= 2.0 * cfg_.q2[0] * (u[2 * (k + 1)] - u[2 * k]);
        grad_out[2 * k + 1] -= 2.0 * cfg_.q2[1] * (u[2 * (k + 1) + 1] - u[2 * k + 1]);
      }
    }
  }
}

solver::CostGradFn OcpEvaluator::cost_grad() {
  return [this](std::span<const double> u, std::span<double> grad) -> double {
    ensure(u);
    const Cache& c = *cache_;
    const std::size_t N = c.inputs.size();

    const VehicleState& xN = c.states[N];
    const double ex = xN.p_x - p_ref_.x;
    const double ey = xN.p_y - p_ref_.y;
    double cost = cfg_.q1[0] * ex * ex + cfg_.q1[1] * ey * ey;
    for (std::size_t k = 0; k < N; ++k) {
      const double dd = c.inputs[k].d - (k == 0 ? u_prev_.d : c.inputs[k - 1].d);
      const double dde =
          c.inputs[k].delta - (k == 0 ? u_prev_.delta : c.inputs[k - 1].delta);
      cost += cfg_.q2[0] * dd * dd + cfg_.q2[1] * dde * dde;
    }

    if (!grad.empty()) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const std::array<double, 6> terminal{2.0 * cfg_.q1[0] * ex, 2.0 * cfg_.q1[1] * ey,
                                           0.0, 0.0, 0.0, 0.0};
      adjoint_sweep(terminal, {}, grad, true, u);
    }
    return cost;
  };
}

// Residual rows are kept only where the inputs can act. x_0 is measured and,
// through the Euler chain, positions respond to inputs with a two-step lag
// (input -> velocity -> position), so position rows below k = 2 and velocity
// rows below k = 1 are constants in the decision space; keeping them would
// make the NLP formally infeasible whenever the plant drifts past a bound,
// with nothing the inputs could do about it.
std::size_t OcpEvaluator::boundary_dim() const {
  return layout_ && cfg_.horizon >= 3 ? cfg_.horizon - 2 : 0;
}

std::size_t OcpEvaluator::penalty_dim() const {
  const std::size_t obstacle_rows =
      cfg_.horizon >= 2 ? obstacles_.size() * (cfg_.horizon - 1) : 0;
  return obstacle_rows + 2 * cfg_.horizon;
}

void OcpEvaluator::boundary_residuals(std::span<const double> u, std::span<double> out) {
  ensure(u);
  const Cache& c = *cache_;
  for (std::size_t k = 2; k < cfg_.horizon; ++k) {
    const double dx = c.states[k].p_x - c.proj_point[k].x;
    const double dy = c.states[k].p_y - c.proj_point[k].y;
    out[k - 2] = dx * dx + dy * dy;
  }
}

void OcpEvaluator::boundary_vjp(std::span<const double> u, std::span<const double> y,
                                std::span<double> grad) {
  ensure(u);
  Cache& c = *cache_;
  const std::size_t N = cfg_.horizon;
  auto& seeds = c.seeds;
  for (auto& s : seeds) s.fill(0.0);
  // The projected point is held constant for differentiation; index changes
  // are measure-zero and the residual stays continuous across them.
  for (std::size_t k = 2; k < N; ++k) {
    seeds[k][0] += y[k - 2] * 2.0 * (c.states[k].p_x - c.proj_point[k].x);
    seeds[k][1] += y[k - 2] * 2.0 * (c.states[k].p_y - c.proj_point[k].y);
  }
  const std::array<double, 6> zero{};
  adjoint_sweep(zero, seeds, grad, false, u);
}

void OcpEvaluator::penalty_residuals(std::span<const double> u, std::span<double> out) {
  ensure(u);
  const Cache& c = *cache_;
  const std::size_t N = cfg_.horizon;
  std::size_t row = 0;
  for (std::size_t k = 2; k <= N; ++k) {
    for (const std::size_t j : obstacles_) {
      const Obstacle& o = layout_->obstacles[j];
      const double dx = c.states[k].p_x - o.center.x;
      const double dy = c.states[k].p_y - o.center.y;
      const double margin = o.clearance * o.clearance - (dx * dx + dy * dy);
      out[row++] = margin > 0.0 ? margin : 0.0;
    }
  }
  const double w = cfg_.vx_penalty_weight;
  for (std::size_t k = 1; k <= N; ++k) {
    const double low = cfg_.vx_min - c.states[k].v_x;
    out[row++] = low > 0.0 ? w * low : 0.0;
  }
  for (std::size_t k = 1; k <= N; ++k) {
    const double high = c.states[k].v_x - cfg_.vx_max;
    out[row++] = high > 0.0 ? w * high : 0.0;
  }
}

void OcpEvaluator::penalty_vjp(std::span<const double> u, std::span<const double> y,
                               std::span<double> grad) {
  ensure(u);
  Cache& c = *cache_;
  const std::size_t N = cfg_.horizon;
  auto& seeds = c.seeds;
  for (auto& s : seeds) s.fill(0.0);

  std::size_t row = 0;
  for (std::size_t k = 2; k <= N; ++k) {
    for (const std::size_t j : obstacles_) {
      const Obstacle& o = layout_->obstacles[j];
      const double dx = c.states[k].p_x - o.center.x;
      const double dy = c.states[k].p_y - o.center.y;
      const bool active = o.clearance * o.clearance - (dx * dx + dy * dy) > 0.0;
      if (active) {
        seeds[k][0] -= y[row] * 2.0 * dx;
        seeds[k][1] -= y[row] * 2.0 * dy;
      }
      ++row;
    }
  }
  const double w = cfg_.vx_penalty_weight;
  for (std::size_t k = 1; k <= N; ++k) {
    if (cfg_.vx_min - c.states[k].v_x > 0.0) seeds[k][3] -= w * y[row];
    ++row;
  }
  for (std::size_t k = 1; k <= N; ++k) {
    if (c.states[k].v_x - cfg_.vx_max > 0.0) seeds[k][3] += w * y[row];
    ++row;
  }

  const std::array<double, 6> zero{};
  adjoint_sweep(zero, seeds, grad, false, u);
}

double ocp_cost(std::span<const ControlInput> inputs, const VehicleState& x0,
                const ControlInput& u_prev, Vec2 p_ref, const VehicleParams& params,
                const OcpConfig& cfg) {
  OcpConfig local = cfg;
  local.horizon = inputs.size();
  OcpEvaluator eval(x0, u_prev, p_ref, params, local, nullptr, 0);
  const auto u = flatten_inputs(inputs);
  return eval.cost_grad()(u, {});
}

std::vector<double> ocp_gradient(std::span<const ControlInput> inputs,
                                 const VehicleState& x0, const ControlInput& u_prev,
                                 Vec2 p_ref, const VehicleParams& params,
                                 const OcpConfig& cfg) {
  OcpConfig local = cfg;
  local.horizon = inputs.size();
  OcpEvaluator eval(x0, u_prev, p_ref, params, local, nullptr, 0);
  const auto u = flatten_inputs(inputs);
  std::vector<double> grad(u.size());
  eval.cost_grad()(u, grad);
  return grad;
}

ConstraintMaps build_constraint_maps(const std::shared_ptr<OcpEvaluator>& rollout,
                                     const TrackLayout& layout, const OcpConfig& cfg) {
  ConstraintMaps maps;

  const std::size_t m1 = rollout->boundary_dim();
  maps.alm.dim = m1;
  maps.alm.value = [rollout](std::span<const double> u, std::span<double> out) {
    rollout->boundary_residuals(u, out);
  };
  maps.alm.add_vjp = [rollout](std::span<const double> u, std::span<const double> y,
                               std::span<double> grad) {
    rollout->boundary_vjp(u, y, grad);
  };
  const double corridor =
      std::max(layout.R_g - layout.R_c - cfg.boundary_margin, 0.0);
  maps.alm_set.lower.assign(m1, 0.0);
  maps.alm_set.upper.assign(m1, corridor * corridor);

  maps.pm.dim = rollout->penalty_dim();
  maps.pm.value = [rollout](std::span<const double> u, std::span<double> out) {
    rollout->penalty_residuals(u, out);
  };
  maps.pm.add_vjp = [rollout](std::span<const double> u, std::span<const double> y,
                              std::span<double> grad) {
    rollout->penalty_vjp(u, y, grad);
  };
  return maps;
}

ControlStepResult control_step(const VehicleState& x_measured, const TrackLayout& layout,
                               const ControllerState& cstate, const VehicleParams& params,
                               const OcpConfig& cfg, const solver::SolverConfig& scfg) {
  if (!x_measured.all_finite()) {
    throw std::invalid_argument("control_step: non-finite measured state");
  }
  cfg.validate();
  if (cstate.warm_start.size() != cfg.horizon) {
    throw std::invalid_argument("control_step: warm start length mismatch");
  }

  const CenterLine& cl = layout.center_line;
  const auto proj = project(
      cl, {x_measured.p_x, x_measured.p_y},
      cstate.has_projection_hint ? std::optional(cstate.last_projection_index) : std::nullopt,
      cfg.projection_window());
  const Vec2 p_d = lookahead_reference(cl, proj.index, cfg.lookahead);

  auto eval = std::make_shared<OcpEvaluator>(x_measured, cstate.u_prev, p_d, params, cfg,
                                             &layout, proj.index);
  ConstraintMaps maps = build_constraint_maps(eval, layout, cfg);

  solver::NlpProblem problem;
  problem.n = 2 * cfg.horizon;
  problem.cost_grad = eval->cost_grad();
  problem.box = replicated_box(cfg);
  if (maps.alm.dim > 0) {
    problem.alm_map = std::move(maps.alm);
    problem.alm_set = std::move(maps.alm_set);
  }
  if (maps.pm.dim > 0) problem.pm_map = std::move(maps.pm);

  std::vector<double> u0 = flatten_inputs(cstate.warm_start);
  solver::project_box_in_place(u0, problem.box);

  const solver::DualWarmStart* warm = nullptr;
  if (cfg.warm_start_duals && cstate.has_duals && problem.alm_map &&
      cstate.duals.multipliers.size() == problem.alm_map->dim) {
    warm = &cstate.duals;
  }

  auto sol = solver::alm_pm_solve(problem, u0, scfg, warm);

  ControlStepResult result;
  result.horizon.degraded = sol.status == solver::SolveStatus::infeasible_penalty_exhausted;
  if (result.horizon.degraded) {
    // Fail-operational: fall back to the projected warm start.
    unpack_inputs(u0, result.horizon.inputs);
  } else {
    unpack_inputs(sol.u_star, result.horizon.inputs);
  }
  result.horizon.predicted = rollout(x_measured, result.horizon.inputs, params, cfg.ts);
  result.horizon.reference = p_d;
  result.horizon.projection_index = proj.index;
  result.u = result.horizon.inputs.front();

  ControllerState next;
  next.u_prev = result.u;
  next.warm_start.assign(result.horizon.inputs.begin() + 1, result.horizon.inputs.end());
  next.warm_start.push_back(result.horizon.inputs.back());
  next.last_projection_index = proj.index;
  next.has_projection_hint = true;
  if (cfg.warm_start_duals && !result.horizon.degraded) {
    next.duals.multipliers = sol.multipliers;
    next.duals.penalty = sol.penalty;
    next.has_duals = true;
  }
  result.horizon.diagnostics = std::move(sol);
  result.next = std::move(next);
  return result;
}

}  // namespace racing
