#include <cmath>
#include <limits>
#include <stdexcept>

#include "racing/harness.hpp"

namespace racing::harness {

namespace {

double cross2(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

VehicleState default_start(const TrackLayout& layout) {
  // Rolling start half a metre before the start line so the first crossing
  // opens lap 1 shortly after launch.
  const CenterLine& cl = layout.center_line;
  const std::size_t K = cl.size();
  const std::size_t i = K - 5;
  const Vec2 p = cl.point(i);
  const Vec2 q = cl.point((i + 1) % K);
  VehicleState x;
  x.p_x = p.x;
  x.p_y = p.y;
  x.phi = std::atan2(q.y - p.y, q.x - p.x);
  x.v_x = 1.0;
  return x;
}

/// Forward crossing of `line` by the motion a -> b; returns the interpolation
/// fraction in [0, 1] when it crosses, nothing otherwise. A point exactly on
/// the line counts as arrived (side >= 0), so the next step cannot re-count it.
std::optional<double> crossing_fraction(const Segment& line, Vec2 a, Vec2 b) {
  const Vec2 dir = line.b - line.a;
  const double side_a = cross2(dir, a - line.a);
  const double side_b = cross2(dir, b - line.a);
  if (!(side_a < 0.0 && side_b >= 0.0)) return std::nullopt;
  const double s = side_a / (side_a - side_b);
  const Vec2 q = a + s * (b - a);
  const double len_sq = dir.x * dir.x + dir.y * dir.y;
  const double t = (dir.x * (q.x - line.a.x) + dir.y * (q.y - line.a.y)) / len_sq;
  if (t < 0.0 || t > 1.0) return std::nullopt;
  return s;
}

}  // namespace

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::aborted_blowup: return "aborted-blowup";
    case RunStatus::aborted_degraded: return "aborted-degraded";
    case RunStatus::aborted_timeout: return "aborted-timeout";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  vehicle.validate();
  ocp.validate();
  solver.validate();
  if (!(plant_dt > 0.0) || !(control_period > 0.0)) {
    throw std::invalid_argument("scenario time steps must be positive");
  }
  const double ratio = control_period / plant_dt;
  if (std::abs(ratio - std::llround(ratio)) > 1e-9) {
    throw std::invalid_argument("control period must be an integer multiple of plant dt");
  }
  if (laps < 1) throw std::invalid_argument("lap count must be at least 1");
  if (!(sim_time_limit_per_lap > 0.0)) {
    throw std::invalid_argument("sim time limit must be positive");
  }
}

TrackLayout scenario_track(const ScenarioConfig& cfg) {
  TrackLayout layout = cfg.track_file.empty() ? build_track(cfg.track)
                                              : load_track(cfg.track_file);
  if (!cfg.obstacles_enabled) layout.obstacles.clear();
  return layout;
}

Segment start_line(const TrackLayout& layout) {
  const CenterLine& cl = layout.center_line;
  const Vec2 p0 = cl.point(0);
  const Vec2 p1 = cl.point(1 % cl.size());
  Vec2 tangent = p1 - p0;
  const double len = norm(tangent);
  tangent = (1.0 / len) * tangent;
  const Vec2 normal{-tangent.y, tangent.x};
  // Ordered so travel along increasing sample index crosses right-to-left.
  return {p0 + layout.R_g * normal, p0 - layout.R_g * normal};
}

std::vector<double> detect_laps(const SimResult& result, const Segment& line) {
  std::vector<double> times;
  for (std::size_t i = 0; i + 1 < result.ticks.size(); ++i) {
    const VehicleState& a = result.ticks[i].state;
    const VehicleState& b = result.ticks[i + 1].state;
    if (const auto s = crossing_fraction(line, {a.p_x, a.p_y}, {b.p_x, b.p_y})) {
      times.push_back(result.ticks[i].t + *s * (result.ticks[i + 1].t - result.ticks[i].t));
    }
  }
  return times;
}

SimResult run_closed_loop(const ScenarioConfig& cfg) {
  cfg.validate();
  const TrackLayout layout = scenario_track(cfg);
  const CenterLine& cl = layout.center_line;

  SimResult result;
  result.scenario_name = cfg.name;
  result.control_period = cfg.control_period;
  result.laps_requested = cfg.laps;
  result.corridor_limit = layout.R_g - layout.R_c;
  result.vx_min = cfg.ocp.vx_min;
  result.vx_max = cfg.ocp.vx_max;
  result.input_lower = cfg.ocp.input_lower;
  result.input_upper = cfg.ocp.input_upper;

  const Segment line = start_line(layout);
  const auto substeps = static_cast<std::size_t>(
      std::llround(cfg.control_period / cfg.plant_dt));

  VehicleState x = cfg.initial_state ? *cfg.initial_state : default_start(layout);
  ControllerState cstate = ControllerState::initial(cfg.ocp);

  const double time_limit = cfg.sim_time_limit_per_lap * static_cast<double>(cfg.laps);
  const auto max_ticks = static_cast<std::size_t>(time_limit / cfg.control_period) + 1;

  std::size_t degraded_streak = 0;
  std::size_t crossings = 0;
  result.status = RunStatus::aborted_timeout;

  for (std::size_t tick = 0; tick < max_ticks; ++tick) {
    const double t = static_cast<double>(tick) * cfg.control_period;
    const Vec2 pos{x.p_x, x.p_y};

    TickLog log;
    log.t = t;
    log.state = x;
    log.lateral_deviation = lateral_deviation(
        cl, pos,
        cstate.has_projection_hint ? std::optional(cstate.last_projection_index)
                                   : std::nullopt,
        cfg.ocp.projection_window());
    log.min_obstacle_distance = std::numeric_limits<double>::quiet_NaN();
    for (const Obstacle& o : layout.obstacles) {
      const double d = dist(pos, o.center);
      if (std::isnan(log.min_obstacle_distance) || d < log.min_obstacle_distance) {
        log.min_obstacle_distance = d;
      }
    }

    ControlStepResult step;
    try {
      step = control_step(x, layout, cstate, cfg.vehicle, cfg.ocp, cfg.solver);
    } catch (const NumericalError&) {
      result.status = RunStatus::aborted_blowup;
      result.ticks.push_back(log);
      break;
    }

    log.input = step.u;
    log.inner_iters = step.horizon.diagnostics.inner_iters;
    log.outer_iters = step.horizon.diagnostics.outer_iters;
    log.solver_status = step.horizon.diagnostics.status;
    log.fbe_residual = step.horizon.diagnostics.fbe_residual;
    log.constraint_violation = step.horizon.diagnostics.constraint_violation;
    log.solve_time_s = step.horizon.diagnostics.solve_time_s;
    log.degraded = step.horizon.degraded;
    result.ticks.push_back(log);

    degraded_streak = step.horizon.degraded ? degraded_streak + 1 : 0;
    if (degraded_streak > 10) {
      result.status = RunStatus::aborted_degraded;
      break;
    }

    cstate = std::move(step.next);

    // Hold the input while the plant runs through the tick.
    try {
      if (cfg.plant_integrator == PlantIntegrator::euler) {
        x = step_euler(x, step.u, cfg.control_period, cfg.vehicle);
      } else {
        for (std::size_t s = 0; s < substeps; ++s) {
          x = plant_step_rk4(x, step.u, cfg.plant_dt, cfg.vehicle);
        }
      }
    } catch (const NumericalError&) {
      result.status = RunStatus::aborted_blowup;
      break;
    }

    if (const auto frac = crossing_fraction(line, pos, {x.p_x, x.p_y})) {
      result.lap_timestamps.push_back(t + *frac * cfg.control_period);
      ++crossings;
      if (crossings == cfg.laps + 1) {
        result.status = RunStatus::completed;
        break;
      }
    }
  }

  return result;
}

}  // namespace racing::harness
