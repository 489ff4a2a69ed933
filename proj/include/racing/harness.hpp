#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "racing/controller.hpp"
#include "racing/ident.hpp"
#include "racing/solver.hpp"
#include "racing/track.hpp"

// Closed-loop simulation runner, metrics, synthetic identification data and
// result export. The plant and controller strictly alternate: at each tick
// the controller sees the measured plant state, its first input is held while
// the plant integrates through the tick.

namespace racing::harness {

enum class PlantIntegrator {
  rk4,    // RK4 at plant_dt substeps (default; deliberate model mismatch)
  euler,  // one Euler step per tick: plant equals the prediction model
};

struct ScenarioConfig {
  std::string name = "scenario";
  TrackSpec track = stadium_spec(8.0, 2.5);
  std::filesystem::path track_file;  // when set, overrides `track`
  VehicleParams vehicle = VehicleParams::defaults();
  OcpConfig ocp;
  solver::SolverConfig solver;
  double plant_dt = 0.001;
  double control_period = 0.033;
  PlantIntegrator plant_integrator = PlantIntegrator::rk4;
  std::size_t laps = 1;
  bool obstacles_enabled = true;
  std::optional<VehicleState> initial_state;  // default: rolling start near the line
  double sim_time_limit_per_lap = 120.0;      // [s]

  void validate() const;
};

/// Scenario file (JSON); unknown keys are rejected, missing ones default.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Build or load the scenario's track, honoring obstacles_enabled.
TrackLayout scenario_track(const ScenarioConfig& cfg);

struct TickLog {
  double t = 0.0;
  VehicleState state;   // measured plant state at the tick
  ControlInput input;   // applied over the tick
  std::size_t inner_iters = 0;
  std::size_t outer_iters = 0;
  solver::SolveStatus solver_status = solver::SolveStatus::converged;
  double fbe_residual = 0.0;
  double constraint_violation = 0.0;
  double solve_time_s = 0.0;
  double lateral_deviation = 0.0;
  double min_obstacle_distance = 0.0;  // NaN when the track has no obstacles
  bool degraded = false;
};

enum class RunStatus {
  completed,
  aborted_blowup,
  aborted_degraded,  // degraded controller for more than 10 consecutive ticks
  aborted_timeout,
};

const char* to_string(RunStatus s);

struct SimResult {
  std::string scenario_name;
  std::vector<TickLog> ticks;
  std::vector<double> lap_timestamps;  // directed start-line crossing times
  RunStatus status = RunStatus::completed;
  double control_period = 0.033;
  std::size_t laps_requested = 1;
  // Bound snapshot for violation counting.
  double corridor_limit = 1.76;  // R_g - R_c
  double vx_min = 0.0;
  double vx_max = 5.0;
  ControlInput input_lower{0.0, -0.5235987755982988};
  ControlInput input_upper{1.0, 0.5235987755982988};
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

/// Start/finish line: perpendicular to the center line at sample 0, reaching
/// R_g to both sides, oriented so that travel along increasing sample index
/// crosses it in the counted direction.
Segment start_line(const TrackLayout& layout);

/// Timestamps of directed crossings of the given segment by the logged
/// trajectory, linearly interpolated within the tick. A position exactly on
/// the line counts once, as the arrival of the crossing step.
std::vector<double> detect_laps(const SimResult& result, const Segment& line);

SimResult run_closed_loop(const ScenarioConfig& cfg);

struct Metrics {
  std::vector<double> lap_times_s;
  double vx_min = 0.0;
  double vx_mean = 0.0;
  double vx_max = 0.0;
  double max_lateral_deviation = 0.0;
  double min_obstacle_center_distance = 0.0;  // NaN without obstacles
  std::size_t input_bound_violations = 0;     // exact box check
  std::size_t vx_bound_violations = 0;        // outside [vx_min-1e-6, vx_max+1e-3]
  std::size_t deviation_violations = 0;       // beyond the corridor limit
  double solve_mean_ms = 0.0;
  double solve_max_ms = 0.0;
  double solve_p99_ms = 0.0;
  /// 1 ms bins over [0, 33) ms plus one overflow bin; counts sum to ticks.
  std::array<std::size_t, 34> solve_histogram{};
};

Metrics compute_metrics(const SimResult& result);

/// Discrete (Menger) curvature magnitude at every center-line sample.
std::vector<double> curvature_profile(const CenterLine& cl);

struct SpeedByCurvature {
  double mean_vx_tight = 0.0;     // ticks in the top curvature quartile
  double mean_vx_straight = 0.0;  // ticks in the bottom curvature quartile
};

SpeedByCurvature speed_by_curvature_quartile(const SimResult& result,
                                             const CenterLine& cl);

/// Synthetic identification drive, sampled every 50 ms with zero-order-hold
/// inputs and Euler integration at the sample step, so one-step predictions
/// with the generating parameters reproduce the log exactly. Suites:
///   "standard"  83.7 s launch / coast / brake / sine-steer composite (M = 1674)
///   "short"     10 s launch + sine smoke set (M = 200)
/// Gaussian noise of the given sigma is added to the velocity channels only,
/// from a fixed-seed generator; the same seed reproduces the byte-identical
/// dataset.
ident::Dataset generate_ident_data(std::string_view suite, const VehicleParams& params,
                                   double noise_sigma, std::uint64_t seed);

/// Writes trajectory.csv, inputs.csv (with a degrees column for the steering
/// angle), metrics.json, solve_histogram.csv and timing.json into dir.
/// trajectory.csv, inputs.csv and metrics.json depend only on the simulated
/// content and are byte-identical across reruns of the same scenario;
/// wall-clock measurements live in timing.json and solve_histogram.csv.
void export_results(const SimResult& result, const Metrics& metrics,
                    const std::filesystem::path& dir);

/// Raw result round-trip (result.json) feeding the `export` subcommand.
void save_result(const SimResult& result, const std::filesystem::path& file);
SimResult load_result(const std::filesystem::path& file);

struct TrajectoryRow {
  double t, p_x, p_y, phi, v_x, v_y, omega, lateral_deviation, min_obstacle_distance;
};
std::vector<TrajectoryRow> load_trajectory_csv(const std::filesystem::path& path);

}  // namespace racing::harness
