#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "racing/dynamics.hpp"
#include "racing/solver.hpp"

// Tire/drivetrain parameter identification from logged drive data:
// box-constrained least squares on one-step (teacher-forced) velocity
// predictions. Every prediction restarts from the measured state, so each
// record contributes an independent residual triple.

namespace racing::ident {

struct LogRecord {
  double t = 0.0;
  VehicleState state;
  ControlInput input;
};

struct Dataset {
  std::vector<LogRecord> records;
  double dt = 0.05;
  /// M >= 2, strictly increasing timestamps, gaps within 5% of dt.
  void validate() const;
};

/// CSV log format: header `t,p_x,p_y,phi,v_x,v_y,omega,d,delta`, one record
/// per line, SI units and radians throughout.
Dataset load_dataset_csv(const std::filesystem::path& path);
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);

struct ParamBounds {
  std::array<double, 10> zeta_lo{};
  std::array<double, 10> zeta_hi{};
  void validate() const;
  std::array<double, 10> midpoint() const;
};

/// Records slower than this are excluded from the fit: the slip-angle clamp
/// region would pollute the tire estimates.
inline constexpr double k_min_fit_speed = 0.3;

/// One Euler step of the model from the record's measured state using
/// zeta-derived tire/drivetrain parameters; returns (v_x, v_y, omega).
std::array<double, 3> one_step_predict(const LogRecord& record,
                                       const std::array<double, 10>& zeta,
                                       const ChassisParams& chassis, double dt);

struct CostResult {
  double cost = 0.0;
  std::array<double, 10> gradient{};
  std::size_t included = 0;  // residual triples that entered the sum
  std::size_t excluded = 0;  // skipped: slow or non-finite records
};

/// Sum over consecutive record pairs of the squared one-step velocity
/// residuals on all three channels, with the analytic gradient in zeta.
CostResult identification_cost(const Dataset& data, const std::array<double, 10>& zeta,
                               const ChassisParams& chassis);

struct TracePoint {
  double t;                        // timestamp of the predicted sample
  std::array<double, 3> measured;  // v_x, v_y, omega
  std::array<double, 3> predicted;
};

struct FitReport {
  std::array<double, 10> zeta{};
  solver::SolveStatus status = solver::SolveStatus::max_iters;
  double cost = 0.0;
  double rmse_vx = 0.0;
  double rmse_vy = 0.0;
  double rmse_omega = 0.0;
  std::size_t included_records = 0;
  std::size_t excluded_records = 0;
  std::size_t iterations = 0;
  std::vector<TracePoint> traces;  // predicted-vs-measured comparison data
};

/// Box-constrained fit of zeta starting from zeta0 (must lie within bounds).
/// A max-iters exit returns the best iterate with that status as a warning.
FitReport identify(const Dataset& data, const ParamBounds& bounds,
                   const std::array<double, 10>& zeta0, const ChassisParams& chassis,
                   const solver::SolverConfig& cfg);

}  // namespace racing::ident
