#pragma once

#include <array>
#include <stdexcept>
#include <utility>

#include "racing/errors.hpp"

// Planar dynamic bicycle model of the small-scale race car: Pacejka lateral
// tire forces, an empirical drivetrain map for the longitudinal force, and
// fixed-step integrators. The controller predicts with forward Euler; the
// simulated plant integrates the same model with RK4 at a finer step.

namespace racing {

/// Slip-angle denominator clamp [m/s]; keeps the model evaluable from standstill.
inline constexpr double k_v_eps = 0.05;

struct ChassisParams {
  double l_f;  // front axle to CoG [m]
  double l_r;  // rear axle to CoG [m]
  double m;    // mass [kg]
  double J_z;  // yaw inertia [kg m^2]
  void validate() const;
};

struct TireParams {
  double B_f, B_r;  // stiffness factors
  double C_f, C_r;  // shape factors
  double D_f, D_r;  // peak factors [N]
  void validate() const;
};

struct DrivetrainParams {
  double C_m1;  // [N]
  double C_m2;  // [kg/s]
  double C_m3;  // [N]
  double C_m4;  // [kg/m]
  void validate() const;
};

struct VehicleParams {
  ChassisParams chassis;
  TireParams tires;
  DrivetrainParams drivetrain;

  void validate() const;

  /// Identified values for the 1:10 car the project ships with.
  static VehicleParams defaults();

  /// Tire + drivetrain coefficients as the ordered 10-vector
  /// [B_f, B_r, C_f, C_r, D_f, D_r, C_m1, C_m2, C_m3, C_m4].
  std::array<double, 10> zeta() const;
  void set_zeta(const std::array<double, 10>& z);
};

struct VehicleState {
  double p_x = 0.0;    // world position [m]
  double p_y = 0.0;    // world position [m]
  double phi = 0.0;    // heading [rad]
  double v_x = 0.0;    // body-frame longitudinal velocity [m/s]
  double v_y = 0.0;    // body-frame lateral velocity [m/s]
  double omega = 0.0;  // yaw rate [rad/s]

  std::array<double, 6> to_array() const { return {p_x, p_y, phi, v_x, v_y, omega}; }
  static VehicleState from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  bool all_finite() const;
};

struct ControlInput {
  double d = 0.0;      // throttle duty in [0, 1]
  double delta = 0.0;  // steering angle [rad]
  bool all_finite() const;
};

/// Time derivative of VehicleState, same slots, per-second units.
using StateDerivative = VehicleState;

/// Front/rear slip angles. The longitudinal velocity in the denominator is
/// clamped at k_v_eps.
std::pair<double, double> slip_angles(const VehicleState& state, double delta,
                                      const ChassisParams& chassis);

/// Pacejka magic formula, front and rear: F = D sin(C atan(B alpha)).
std::pair<double, double> lateral_forces(double alpha_f, double alpha_r,
                                         const TireParams& tires);

/// Drivetrain force F_x = (C_m1 - C_m2 v_x) d - C_m3 - C_m4 v_x^2.
double longitudinal_force(double d, double v_x, const DrivetrainParams& p);

/// Continuous-time dynamics; the front and rear longitudinal forces are both
/// taken equal to the drivetrain force.
StateDerivative state_derivative(const VehicleState& state, const ControlInput& u,
                                 const VehicleParams& params);

/// Plant-side dynamics: identical except the drivetrain force is clamped to
/// zero when the car is at rest and the force points backwards, so braking at
/// standstill cannot reverse the car.
StateDerivative plant_state_derivative(const VehicleState& state, const ControlInput& u,
                                       const VehicleParams& params);

/// x + dt * f(x, u); exactly one derivative evaluation.
VehicleState step_euler(const VehicleState& state, const ControlInput& u, double dt,
                        const VehicleParams& params);

/// Classical RK4 step with u held constant over dt.
VehicleState step_rk4(const VehicleState& state, const ControlInput& u, double dt,
                      const VehicleParams& params);

/// RK4 on the plant-side dynamics (no reverse thrust at standstill).
VehicleState plant_step_rk4(const VehicleState& state, const ControlInput& u, double dt,
                            const VehicleParams& params);

/// Dynamics value plus analytic Jacobians, row-major: df_dx is 6x6 in state
/// order (p_x, p_y, phi, v_x, v_y, omega), df_du is 6x2 in input order
/// (d, delta). Used by the adjoint sweep over the Euler prediction chain.
struct Linearization {
  StateDerivative f;
  std::array<std::array<double, 6>, 6> df_dx{};
  std::array<std::array<double, 2>, 6> df_du{};
};

Linearization linearize(const VehicleState& state, const ControlInput& u,
                        const VehicleParams& params);

/// Generic RK4 kernel over the 6-slot state; `deriv` maps state array to
/// derivative array. step_rk4 and plant_step_rk4 run through this.
template <class F>
std::array<double, 6> rk4_step(F&& deriv, const std::array<double, 6>& x, double dt) {
  const std::array<double, 6> k1 = deriv(x);
  std::array<double, 6> tmp;
  for (int i = 0; i < 6; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const std::array<double, 6> k2 = deriv(tmp);
  for (int i = 0; i < 6; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const std::array<double, 6> k3 = deriv(tmp);
  for (int i = 0; i < 6; ++i) tmp[i] = x[i] + dt * k3[i];
  const std::array<double, 6> k4 = deriv(tmp);
  std::array<double, 6> out;
  for (int i = 0; i < 6; ++i) {
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

}  // namespace racing
