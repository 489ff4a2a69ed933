#include "racing/dynamics.hpp"

#include <cmath>

namespace racing {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool finite(double v) { return std::isfinite(v); }

constexpr const char* k_state_fields[6] = {"p_x", "p_y", "phi", "v_x", "v_y", "omega"};

void check_derivative_finite(const StateDerivative& f) {
  const auto a = f.to_array();
  for (int i = 0; i < 6; ++i) {
    if (!finite(a[i])) {
      throw NumericalError(k_state_fields[i],
                           std::string("non-finite state derivative in ") + k_state_fields[i]);
    }
  }
}

// Shared force evaluation; the plant variant clamps reverse thrust at rest.
struct Forces {
  double F_x;
  double F_fy;
  double F_ry;
};

Forces eval_forces(const VehicleState& s, const ControlInput& u, const VehicleParams& p,
                   bool clamp_reverse) {
  const auto [alpha_f, alpha_r] = slip_angles(s, u.delta, p.chassis);
  const auto [F_fy, F_ry] = lateral_forces(alpha_f, alpha_r, p.tires);
  double F_x = longitudinal_force(u.d, s.v_x, p.drivetrain);
  if (clamp_reverse && s.v_x <= 0.0 && F_x < 0.0) F_x = 0.0;
  return {F_x, F_fy, F_ry};
}

StateDerivative derivative_impl(const VehicleState& s, const ControlInput& u,
                                const VehicleParams& p, bool clamp_reverse) {
  if (!s.all_finite() || !u.all_finite()) {
    throw std::invalid_argument("state_derivative: non-finite state or input");
  }
  const auto [F_x, F_fy, F_ry] = eval_forces(s, u, p, clamp_reverse);
  const double c_phi = std::cos(s.phi);
  const double s_phi = std::sin(s.phi);
  const double c_d = std::cos(u.delta);
  const double s_d = std::sin(u.delta);

  StateDerivative f;
  f.p_x = s.v_x * c_phi - s.v_y * s_phi;
  f.p_y = s.v_x * s_phi + s.v_y * c_phi;
  f.phi = s.omega;
  f.v_x = (F_x - F_fy * s_d + F_x * c_d) / p.chassis.m + s.v_y * s.omega;
  f.v_y = (F_ry + F_fy * c_d + F_x * s_d) / p.chassis.m - s.v_x * s.omega;
  f.omega = (p.chassis.l_f * F_fy * c_d + p.chassis.l_f * F_x * s_d -
             p.chassis.l_r * F_ry) /
            p.chassis.J_z;
  check_derivative_finite(f);
  return f;
}

}  // namespace

void ChassisParams::validate() const {
  require(l_f > 0.0 && l_r > 0.0 && m > 0.0 && J_z > 0.0,
          "chassis parameters must be strictly positive");
}

void TireParams::validate() const {
  require(B_f > 0.0 && B_r > 0.0 && C_f > 0.0 && C_r > 0.0 && D_f > 0.0 && D_r > 0.0,
          "tire parameters must be strictly positive");
}

void DrivetrainParams::validate() const {
  require(C_m1 >= 0.0 && C_m2 >= 0.0 && C_m3 >= 0.0 && C_m4 >= 0.0,
          "drivetrain parameters must be non-negative");
}

void VehicleParams::validate() const {
  chassis.validate();
  tires.validate();
  drivetrain.validate();
}

VehicleParams VehicleParams::defaults() {
  VehicleParams p;
  p.chassis = {0.178, 0.147, 5.692, 0.204};
  p.tires = {9.242, 17.716, 0.085, 0.133, 134.585, 159.919};
  p.drivetrain = {20.0, 6.92e-7, 3.99, 0.67};
  return p;
}

std::array<double, 10> VehicleParams::zeta() const {
  return {tires.B_f,      tires.B_r,      tires.C_f,      tires.C_r,      tires.D_f,
          tires.D_r,      drivetrain.C_m1, drivetrain.C_m2, drivetrain.C_m3,
          drivetrain.C_m4};
}

void VehicleParams::set_zeta(const std::array<double, 10>& z) {
  tires.B_f = z[0];
  tires.B_r = z[1];
  tires.C_f = z[2];
  tires.C_r = z[3];
  tires.D_f = z[4];
  tires.D_r = z[5];
  drivetrain.C_m1 = z[6];
  drivetrain.C_m2 = z[7];
  drivetrain.C_m3 = z[8];
  drivetrain.C_m4 = z[9];
}

bool VehicleState::all_finite() const {
  const auto a = to_array();
  for (double v : a) {
    if (!finite(v)) return false;
  }
  return true;
}

bool ControlInput::all_finite() const { return finite(d) && finite(delta); }

std::pair<double, double> slip_angles(const VehicleState& state, double delta,
                                      const ChassisParams& chassis) {
  if (!state.all_finite() || !finite(delta)) {
    throw std::invalid_argument("slip_angles: non-finite input");
  }
  const double w = std::max(state.v_x, k_v_eps);
  const double alpha_f = -std::atan((state.omega * chassis.l_f + state.v_y) / w) + delta;
  const double alpha_r = std::atan((state.omega * chassis.l_r - state.v_y) / w);
  return {alpha_f, alpha_r};
}

std::pair<double, double> lateral_forces(double alpha_f, double alpha_r,
                                         const TireParams& t) {
  if (!finite(alpha_f) || !finite(alpha_r)) {
    throw std::invalid_argument("lateral_forces: non-finite slip angle");
  }
  const double F_fy = t.D_f * std::sin(t.C_f * std::atan(t.B_f * alpha_f));
  const double F_ry = t.D_r * std::sin(t.C_r * std::atan(t.B_r * alpha_r));
  return {F_fy, F_ry};
}

double longitudinal_force(double d, double v_x, const DrivetrainParams& p) {
  return (p.C_m1 - p.C_m2 * v_x) * d - p.C_m3 - p.C_m4 * v_x * v_x;
}

StateDerivative state_derivative(const VehicleState& state, const ControlInput& u,
                                 const VehicleParams& params) {
  return derivative_impl(state, u, params, false);
}

StateDerivative plant_state_derivative(const VehicleState& state, const ControlInput& u,
                                       const VehicleParams& params) {
  return derivative_impl(state, u, params, true);
}

VehicleState step_euler(const VehicleState& state, const ControlInput& u, double dt,
                        const VehicleParams& params) {
  require(dt > 0.0, "step_euler: dt must be positive");
  const StateDerivative f = state_derivative(state, u, params);
  const auto x = state.to_array();
  const auto fx = f.to_array();
  std::array<double, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = x[i] + dt * fx[i];
  return VehicleState::from_array(out);
}

VehicleState step_rk4(const VehicleState& state, const ControlInput& u, double dt,
                      const VehicleParams& params) {
  require(dt > 0.0, "step_rk4: dt must be positive");
  const auto deriv = [&](const std::array<double, 6>& x) {
    return state_derivative(VehicleState::from_array(x), u, params).to_array();
  };
  return VehicleState::from_array(rk4_step(deriv, state.to_array(), dt));
}

VehicleState plant_step_rk4(const VehicleState& state, const ControlInput& u, double dt,
                            const VehicleParams& params) {
  require(dt > 0.0, "plant_step_rk4: dt must be positive");
  const auto deriv = [&](const std::array<double, 6>& x) {
    return plant_state_derivative(VehicleState::from_array(x), u, params).to_array();
  };
  return VehicleState::from_array(rk4_step(deriv, state.to_array(), dt));
}

Linearization linearize(const VehicleState& s, const ControlInput& u,
                        const VehicleParams& p) {
  if (!s.all_finite() || !u.all_finite()) {
    throw std::invalid_argument("linearize: non-finite state or input");
  }
  Linearization lin;

  const double m = p.chassis.m;
  const double J_z = p.chassis.J_z;
  const double l_f = p.chassis.l_f;
  const double l_r = p.chassis.l_r;

  const double c_phi = std::cos(s.phi);
  const double s_phi = std::sin(s.phi);
  const double c_d = std::cos(u.delta);
  const double s_d = std::sin(u.delta);

  // Forces and their building blocks, shared between the value and the
  // Jacobians (this sits in the rollout hot loop).
  const double w = std::max(s.v_x, k_v_eps);
  const bool w_free = s.v_x > k_v_eps;  // below the clamp, d(alpha)/d(v_x) = 0
  const double q_f = (s.omega * l_f + s.v_y) / w;
  const double q_r = (s.omega * l_r - s.v_y) / w;
  const double alpha_f = -std::atan(q_f) + u.delta;
  const double alpha_r = std::atan(q_r);

  const double datan_f = 1.0 / (1.0 + q_f * q_f);
  const double datan_r = 1.0 / (1.0 + q_r * q_r);

  // alpha partials w.r.t. (v_x, v_y, omega, delta)
  const double daf_dvx = w_free ? datan_f * (s.omega * l_f + s.v_y) / (w * w) : 0.0;
  const double daf_dvy = -datan_f / w;
  const double daf_dom = -datan_f * l_f / w;
  const double daf_dde = 1.0;
  const double dar_dvx = w_free ? -datan_r * (s.omega * l_r - s.v_y) / (w * w) : 0.0;
  const double dar_dvy = -datan_r / w;
  const double dar_dom = datan_r * l_r / w;

  // Pacejka values and slopes dF/dalpha
  const double tf = std::atan(p.tires.B_f * alpha_f);
  const double tr = std::atan(p.tires.B_r * alpha_r);
  const double F_fy = p.tires.D_f * std::sin(p.tires.C_f * tf);
  const double F_ry = p.tires.D_r * std::sin(p.tires.C_r * tr);
  const double dFfy = p.tires.D_f * std::cos(p.tires.C_f * tf) * p.tires.C_f *
                      p.tires.B_f / (1.0 + p.tires.B_f * p.tires.B_f * alpha_f * alpha_f);
  const double dFry = p.tires.D_r * std::cos(p.tires.C_r * tr) * p.tires.C_r *
                      p.tires.B_r / (1.0 + p.tires.B_r * p.tires.B_r * alpha_r * alpha_r);

  const double F_x = longitudinal_force(u.d, s.v_x, p.drivetrain);
  const double dFx_dvx = -p.drivetrain.C_m2 * u.d - 2.0 * p.drivetrain.C_m4 * s.v_x;
  const double dFx_dd = p.drivetrain.C_m1 - p.drivetrain.C_m2 * s.v_x;

  lin.f.p_x = s.v_x * c_phi - s.v_y * s_phi;
  lin.f.p_y = s.v_x * s_phi + s.v_y * c_phi;
  lin.f.phi = s.omega;
  lin.f.v_x = (F_x - F_fy * s_d + F_x * c_d) / m + s.v_y * s.omega;
  lin.f.v_y = (F_ry + F_fy * c_d + F_x * s_d) / m - s.v_x * s.omega;
  lin.f.omega = (l_f * F_fy * c_d + l_f * F_x * s_d - l_r * F_ry) / J_z;
  check_derivative_finite(lin.f);

  auto& A = lin.df_dx;
  auto& B = lin.df_du;

  // Row 0: d(p_x)/dt = v_x cos(phi) - v_y sin(phi)
  A[0][2] = -s.v_x * s_phi - s.v_y * c_phi;
  A[0][3] = c_phi;
  A[0][4] = -s_phi;
  // Row 1: d(p_y)/dt = v_x sin(phi) + v_y cos(phi)
  A[1][2] = s.v_x * c_phi - s.v_y * s_phi;
  A[1][3] = s_phi;
  A[1][4] = c_phi;
  // Row 2: d(phi)/dt = omega
  A[2][5] = 1.0;

  // Row 3: m v_x' = F_x (1 + cos d) - F_fy sin d + m v_y omega
  A[3][3] = (dFx_dvx * (1.0 + c_d) - s_d * dFfy * daf_dvx) / m;
  A[3][4] = (-s_d * dFfy * daf_dvy) / m + s.omega;
  A[3][5] = (-s_d * dFfy * daf_dom) / m + s.v_y;
  B[3][0] = dFx_dd * (1.0 + c_d) / m;
  B[3][1] = (-F_x * s_d - dFfy * daf_dde * s_d - F_fy * c_d) / m;

  // Row 4: m v_y' = F_ry + F_fy cos d + F_x sin d - m v_x omega
  A[4][3] = (dFry * dar_dvx + c_d * dFfy * daf_dvx + s_d * dFx_dvx) / m - s.omega;
  A[4][4] = (dFry * dar_dvy + c_d * dFfy * daf_dvy) / m;
  A[4][5] = (dFry * dar_dom + c_d * dFfy * daf_dom) / m - s.v_x;
  B[4][0] = s_d * dFx_dd / m;
  B[4][1] = (c_d * dFfy * daf_dde - F_fy * s_d + F_x * c_d) / m;

  // Row 5: J_z omega' = l_f F_fy cos d + l_f F_x sin d - l_r F_ry
  A[5][3] = (l_f * (c_d * dFfy * daf_dvx + s_d * dFx_dvx) - l_r * dFry * dar_dvx) / J_z;
  A[5][4] = (l_f * c_d * dFfy * daf_dvy - l_r * dFry * dar_dvy) / J_z;
  A[5][5] = (l_f * c_d * dFfy * daf_dom - l_r * dFry * dar_dom) / J_z;
  B[5][0] = l_f * s_d * dFx_dd / J_z;
  B[5][1] = l_f * (c_d * dFfy * daf_dde - F_fy * s_d + F_x * c_d) / J_z;

  return lin;
}

}  // namespace racing
