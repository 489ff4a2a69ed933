#include "racing/ident.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace racing::ident {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

VehicleParams params_from_zeta(const std::array<double, 10>& zeta,
                               const ChassisParams& chassis) {
  VehicleParams p;
  p.chassis = chassis;
  p.set_zeta(zeta);
  return p;
}

// Per-record residual work: prediction plus d(prediction)/d(zeta). The slip
// angles depend only on the measured state, so they are zeta-constants here.
struct PredictionJacobian {
  std::array<double, 3> pred;
  std::array<std::array<double, 10>, 3> jac{};  // rows: v_x, v_y, omega
};

PredictionJacobian predict_with_jacobian(const LogRecord& rec,
                                         const std::array<double, 10>& zeta,
                                         const ChassisParams& chassis, double dt) {
  const VehicleState& s = rec.state;
  const double w = std::max(s.v_x, k_v_eps);
  const double a_f = -std::atan((s.omega * chassis.l_f + s.v_y) / w) + rec.input.delta;
  const double a_r = std::atan((s.omega * chassis.l_r - s.v_y) / w);
  const double c_d = std::cos(rec.input.delta);
  const double s_d = std::sin(rec.input.delta);

  const double B_f = zeta[0], B_r = zeta[1], C_f = zeta[2], C_r = zeta[3];
  const double D_f = zeta[4], D_r = zeta[5];
  const double t_f = std::atan(B_f * a_f);
  const double t_r = std::atan(B_r * a_r);
  const double F_fy = D_f * std::sin(C_f * t_f);
  const double F_ry = D_r * std::sin(C_r * t_r);
  const double F_x = (zeta[6] - zeta[7] * s.v_x) * rec.input.d - zeta[8] -
                     zeta[9] * s.v_x * s.v_x;

  // dF_fy / d(B_f, C_f, D_f) and the rear analogue
  const double cos_f = D_f * std::cos(C_f * t_f);
  const double cos_r = D_r * std::cos(C_r * t_r);
  const double dFfy_dB = cos_f * C_f * a_f / (1.0 + B_f * B_f * a_f * a_f);
  const double dFfy_dC = cos_f * t_f;
  const double dFfy_dD = std::sin(C_f * t_f);
  const double dFry_dB = cos_r * C_r * a_r / (1.0 + B_r * B_r * a_r * a_r);
  const double dFry_dC = cos_r * t_r;
  const double dFry_dD = std::sin(C_r * t_r);

  // dF_x / d(C_m1..C_m4)
  const std::array<double, 4> dFx{rec.input.d, -s.v_x * rec.input.d, -1.0,
                                  -s.v_x * s.v_x};

  PredictionJacobian out;
  const double m = chassis.m;
  const double J_z = chassis.J_z;
  const double l_f = chassis.l_f;
  const double l_r = chassis.l_r;

  out.pred[0] = s.v_x + dt * ((F_x * (1.0 + c_d) - F_fy * s_d) / m + s.v_y * s.omega);
  out.pred[1] = s.v_y + dt * ((F_ry + F_fy * c_d + F_x * s_d) / m - s.v_x * s.omega);
  out.pred[2] = s.omega +
                dt * ((l_f * F_fy * c_d + l_f * F_x * s_d - l_r * F_ry) / J_z);

  // v_x row: front-tire slots and the drivetrain slots
  const double kx = dt / m;
  out.jac[0][0] = -kx * s_d * dFfy_dB;
  out.jac[0][2] = -kx * s_d * dFfy_dC;
  out.jac[0][4] = -kx * s_d * dFfy_dD;
  for (int i = 0; i < 4; ++i) out.jac[0][6 + i] = kx * (1.0 + c_d) * dFx[i];

  // v_y row: both axles and the drivetrain through sin(delta)
  out.jac[1][0] = kx * c_d * dFfy_dB;
  out.jac[1][2] = kx * c_d * dFfy_dC;
  out.jac[1][4] = kx * c_d * dFfy_dD;
  out.jac[1][1] = kx * dFry_dB;
  out.jac[1][3] = kx * dFry_dC;
  out.jac[1][5] = kx * dFry_dD;
  for (int i = 0; i < 4; ++i) out.jac[1][6 + i] = kx * s_d * dFx[i];

  // omega row
  const double ko = dt / J_z;
  out.jac[2][0] = ko * l_f * c_d * dFfy_dB;
  out.jac[2][2] = ko * l_f * c_d * dFfy_dC;
  out.jac[2][4] = ko * l_f * c_d * dFfy_dD;
  out.jac[2][1] = -ko * l_r * dFry_dB;
  out.jac[2][3] = -ko * l_r * dFry_dC;
  out.jac[2][5] = -ko * l_r * dFry_dD;
  for (int i = 0; i < 4; ++i) out.jac[2][6 + i] = ko * l_f * s_d * dFx[i];

  return out;
}

}  // namespace

void Dataset::validate() const {
  if (records.size() < 2) fail("dataset needs at least 2 records");
  if (!(dt > 0.0)) fail("dataset dt must be positive");
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const double gap = records[k + 1].t - records[k].t;
    if (!(gap > 0.0)) {
      fail("dataset timestamps not strictly increasing at record " + std::to_string(k + 1));
    }
    if (std::abs(gap - dt) > 0.05 * dt) {
      fail("dataset sampling gap off nominal at record " + std::to_string(k + 1));
    }
  }
}

void ParamBounds::validate() const {
  for (int i = 0; i < 10; ++i) {
    if (!(zeta_lo[i] <= zeta_hi[i])) fail("parameter bounds out of order at slot " + std::to_string(i));
  }
  for (int i = 0; i < 6; ++i) {
    if (!(zeta_lo[i] > 0.0)) fail("tire parameter lower bounds must be strictly positive");
  }
}

std::array<double, 10> ParamBounds::midpoint() const {
  std::array<double, 10> mid;
  for (int i = 0; i < 10; ++i) mid[i] = 0.5 * (zeta_lo[i] + zeta_hi[i]);
  return mid;
}

std::array<double, 3> one_step_predict(const LogRecord& record,
                                       const std::array<double, 10>& zeta,
                                       const ChassisParams& chassis, double dt) {
  const VehicleParams p = params_from_zeta(zeta, chassis);
  const VehicleState next = step_euler(record.state, record.input, dt, p);
  return {next.v_x, next.v_y, next.omega};
}

CostResult identification_cost(const Dataset& data, const std::array<double, 10>& zeta,
                               const ChassisParams& chassis) {
  data.validate();
  CostResult out;
  for (std::size_t k = 0; k + 1 < data.records.size(); ++k) {
    const LogRecord& rec = data.records[k];
    const LogRecord& next = data.records[k + 1];
    if (rec.state.v_x < k_min_fit_speed || !rec.state.all_finite() ||
        !rec.input.all_finite()) {
      ++out.excluded;
      continue;
    }
    const auto pj = predict_with_jacobian(rec, zeta, chassis, data.dt);
    const std::array<double, 3> meas{next.state.v_x, next.state.v_y, next.state.omega};
    bool finite = true;
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(pj.pred[c]) || !std::isfinite(meas[c])) finite = false;
    }
    if (!finite) {
      ++out.excluded;
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      const double res = meas[c] - pj.pred[c];
      out.cost += res * res;
      for (int i = 0; i < 10; ++i) out.gradient[i] -= 2.0 * res * pj.jac[c][i];
    }
    ++out.included;
  }
  if (out.included == 0) fail("identification cost: every record was excluded");
  return out;
}

FitReport identify(const Dataset& data, const ParamBounds& bounds,
                   const std::array<double, 10>& zeta0, const ChassisParams& chassis,
                   const solver::SolverConfig& cfg) {
  data.validate();
  bounds.validate();
  for (int i = 0; i < 10; ++i) {
    if (zeta0[i] < bounds.zeta_lo[i] || zeta0[i] > bounds.zeta_hi[i]) {
      fail("identify: zeta0 outside bounds at slot " + std::to_string(i));
    }
  }

  solver::NlpProblem problem;
  problem.n = 10;
  problem.box.lower.assign(bounds.zeta_lo.begin(), bounds.zeta_lo.end());
  problem.box.upper.assign(bounds.zeta_hi.begin(), bounds.zeta_hi.end());
  problem.cost_grad = [&data, &chassis](std::span<const double> u,
                                        std::span<double> grad) -> double {
    std::array<double, 10> z;
    std::copy(u.begin(), u.end(), z.begin());
    const CostResult r = identification_cost(data, z, chassis);
    if (!grad.empty()) std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return r.cost;
  };

  const auto sol = solver::panoc_solve(problem, zeta0, cfg);

  FitReport report;
  std::copy(sol.u_star.begin(), sol.u_star.end(), report.zeta.begin());
  report.status = sol.status;
  report.cost = sol.cost;
  report.iterations = sol.inner_iters;

  // Per-channel RMSE and the predicted-vs-measured traces at the fit.
  std::array<double, 3> sq{};
  for (std::size_t k = 0; k + 1 < data.records.size(); ++k) {
    const LogRecord& rec = data.records[k];
    const LogRecord& next = data.records[k + 1];
    if (rec.state.v_x < k_min_fit_speed || !rec.state.all_finite() ||
        !rec.input.all_finite()) {
      ++report.excluded_records;
      continue;
    }
    const auto pred = one_step_predict(rec, report.zeta, chassis, data.dt);
    const std::array<double, 3> meas{next.state.v_x, next.state.v_y, next.state.omega};
    for (int c = 0; c < 3; ++c) {
      const double res = meas[c] - pred[c];
      sq[c] += res * res;
    }
    report.traces.push_back({next.t, meas, pred});
    ++report.included_records;
  }
  const double n = static_cast<double>(std::max<std::size_t>(report.included_records, 1));
  report.rmse_vx = std::sqrt(sq[0] / n);
  report.rmse_vy = std::sqrt(sq[1] / n);
  report.rmse_omega = std::sqrt(sq[2] / n);
  return report;
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,p_x,p_y,phi,v_x,v_y,omega,d,delta") {
    fail("dataset " + path.string() + ": bad or missing header");
  }
  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    double v[9];
    char comma;
    for (int i = 0; i < 9; ++i) {
      if (!(ss >> v[i])) fail(path.string() + ":" + std::to_string(line_no) + ": bad field");
      if (i < 8 && !(ss >> comma && comma == ',')) {
        fail(path.string() + ":" + std::to_string(line_no) + ": expected comma");
      }
    }
    LogRecord rec;
    rec.t = v[0];
    rec.state = {v[1], v[2], v[3], v[4], v[5], v[6]};
    rec.input = {v[7], v[8]};
    data.records.push_back(rec);
  }
  if (data.records.size() >= 2) {
    data.dt = data.records[1].t - data.records[0].t;
  }
  data.validate();
  return data;
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path.string());
  out << "t,p_x,p_y,phi,v_x,v_y,omega,d,delta\n";
  char buf[512];
  for (const LogRecord& r : data.records) {
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t,
                  r.state.p_x, r.state.p_y, r.state.phi, r.state.v_x, r.state.v_y,
                  r.state.omega, r.input.d, r.input.delta);
    out << buf;
  }
}

}  // namespace racing::ident
