#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "racing/harness.hpp"

namespace racing::harness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) fail(where + ": unknown key '" + key + "'");
  }
}

std::vector<Obstacle> parse_obstacles(const json& j) {
  std::vector<Obstacle> out;
  for (const auto& o : j) {
    check_keys(o, {"center", "R", "Gamma"}, "obstacle");
    const auto& c = o.at("center");
    out.push_back({{c.at(0).get<double>(), c.at(1).get<double>()},
                   o.at("R").get<double>(),
                   o.at("Gamma").get<double>()});
  }
  return out;
}

TrackSpec parse_track(const json& j) {
  check_keys(j,
             {"builtin", "straight", "radius", "d_s", "R_g", "R_c", "obstacles",
              "vertices", "fillet_radii"},
             "track");
  TrackSpec spec;
  const std::string kind = j.value("builtin", "stadium");
  if (kind == "stadium") {
    spec = stadium_spec(j.value("straight", 8.0), j.value("radius", 2.5));
  } else if (kind == "circle") {
    spec = circle_spec(j.value("radius", 5.0));
  } else if (kind == "winding") {
    spec = winding_spec();
  } else if (kind == "polygon") {
    spec.vertices.clear();
    for (const auto& v : j.at("vertices")) {
      spec.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    spec.fillet_radii = j.at("fillet_radii").get<std::vector<double>>();
  } else {
    fail("track.builtin must be stadium, circle, winding or polygon");
  }
  spec.d_s = j.value("d_s", 0.1);
  spec.R_g = j.value("R_g", 2.0);
  spec.R_c = j.value("R_c", 0.24);
  if (j.contains("obstacles")) spec.obstacles = parse_obstacles(j.at("obstacles"));
  return spec;
}

void parse_vehicle(const json& j, VehicleParams& p) {
  check_keys(j, {"chassis", "tires", "drivetrain"}, "vehicle");
  if (j.contains("chassis")) {
    const auto& c = j.at("chassis");
    check_keys(c, {"l_f", "l_r", "m", "J_z"}, "vehicle.chassis");
    p.chassis.l_f = c.value("l_f", p.chassis.l_f);
    p.chassis.l_r = c.value("l_r", p.chassis.l_r);
    p.chassis.m = c.value("m", p.chassis.m);
    p.chassis.J_z = c.value("J_z", p.chassis.J_z);
  }
  if (j.contains("tires")) {
    const auto& t = j.at("tires");
    check_keys(t, {"B_f", "B_r", "C_f", "C_r", "D_f", "D_r"}, "vehicle.tires");
    p.tires.B_f = t.value("B_f", p.tires.B_f);
    p.tires.B_r = t.value("B_r", p.tires.B_r);
    p.tires.C_f = t.value("C_f", p.tires.C_f);
    p.tires.C_r = t.value("C_r", p.tires.C_r);
    p.tires.D_f = t.value("D_f", p.tires.D_f);
    p.tires.D_r = t.value("D_r", p.tires.D_r);
  }
  if (j.contains("drivetrain")) {
    const auto& d = j.at("drivetrain");
    check_keys(d, {"C_m1", "C_m2", "C_m3", "C_m4"}, "vehicle.drivetrain");
    p.drivetrain.C_m1 = d.value("C_m1", p.drivetrain.C_m1);
    p.drivetrain.C_m2 = d.value("C_m2", p.drivetrain.C_m2);
    p.drivetrain.C_m3 = d.value("C_m3", p.drivetrain.C_m3);
    p.drivetrain.C_m4 = d.value("C_m4", p.drivetrain.C_m4);
  }
}

void parse_ocp(const json& j, OcpConfig& cfg) {
  check_keys(j,
             {"horizon", "ts", "q1", "q2", "input_lower", "input_upper", "vx_min",
              "vx_max", "vx_penalty_weight", "lookahead", "boundary_margin",
              "warm_start_duals"},
             "ocp");
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.ts = j.value("ts", cfg.ts);
  if (j.contains("q1")) cfg.q1 = {j.at("q1").at(0).get<double>(), j.at("q1").at(1).get<double>()};
  if (j.contains("q2")) cfg.q2 = {j.at("q2").at(0).get<double>(), j.at("q2").at(1).get<double>()};
  if (j.contains("input_lower")) {
    cfg.input_lower = {j.at("input_lower").at(0).get<double>(),
                       j.at("input_lower").at(1).get<double>()};
  }
  if (j.contains("input_upper")) {
    cfg.input_upper = {j.at("input_upper").at(0).get<double>(),
                       j.at("input_upper").at(1).get<double>()};
  }
  cfg.vx_min = j.value("vx_min", cfg.vx_min);
  cfg.vx_max = j.value("vx_max", cfg.vx_max);
  cfg.vx_penalty_weight = j.value("vx_penalty_weight", cfg.vx_penalty_weight);
  cfg.lookahead = j.value("lookahead", cfg.lookahead);
  cfg.boundary_margin = j.value("boundary_margin", cfg.boundary_margin);
  cfg.warm_start_duals = j.value("warm_start_duals", cfg.warm_start_duals);
}

void parse_solver(const json& j, solver::SolverConfig& cfg) {
  check_keys(j,
             {"eps_inner", "eps_outer", "lbfgs_mem", "max_inner_iters",
              "max_outer_iters", "penalty_init", "penalty_update_factor", "max_penalty"},
             "solver");
  cfg.eps_inner = j.value("eps_inner", cfg.eps_inner);
  cfg.eps_outer = j.value("eps_outer", cfg.eps_outer);
  cfg.lbfgs_mem = j.value("lbfgs_mem", cfg.lbfgs_mem);
  cfg.max_inner_iters = j.value("max_inner_iters", cfg.max_inner_iters);
  cfg.max_outer_iters = j.value("max_outer_iters", cfg.max_outer_iters);
  cfg.penalty_init = j.value("penalty_init", cfg.penalty_init);
  cfg.penalty_update_factor = j.value("penalty_update_factor", cfg.penalty_update_factor);
  cfg.max_penalty = j.value("max_penalty", cfg.max_penalty);
}

}  // namespace

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("scenario " + path.string() + ": " + e.what());
  }

  try {
    check_keys(j,
               {"name", "track", "track_file", "vehicle", "ocp", "solver", "plant_dt",
                "control_period", "plant_integrator", "laps", "obstacles",
                "initial_state", "sim_time_limit_per_lap"},
               "scenario");
    ScenarioConfig cfg;
    cfg.name = j.value("name", path.stem().string());
    if (j.contains("track_file")) {
      cfg.track_file = std::filesystem::path(j.at("track_file").get<std::string>());
      if (cfg.track_file.is_relative()) {
        cfg.track_file = path.parent_path() / cfg.track_file;
      }
    } else if (j.contains("track")) {
      cfg.track = parse_track(j.at("track"));
    }
    if (j.contains("vehicle")) parse_vehicle(j.at("vehicle"), cfg.vehicle);
    if (j.contains("ocp")) parse_ocp(j.at("ocp"), cfg.ocp);
    if (j.contains("solver")) parse_solver(j.at("solver"), cfg.solver);
    cfg.plant_dt = j.value("plant_dt", cfg.plant_dt);
    cfg.control_period = j.value("control_period", cfg.control_period);
    if (j.contains("plant_integrator")) {
      const std::string kind = j.at("plant_integrator").get<std::string>();
      if (kind == "rk4") {
        cfg.plant_integrator = PlantIntegrator::rk4;
      } else if (kind == "euler") {
        cfg.plant_integrator = PlantIntegrator::euler;
      } else {
        fail("plant_integrator must be rk4 or euler");
      }
    }
    cfg.laps = j.value("laps", cfg.laps);
    cfg.obstacles_enabled = j.value("obstacles", cfg.obstacles_enabled);
    if (j.contains("initial_state")) {
      const auto& s = j.at("initial_state");
      check_keys(s, {"p_x", "p_y", "phi", "v_x", "v_y", "omega"}, "initial_state");
      VehicleState x;
      x.p_x = s.value("p_x", 0.0);
      x.p_y = s.value("p_y", 0.0);
      x.phi = s.value("phi", 0.0);
      x.v_x = s.value("v_x", 0.0);
      x.v_y = s.value("v_y", 0.0);
      x.omega = s.value("omega", 0.0);
      cfg.initial_state = x;
    }
    cfg.sim_time_limit_per_lap = j.value("sim_time_limit_per_lap", cfg.sim_time_limit_per_lap);
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    fail("scenario " + path.string() + ": " + e.what());
  }
}

}  // namespace racing::harness
