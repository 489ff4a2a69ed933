// racer: closed-loop racing simulation, parameter identification and data
// tooling for the small-scale NMPC stack.
//
// Exit codes: 0 success, 2 completed run with constraint violations,
// 3 aborted run.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "racing/harness.hpp"
#include "racing/ident.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace racing;

int run_race(const fs::path& scenario_path, int laps_override, bool no_obstacles,
             const fs::path& out_dir) {
  harness::ScenarioConfig cfg = harness::load_scenario(scenario_path);
  if (laps_override > 0) cfg.laps = static_cast<std::size_t>(laps_override);
  if (no_obstacles) cfg.obstacles_enabled = false;

  const auto result = harness::run_closed_loop(cfg);
  const auto metrics = harness::compute_metrics(result);

  std::printf("scenario: %s\n", result.scenario_name.c_str());
  std::printf("status:   %s (%zu ticks)\n", harness::to_string(result.status),
              result.ticks.size());
  for (std::size_t i = 0; i < metrics.lap_times_s.size(); ++i) {
    std::printf("lap %zu:    %.3f s\n", i + 1, metrics.lap_times_s[i]);
  }
  std::printf("v_x:      min %.3f  mean %.3f  max %.3f m/s\n", metrics.vx_min,
              metrics.vx_mean, metrics.vx_max);
  std::printf("deviation: max %.3f m (limit %.3f m)\n", metrics.max_lateral_deviation,
              result.corridor_limit);
  if (!std::isnan(metrics.min_obstacle_center_distance)) {
    std::printf("obstacle:  min center distance %.3f m\n",
                metrics.min_obstacle_center_distance);
  }
  std::printf("solve:    mean %.3f ms  p99 %.3f ms  max %.3f ms\n", metrics.solve_mean_ms,
              metrics.solve_p99_ms, metrics.solve_max_ms);
  std::printf("violations: inputs %zu, v_x %zu, deviation %zu\n",
              metrics.input_bound_violations, metrics.vx_bound_violations,
              metrics.deviation_violations);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    harness::save_result(result, out_dir / "result.json");
    harness::export_results(result, metrics, out_dir);
    std::printf("wrote %s\n", (out_dir / "result.json").string().c_str());
  }

  if (result.status != harness::RunStatus::completed) return 3;
  const bool violated = metrics.input_bound_violations > 0 ||
                        metrics.vx_bound_violations > 0 ||
                        metrics.deviation_violations > 0;
  return violated ? 2 : 0;
}

int run_identify(const fs::path& data_path, const fs::path& bounds_path,
                 const fs::path& out_dir) {
  const auto data = ident::load_dataset_csv(data_path);

  std::ifstream in(bounds_path);
  if (!in) throw std::invalid_argument("cannot open bounds file: " + bounds_path.string());
  const json jb = json::parse(in);

  ident::ParamBounds bounds;
  const auto lo = jb.at("zeta_lo").get<std::vector<double>>();
  const auto hi = jb.at("zeta_hi").get<std::vector<double>>();
  if (lo.size() != 10 || hi.size() != 10) {
    throw std::invalid_argument("zeta bounds must have 10 entries");
  }
  std::copy(lo.begin(), lo.end(), bounds.zeta_lo.begin());
  std::copy(hi.begin(), hi.end(), bounds.zeta_hi.begin());

  ChassisParams chassis = VehicleParams::defaults().chassis;
  if (jb.contains("chassis")) {
    const auto& c = jb.at("chassis");
    chassis.l_f = c.value("l_f", chassis.l_f);
    chassis.l_r = c.value("l_r", chassis.l_r);
    chassis.m = c.value("m", chassis.m);
    chassis.J_z = c.value("J_z", chassis.J_z);
  }

  std::array<double, 10> zeta0 = bounds.midpoint();
  if (jb.contains("zeta0")) {
    const auto z0 = jb.at("zeta0").get<std::vector<double>>();
    if (z0.size() != 10) throw std::invalid_argument("zeta0 must have 10 entries");
    std::copy(z0.begin(), z0.end(), zeta0.begin());
  }

  solver::SolverConfig scfg;
  scfg.max_inner_iters = 2000;
  scfg.eps_inner = 1e-9;

  const auto report = ident::identify(data, bounds, zeta0, chassis, scfg);

  std::printf("status: %s after %zu iterations\n", solver::to_string(report.status),
              report.iterations);
  std::printf("records: %zu fitted, %zu excluded\n", report.included_records,
              report.excluded_records);
  std::printf("rmse: v_x %.3e  v_y %.3e  omega %.3e\n", report.rmse_vx, report.rmse_vy,
              report.rmse_omega);
  std::printf("zeta*:");
  for (double z : report.zeta) std::printf(" %.6g", z);
  std::printf("\n");

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    json jr;
    jr["status"] = solver::to_string(report.status);
    jr["zeta"] = report.zeta;
    jr["cost"] = report.cost;
    jr["rmse"] = {{"v_x", report.rmse_vx}, {"v_y", report.rmse_vy}, {"omega", report.rmse_omega}};
    jr["included_records"] = report.included_records;
    jr["excluded_records"] = report.excluded_records;
    jr["iterations"] = report.iterations;
    std::ofstream out(out_dir / "fit.json");
    out << jr.dump(2) << '\n';

    std::ofstream traces(out_dir / "traces.csv");
    traces << "t,v_x,v_x_pred,v_y,v_y_pred,omega,omega_pred\n";
    char buf[256];
    for (const auto& tp : report.traces) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", tp.t,
                    tp.measured[0], tp.predicted[0], tp.measured[1], tp.predicted[1],
                    tp.measured[2], tp.predicted[2]);
      traces << buf;
    }
    std::printf("wrote %s\n", (out_dir / "fit.json").string().c_str());
  }
  return 0;
}

int run_gen_data(const std::string& suite, std::uint64_t seed, double noise,
                 const fs::path& out_file) {
  const auto data =
      harness::generate_ident_data(suite, VehicleParams::defaults(), noise, seed);
  if (!out_file.parent_path().empty()) fs::create_directories(out_file.parent_path());
  ident::save_dataset_csv(data, out_file);
  std::printf("wrote %zu records (%.2f s at %.0f ms) to %s\n", data.records.size(),
              static_cast<double>(data.records.size()) * data.dt, data.dt * 1e3,
              out_file.string().c_str());
  return 0;
}

int run_export(const fs::path& result_path, const fs::path& out_dir) {
  const auto result = harness::load_result(result_path);
  const auto metrics = harness::compute_metrics(result);
  harness::export_results(result, metrics, out_dir);
  std::printf("exported %zu ticks to %s\n", result.ticks.size(), out_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"small-scale racing NMPC: simulation, identification and export tooling"};
  app.require_subcommand(1);

  // race
  auto* race = app.add_subcommand("race", "run a closed-loop scenario");
  fs::path scenario_path, race_out;
  int laps_override = 0;
  bool no_obstacles = false;
  race->add_option("--scenario", scenario_path, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  race->add_option("--laps", laps_override, "override the scenario lap count");
  race->add_flag("--no-obstacles", no_obstacles, "strip obstacles from the track");
  race->add_option("--out", race_out, "directory for result.json and exports");

  // identify
  auto* identify = app.add_subcommand("identify", "fit tire/drivetrain parameters");
  fs::path data_path, bounds_path, ident_out;
  identify->add_option("--data", data_path, "log CSV")->required()->check(CLI::ExistingFile);
  identify->add_option("--bounds", bounds_path, "bounds JSON (zeta_lo/zeta_hi[/zeta0])")
      ->required()
      ->check(CLI::ExistingFile);
  identify->add_option("--out", ident_out, "directory for fit.json and traces.csv");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic identification log");
  std::string suite = "standard";
  std::uint64_t seed = 1;
  double noise = 0.0;
  fs::path gen_out;
  gen->add_option("--suite", suite, "maneuver suite (standard, short)");
  gen->add_option("--seed", seed, "noise generator seed");
  gen->add_option("--noise", noise, "velocity noise sigma [m/s]");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  // export
  auto* exp = app.add_subcommand("export", "re-export a saved result");
  fs::path result_path, export_out;
  exp->add_option("--result", result_path, "result.json from a race run")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("--out", export_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (race->parsed()) return run_race(scenario_path, laps_override, no_obstacles, race_out);
    if (identify->parsed()) return run_identify(data_path, bounds_path, ident_out);
    if (gen->parsed()) return run_gen_data(suite, seed, noise, gen_out);
    if (exp->parsed()) return run_export(result_path, export_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
