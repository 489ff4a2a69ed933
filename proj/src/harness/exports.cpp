#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "racing/harness.hpp"

namespace racing::harness {

namespace {

using nlohmann::json;

constexpr int k_schema_version = 1;
constexpr double k_rad_to_deg = 57.29577951308232;

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json status_json(RunStatus s) { return to_string(s); }

RunStatus status_from(const std::string& s) {
  if (s == "completed") return RunStatus::completed;
  if (s == "aborted-blowup") return RunStatus::aborted_blowup;
  if (s == "aborted-degraded") return RunStatus::aborted_degraded;
  if (s == "aborted-timeout") return RunStatus::aborted_timeout;
  throw std::invalid_argument("unknown run status: " + s);
}

json solve_status_json(solver::SolveStatus s) { return solver::to_string(s); }

solver::SolveStatus solve_status_from(const std::string& s) {
  if (s == "converged") return solver::SolveStatus::converged;
  if (s == "max-iters") return solver::SolveStatus::max_iters;
  if (s == "infeasible-penalty-exhausted") {
    return solver::SolveStatus::infeasible_penalty_exhausted;
  }
  throw std::invalid_argument("unknown solve status: " + s);
}

}  // namespace

void export_results(const SimResult& result, const Metrics& metrics,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    auto out = open_out(dir / "trajectory.csv");
    out << "t,p_x,p_y,phi,v_x,v_y,omega,lateral_deviation,min_obstacle_distance\n";
    for (const TickLog& tk : result.ticks) {
      out << fmt(tk.t) << ',' << fmt(tk.state.p_x) << ',' << fmt(tk.state.p_y) << ','
          << fmt(tk.state.phi) << ',' << fmt(tk.state.v_x) << ',' << fmt(tk.state.v_y)
          << ',' << fmt(tk.state.omega) << ',' << fmt(tk.lateral_deviation) << ','
          << fmt(tk.min_obstacle_distance) << '\n';
    }
  }

  {
    auto out = open_out(dir / "inputs.csv");
    out << "t,d,delta_rad,delta_deg\n";
    for (const TickLog& tk : result.ticks) {
      out << fmt(tk.t) << ',' << fmt(tk.input.d) << ',' << fmt(tk.input.delta) << ','
          << fmt(tk.input.delta * k_rad_to_deg) << '\n';
    }
  }

  {
    // Deterministic metrics: everything except wall-clock measurements.
    json j;
    j["schema_version"] = k_schema_version;
    j["scenario"] = result.scenario_name;
    j["run_status"] = status_json(result.status);
    j["ticks"] = result.ticks.size();
    j["laps_requested"] = result.laps_requested;
    j["lap_timestamps_s"] = result.lap_timestamps;
    j["lap_times_s"] = metrics.lap_times_s;
    j["v_x"] = {{"min", metrics.vx_min}, {"mean", metrics.vx_mean}, {"max", metrics.vx_max}};
    j["max_lateral_deviation_m"] = metrics.max_lateral_deviation;
    if (!std::isnan(metrics.min_obstacle_center_distance)) {
      j["min_obstacle_center_distance_m"] = metrics.min_obstacle_center_distance;
    } else {
      j["min_obstacle_center_distance_m"] = nullptr;
    }
    j["violations"] = {{"input_bounds", metrics.input_bound_violations},
                       {"vx_bounds", metrics.vx_bound_violations},
                       {"lateral_deviation", metrics.deviation_violations}};
    j["limits"] = {{"corridor_m", result.corridor_limit},
                   {"vx_min", result.vx_min},
                   {"vx_max", result.vx_max}};
    open_out(dir / "metrics.json") << j.dump(2) << '\n';
  }

  {
    // Wall-clock data, separated so rerun exports stay byte-comparable.
    json j;
    j["schema_version"] = k_schema_version;
    j["solve_time_ms"] = {{"mean", metrics.solve_mean_ms},
                          {"max", metrics.solve_max_ms},
                          {"p99", metrics.solve_p99_ms}};
    j["histogram"] = {{"bin_width_ms", 1.0},
                      {"range_ms", {0.0, 33.0}},
                      {"counts", std::vector<std::size_t>(metrics.solve_histogram.begin(),
                                                          metrics.solve_histogram.end() - 1)},
                      {"overflow", metrics.solve_histogram.back()}};
    open_out(dir / "timing.json") << j.dump(2) << '\n';
  }

  {
    auto out = open_out(dir / "solve_histogram.csv");
    out << "bin_start_ms,bin_end_ms,count\n";
    for (std::size_t b = 0; b < 33; ++b) {
      out << b << ',' << b + 1 << ',' << metrics.solve_histogram[b] << '\n';
    }
    out << "33,inf," << metrics.solve_histogram[33] << '\n';
  }
}

void save_result(const SimResult& result, const std::filesystem::path& file) {
  json j;
  j["schema_version"] = k_schema_version;
  j["scenario"] = result.scenario_name;
  j["status"] = status_json(result.status);
  j["control_period"] = result.control_period;
  j["laps_requested"] = result.laps_requested;
  j["lap_timestamps"] = result.lap_timestamps;
  j["limits"] = {{"corridor", result.corridor_limit},
                 {"vx_min", result.vx_min},
                 {"vx_max", result.vx_max},
                 {"input_lower", {result.input_lower.d, result.input_lower.delta}},
                 {"input_upper", {result.input_upper.d, result.input_upper.delta}}};
  json ticks = json::array();
  for (const TickLog& tk : result.ticks) {
    ticks.push_back({{"t", tk.t},
                     {"state",
                      {tk.state.p_x, tk.state.p_y, tk.state.phi, tk.state.v_x,
                       tk.state.v_y, tk.state.omega}},
                     {"input", {tk.input.d, tk.input.delta}},
                     {"inner_iters", tk.inner_iters},
                     {"outer_iters", tk.outer_iters},
                     {"solver_status", solve_status_json(tk.solver_status)},
                     {"fbe_residual", tk.fbe_residual},
                     {"constraint_violation", tk.constraint_violation},
                     {"solve_time_s", tk.solve_time_s},
                     {"lateral_deviation", tk.lateral_deviation},
                     {"min_obstacle_distance",
                      std::isnan(tk.min_obstacle_distance)
                          ? json(nullptr)
                          : json(tk.min_obstacle_distance)},
                     {"degraded", tk.degraded}});
  }
  j["ticks"] = std::move(ticks);
  open_out(file) << j.dump() << '\n';
}

SimResult load_result(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open result file: " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("result " + file.string() + ": " + e.what());
  }

  SimResult result;
  result.scenario_name = j.value("scenario", "");
  result.status = status_from(j.at("status").get<std::string>());
  result.control_period = j.at("control_period").get<double>();
  result.laps_requested = j.at("laps_requested").get<std::size_t>();
  result.lap_timestamps = j.at("lap_timestamps").get<std::vector<double>>();
  const auto& lim = j.at("limits");
  result.corridor_limit = lim.at("corridor").get<double>();
  result.vx_min = lim.at("vx_min").get<double>();
  result.vx_max = lim.at("vx_max").get<double>();
  result.input_lower = {lim.at("input_lower").at(0).get<double>(),
                        lim.at("input_lower").at(1).get<double>()};
  result.input_upper = {lim.at("input_upper").at(0).get<double>(),
                        lim.at("input_upper").at(1).get<double>()};
  for (const auto& tj : j.at("ticks")) {
    TickLog tk;
    tk.t = tj.at("t").get<double>();
    const auto& s = tj.at("state");
    tk.state = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>(),
                s.at(3).get<double>(), s.at(4).get<double>(), s.at(5).get<double>()};
    tk.input = {tj.at("input").at(0).get<double>(), tj.at("input").at(1).get<double>()};
    tk.inner_iters = tj.at("inner_iters").get<std::size_t>();
    tk.outer_iters = tj.at("outer_iters").get<std::size_t>();
    tk.solver_status = solve_status_from(tj.at("solver_status").get<std::string>());
    tk.fbe_residual = tj.at("fbe_residual").get<double>();
    tk.constraint_violation = tj.at("constraint_violation").get<double>();
    tk.solve_time_s = tj.at("solve_time_s").get<double>();
    tk.lateral_deviation = tj.at("lateral_deviation").get<double>();
    tk.min_obstacle_distance = tj.at("min_obstacle_distance").is_null()
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : tj.at("min_obstacle_distance").get<double>();
    tk.degraded = tj.at("degraded").get<bool>();
    result.ticks.push_back(tk);
  }
  return result;
}

std::vector<TrajectoryRow> load_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open trajectory: " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "t,p_x,p_y,phi,v_x,v_y,omega,lateral_deviation,min_obstacle_distance") {
    throw std::invalid_argument("trajectory " + path.string() + ": bad header");
  }
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    double v[9];
    for (int i = 0; i < 9; ++i) {
      if (!std::getline(ss, field, ',')) {
        throw std::invalid_argument("trajectory " + path.string() + ": short row");
      }
      char* end = nullptr;
      v[i] = std::strtod(field.c_str(), &end);  // strtod round-trips nan/inf
      if (end == field.c_str()) {
        throw std::invalid_argument("trajectory " + path.string() + ": bad field '" + field + "'");
      }
    }
    rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  return rows;
}

}  // namespace racing::harness
