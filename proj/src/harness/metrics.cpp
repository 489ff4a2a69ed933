#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "racing/harness.hpp"

namespace racing::harness {

Metrics compute_metrics(const SimResult& result) {
  if (result.ticks.empty()) throw std::invalid_argument("compute_metrics: empty result");

  Metrics m;
  m.vx_min = std::numeric_limits<double>::infinity();
  m.vx_max = -std::numeric_limits<double>::infinity();
  m.min_obstacle_center_distance = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> solve_ms;
  solve_ms.reserve(result.ticks.size());

  for (const TickLog& tk : result.ticks) {
    m.vx_min = std::min(m.vx_min, tk.state.v_x);
    m.vx_max = std::max(m.vx_max, tk.state.v_x);
    m.vx_mean += tk.state.v_x;
    m.max_lateral_deviation = std::max(m.max_lateral_deviation, tk.lateral_deviation);
    if (!std::isnan(tk.min_obstacle_distance)) {
      if (std::isnan(m.min_obstacle_center_distance) ||
          tk.min_obstacle_distance < m.min_obstacle_center_distance) {
        m.min_obstacle_center_distance = tk.min_obstacle_distance;
      }
    }

    if (tk.input.d < result.input_lower.d || tk.input.d > result.input_upper.d ||
        tk.input.delta < result.input_lower.delta ||
        tk.input.delta > result.input_upper.delta) {
      ++m.input_bound_violations;
    }
    if (tk.state.v_x < result.vx_min - 1e-6 || tk.state.v_x > result.vx_max + 1e-3) {
      ++m.vx_bound_violations;
    }
    if (tk.lateral_deviation > result.corridor_limit) ++m.deviation_violations;

    const double ms = tk.solve_time_s * 1e3;
    solve_ms.push_back(ms);
    m.solve_mean_ms += ms;
    m.solve_max_ms = std::max(m.solve_max_ms, ms);
    const auto bin = ms >= 33.0 ? 33u : static_cast<unsigned>(ms);  // 1 ms bins
    ++m.solve_histogram[bin];
  }

  const auto n = static_cast<double>(result.ticks.size());
  m.vx_mean /= n;
  m.solve_mean_ms /= n;

  std::sort(solve_ms.begin(), solve_ms.end());
  const auto idx = static_cast<std::size_t>(
      std::ceil(0.99 * static_cast<double>(solve_ms.size()))) - 1;
  m.solve_p99_ms = solve_ms[std::min(idx, solve_ms.size() - 1)];

  for (std::size_t i = 0; i + 1 < result.lap_timestamps.size(); ++i) {
    m.lap_times_s.push_back(result.lap_timestamps[i + 1] - result.lap_timestamps[i]);
  }
  return m;
}

std::vector<double> curvature_profile(const CenterLine& cl) {
  const std::size_t K = cl.size();
  std::vector<double> kappa(K, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    if (!cl.closed() && (i == 0 || i + 1 == K)) continue;
    const Vec2 a = cl.point((i + K - 1) % K);
    const Vec2 b = cl.point(i);
    const Vec2 c = cl.point((i + 1) % K);
    const double area2 = std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
    const double den = dist(a, b) * dist(b, c) * dist(a, c);
    kappa[i] = den > 0.0 ? 2.0 * area2 / den : 0.0;
  }
  return kappa;
}

SpeedByCurvature speed_by_curvature_quartile(const SimResult& result,
                                             const CenterLine& cl) {
  if (result.ticks.empty()) throw std::invalid_argument("empty result");
  const auto kappa = curvature_profile(cl);

  std::vector<std::pair<double, double>> samples;  // (curvature at tick, v_x)
  samples.reserve(result.ticks.size());
  for (const TickLog& tk : result.ticks) {
    const auto pr = project(cl, {tk.state.p_x, tk.state.p_y});
    samples.emplace_back(kappa[pr.index], tk.state.v_x);
  }
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const std::size_t quarter = std::max<std::size_t>(samples.size() / 4, 1);
  SpeedByCurvature out;
  for (std::size_t i = 0; i < quarter; ++i) {
    out.mean_vx_straight += samples[i].second;
    out.mean_vx_tight += samples[samples.size() - 1 - i].second;
  }
  out.mean_vx_straight /= static_cast<double>(quarter);
  out.mean_vx_tight /= static_cast<double>(quarter);
  return out;
}

}  // namespace racing::harness
