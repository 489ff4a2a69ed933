#include <fstream>

#include "json.hpp"
#include "racing/track.hpp"

namespace racing {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

TrackLayout load_track(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open track file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("track file " + path.string() + ": " + e.what());
  }

  try {
    const double d_s = j.at("d_s").get<double>();
    const bool closed = j.at("closed").get<bool>();
    std::vector<Vec2> points;
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) {
        fail("points[" + std::to_string(points.size()) + "] must be [x, y]");
      }
      points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    std::vector<Obstacle> obstacles;
    if (j.contains("obstacles")) {
      for (const auto& o : j.at("obstacles")) {
        const auto& c = o.at("center");
        obstacles.push_back({{c.at(0).get<double>(), c.at(1).get<double>()},
                             o.at("R").get<double>(),
                             o.at("Gamma").get<double>()});
      }
    }
    TrackLayout layout{CenterLine(std::move(points), d_s, closed), std::move(obstacles),
                       j.at("R_g").get<double>(), j.at("R_c").get<double>()};
    layout.validate();
    return layout;
  } catch (const json::exception& e) {
    fail("track file " + path.string() + ": " + e.what());
  }
}

void save_track(const TrackLayout& layout, const std::filesystem::path& path) {
  json j;
  j["d_s"] = layout.center_line.spacing();
  j["closed"] = layout.center_line.closed();
  json pts = json::array();
  for (std::size_t i = 0; i < layout.center_line.size(); ++i) {
    const Vec2 p = layout.center_line.point(i);
    pts.push_back({p.x, p.y});
  }
  j["points"] = std::move(pts);
  j["R_g"] = layout.R_g;
  j["R_c"] = layout.R_c;
  json obs = json::array();
  for (const Obstacle& o : layout.obstacles) {
    obs.push_back({{"center", {o.center.x, o.center.y}}, {"R", o.radius}, {"Gamma", o.clearance}});
  }
  j["obstacles"] = std::move(obs);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write track file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace racing
