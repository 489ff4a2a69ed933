#include "racing/track.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "racing/kernels.hpp"

namespace racing {

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double dist(Vec2 a, Vec2 b) { return norm(a - b); }

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

}  // namespace

CenterLine::CenterLine(std::vector<Vec2> points, double d_s, bool closed)
    : d_s_(d_s), closed_(closed) {
  if (points.size() <= 2) fail("center line needs more than 2 points");
  if (!(d_s > 0.0)) fail("center line spacing must be positive");

  const std::size_t K = points.size();
  const std::size_t n_gaps = closed ? K : K - 1;
  for (std::size_t i = 0; i < n_gaps; ++i) {
    const double gap = dist(points[i], points[(i + 1) % K]);
    if (gap == 0.0) fail("center line has duplicate consecutive points at index " + std::to_string(i));
    if (std::abs(gap - d_s) > 0.1 * d_s) {
      fail("center line spacing violated at index " + std::to_string(i) + ": gap " +
           std::to_string(gap) + " vs d_s " + std::to_string(d_s));
    }
  }

  xs_.reserve(K);
  ys_.reserve(K);
  for (const Vec2& p : points) {
    xs_.push_back(p.x);
    ys_.push_back(p.y);
  }
}

void TrackLayout::validate() const {
  if (!(R_c > 0.0) || !(R_g > R_c)) fail("track layout requires R_g > R_c > 0");
  for (std::size_t j = 0; j < obstacles.size(); ++j) {
    const Obstacle& o = obstacles[j];
    const std::string tag = "obstacles[" + std::to_string(j) + "]: ";
    if (!(o.radius > 0.0)) fail(tag + "radius must be positive");
    if (o.clearance < o.radius) fail(tag + "clearance must be at least the radius");
    const auto np = kernels::nearest_point(center_line.xs(), center_line.ys(),
                                           o.center.x, o.center.y);
    // A passable corridor must remain on the far side of the obstacle.
    if (!(o.clearance < std::sqrt(np.dist_sq) + (R_g - R_c))) {
      fail(tag + "clearance blocks the whole corridor (no feasible gap)");
    }
  }
}

ProjectionResult project(const CenterLine& cl, Vec2 p, std::optional<std::size_t> hint,
                         std::size_t window) {
  if (cl.size() == 0) fail("project: empty center line");
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail("project: non-finite query point");

  const std::size_t K = cl.size();
  kernels::NearestPoint best{};
  if (!hint || window == 0 || 2 * window + 1 >= K) {
    best = kernels::nearest_point(cl.xs(), cl.ys(), p.x, p.y);
  } else if (!cl.closed()) {
    const std::size_t h = std::min(*hint, K - 1);
    const std::size_t lo = h > window ? h - window : 0;
    const std::size_t hi = std::min(K - 1, h + window);  // inclusive
    best = kernels::nearest_point(cl.xs().subspan(lo, hi - lo + 1),
                                  cl.ys().subspan(lo, hi - lo + 1), p.x, p.y);
    best.index += lo;
  } else {
    // Wrapping window: at most two contiguous ranges over the sample arrays.
    const std::size_t h = *hint % K;
    const std::size_t span = 2 * window + 1;
    const std::size_t lo = (h + K - window) % K;
    const std::size_t first_len = std::min(span, K - lo);
    best = kernels::nearest_point(cl.xs().subspan(lo, first_len),
                                  cl.ys().subspan(lo, first_len), p.x, p.y);
    best.index += lo;
    if (first_len < span) {
      auto rest = kernels::nearest_point(cl.xs().subspan(0, span - first_len),
                                         cl.ys().subspan(0, span - first_len), p.x, p.y);
      // Second range holds the smaller indices, so it also wins ties.
      if (rest.dist_sq <= best.dist_sq) best = rest;
    }
  }
  return {best.index, cl.point(best.index), std::sqrt(best.dist_sq)};
}

std::size_t lookahead_index(const CenterLine& cl, std::size_t i_star, std::size_t P) {
  const std::size_t K = cl.size();
  if (cl.closed()) return (i_star + P) % K;
  return std::min(i_star + P, K - 1);
}

Vec2 lookahead_reference(const CenterLine& cl, std::size_t i_star, std::size_t P) {
  return cl.point(lookahead_index(cl, i_star, P));
}

double lateral_deviation(const CenterLine& cl, Vec2 p, std::optional<std::size_t> hint,
                         std::size_t window) {
  return project(cl, p, hint, window).distance;
}

namespace {

struct PathPiece {
  bool is_arc;
  double length;
  // straight
  Vec2 start;
  Vec2 dir;
  // arc
  Vec2 center;
  double radius;
  double angle0;
  double turn_sign;
};

Vec2 piece_point(const PathPiece& pc, double s) {
  if (!pc.is_arc) return pc.start + s * pc.dir;
  const double ang = pc.angle0 + pc.turn_sign * s / pc.radius;
  return pc.center + pc.radius * Vec2{std::cos(ang), std::sin(ang)};
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const auto orient = [](Vec2 p, Vec2 q, Vec2 r) { return cross(q - p, r - p); };
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
}

void check_no_self_intersection(const std::vector<Vec2>& pts) {
  const std::size_t K = pts.size();
  for (std::size_t i = 0; i < K; ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[(i + 1) % K];
    for (std::size_t j = i + 2; j < K; ++j) {
      if (i == 0 && j == K - 1) continue;  // adjacent through the closure
      if (segments_intersect(a, b, pts[j], pts[(j + 1) % K])) {
        fail("track curve self-intersects near segment " + std::to_string(i));
      }
    }
  }
}

}  // namespace

TrackSpec stadium_spec(double straight_length, double radius) {
  // The fillets consume `radius` from each end of the long edges, so the
  // rectangle is 2*radius longer than the requested straights.
  const double lx = straight_length + 2.0 * radius;
  TrackSpec spec;
  spec.vertices = {{0.0, 0.0}, {lx, 0.0}, {lx, 2.0 * radius}, {0.0, 2.0 * radius}};
  spec.fillet_radii = {radius, radius, radius, radius};
  return spec;
}

TrackSpec circle_spec(double radius) {
  TrackSpec spec;
  spec.vertices = {{-radius, -radius}, {radius, -radius}, {radius, radius}, {-radius, radius}};
  spec.fillet_radii = {radius, radius, radius, radius};
  return spec;
}

TrackSpec winding_spec() {
  TrackSpec spec;
  spec.vertices = {{0.0, 0.0}, {11.0, -1.5}, {14.0, 6.0}, {6.0, 9.5}, {-3.0, 7.0}};
  spec.fillet_radii = {2.2, 3.0, 2.0, 2.6, 2.4};
  return spec;
}

TrackLayout build_track(const TrackSpec& spec) {
  const std::size_t V = spec.vertices.size();
  if (V < 3) fail("track spec needs at least 3 vertices");
  if (spec.fillet_radii.size() != V) fail("track spec needs one fillet radius per vertex");
  if (!(spec.d_s > 0.0)) fail("track spec d_s must be positive");

  // Fillet geometry per vertex: tangent offset, arc piece, signed turn.
  std::vector<PathPiece> arcs(V);
  std::vector<Vec2> arc_start(V), arc_end(V);
  std::vector<double> tangent(V);
  for (std::size_t i = 0; i < V; ++i) {
    const Vec2 prev = spec.vertices[(i + V - 1) % V];
    const Vec2 cur = spec.vertices[i];
    const Vec2 next = spec.vertices[(i + 1) % V];
    Vec2 d_in = cur - prev;
    Vec2 d_out = next - cur;
    const double len_in = norm(d_in);
    const double len_out = norm(d_out);
    if (len_in == 0.0 || len_out == 0.0) fail("track spec has coincident vertices");
    d_in = (1.0 / len_in) * d_in;
    d_out = (1.0 / len_out) * d_out;

    const double turn = std::atan2(cross(d_in, d_out), dot(d_in, d_out));
    if (std::abs(turn) < 1e-9) fail("track spec has a straight-through vertex (no turn)");
    const double r = spec.fillet_radii[i];
    if (!(r > 0.0)) fail("fillet radii must be positive");
    tangent[i] = r * std::tan(std::abs(turn) / 2.0);

    const Vec2 start = cur - tangent[i] * d_in;
    const double sign = turn > 0.0 ? 1.0 : -1.0;
    const Vec2 normal_in{-d_in.y, d_in.x};
    const Vec2 center = start + sign * r * normal_in;

    PathPiece arc;
    arc.is_arc = true;
    arc.length = r * std::abs(turn);
    arc.center = center;
    arc.radius = r;
    arc.angle0 = std::atan2(start.y - center.y, start.x - center.x);
    arc.turn_sign = sign;
    arcs[i] = arc;
    arc_start[i] = start;
    arc_end[i] = cur + tangent[i] * d_out;
  }

  // Assemble arc/straight pieces in path order starting at the first fillet.
  std::vector<PathPiece> pieces;
  double total = 0.0;
  for (std::size_t i = 0; i < V; ++i) {
    pieces.push_back(arcs[i]);
    total += arcs[i].length;
    const std::size_t nx = (i + 1) % V;
    const Vec2 a = arc_end[i];
    const Vec2 b = arc_start[nx];
    const double straight = dist(a, b);
    const double edge = dist(spec.vertices[i], spec.vertices[nx]);
    if (tangent[i] + tangent[nx] > edge + 1e-9) {
      fail("fillet radii overlap on edge " + std::to_string(i));
    }
    if (straight > 1e-9) {
      PathPiece st;
      st.is_arc = false;
      st.length = straight;
      st.start = a;
      st.dir = (1.0 / straight) * (b - a);
      pieces.push_back(st);
      total += straight;
    }
  }

  const auto K = static_cast<std::size_t>(std::llround(total / spec.d_s));
  if (K <= 2) fail("track too short for spacing d_s");
  const double step = total / static_cast<double>(K);

  std::vector<Vec2> points;
  points.reserve(K);
  std::size_t piece = 0;
  double piece_begin = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double s = static_cast<double>(k) * step;
    while (piece + 1 < pieces.size() && s >= piece_begin + pieces[piece].length) {
      piece_begin += pieces[piece].length;
      ++piece;
    }
    points.push_back(piece_point(pieces[piece], s - piece_begin));
  }

  check_no_self_intersection(points);

  TrackLayout layout{CenterLine(std::move(points), spec.d_s, true), spec.obstacles,
                     spec.R_g, spec.R_c};
  layout.validate();
  return layout;
}

}  // namespace racing
