#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

// Sampled lane center line plus obstacle and corridor bookkeeping. Projection
// returns the nearest sample (not a segment interpolation); the sample
// spacing d_s bounds the induced error by d_s/2.

namespace racing {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
double norm(Vec2 v);
double dist(Vec2 a, Vec2 b);

class CenterLine {
 public:
  /// Validates sample count, spacing (within 10% of d_s, closing segment
  /// included for closed tracks) and duplicate-point absence.
  CenterLine(std::vector<Vec2> points, double d_s, bool closed);

  std::size_t size() const { return xs_.size(); }
  Vec2 point(std::size_t i) const { return {xs_[i], ys_[i]}; }
  double spacing() const { return d_s_; }
  bool closed() const { return closed_; }

  // Coordinate-split storage, directly consumable by the nearest-point kernel.
  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }

 private:
  std::vector<double> xs_, ys_;
  double d_s_;
  bool closed_;
};

struct Obstacle {
  Vec2 center;
  double radius;     // physical obstacle radius R_j [m]
  double clearance;  // required center distance Gamma_j >= R_j [m]
};

struct TrackLayout {
  CenterLine center_line;
  std::vector<Obstacle> obstacles;
  double R_g;  // corridor radius [m]
  double R_c;  // car radius [m]

  /// Corridor, obstacle and feasible-gap invariants; throws on violation.
  void validate() const;
};

struct ProjectionResult {
  std::size_t index;
  Vec2 point;
  double distance;
};

/// Nearest center-line sample to p. With a hint and a nonzero window, only
/// indices within +-window of the hint are searched (wrapping on closed
/// tracks); the result equals the global argmin whenever the true nearest
/// sample lies in that window. window == 0 means an exhaustive scan.
/// Ties break toward the smallest index.
ProjectionResult project(const CenterLine& cl, Vec2 p,
                         std::optional<std::size_t> hint = std::nullopt,
                         std::size_t window = 0);

/// Sample P steps ahead of i_star: modular on closed tracks, clamped to the
/// last sample on open ones.
Vec2 lookahead_reference(const CenterLine& cl, std::size_t i_star, std::size_t P);

std::size_t lookahead_index(const CenterLine& cl, std::size_t i_star, std::size_t P);

/// Distance from p to its center-line projection.
double lateral_deviation(const CenterLine& cl, Vec2 p,
                         std::optional<std::size_t> hint = std::nullopt,
                         std::size_t window = 0);

/// Procedural track description: a closed rounded polygon (straight edges
/// joined by circular fillets) resampled at arc-length spacing d_s. A circle
/// is a square with fillet radius equal to half its side; a stadium is a
/// rectangle whose fillet radius is half the short side.
struct TrackSpec {
  std::vector<Vec2> vertices;
  std::vector<double> fillet_radii;  // one per vertex
  double d_s = 0.1;
  double R_g = 2.0;
  double R_c = 0.24;
  std::vector<Obstacle> obstacles;
};

/// Two straights of the given length joined by half-circles of the given radius.
TrackSpec stadium_spec(double straight_length, double radius);

/// Circle of the given center-line radius.
TrackSpec circle_spec(double radius);

/// Four-corner winding loop with uneven fillet radii.
TrackSpec winding_spec();

/// Resamples the spec at d_s and validates every layout invariant
/// (spacing, closure, self-intersection, feasible obstacle gaps).
TrackLayout build_track(const TrackSpec& spec);

/// JSON track file:
/// {"d_s": m, "closed": bool, "points": [[x, y], ...], "R_g": m, "R_c": m,
///  "obstacles": [{"center": [x, y], "R": m, "Gamma": m}, ...]}
TrackLayout load_track(const std::filesystem::path& path);
void save_track(const TrackLayout& layout, const std::filesystem::path& path);

}  // namespace racing
