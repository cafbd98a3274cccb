#pragma once

#include <span>
#include <vector>

namespace plnspatial {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

enum class Shore { North, South };

/// A sampled site. `day_index` is the 1-based rank of the sampling day and
/// `julian_day` the calendar day it maps to.
struct Location {
  int id = 0;
  double easting = 0.0;
  double northing = 0.0;
  Shore shore = Shore::North;
  double geodetic_depth = 0.0;
  int day_index = 1;
  int julian_day = 1;

  Vec2 coords() const { return {easting, northing}; }
  friend bool operator==(const Location&, const Location&) = default;
};

void validate(const Location& loc);

struct EllipseParams {
  Vec2 center;
  double semi_major = 1.0;
  double semi_minor = 1.0;
  double rotation = 0.0;  // radians in [0, pi)
};

/// Geometric anisotropy f(s) = s A with A = R(psi_A) diag(1, 1/psi_R).
struct AnisoTransform {
  double psi_A = 0.0;
  double psi_R = 1.0;
};

double euclidean_distance(Vec2 a, Vec2 b);

Vec2 apply_aniso(const AnisoTransform& t, Vec2 s);

/// Orthogonal (geometric) least-squares ellipse fit. Initialised by a direct
/// algebraic conic fit, refined by damped Gauss-Newton over centre, axes,
/// rotation and one foot-point angle per sample.
EllipseParams fit_ellipse_ols(std::span<const Vec2> points);

/// Sum of squared orthogonal distances from `points` to the ellipse.
double ellipse_residual(const EllipseParams& e, std::span<const Vec2> points);

std::vector<Vec2> project_m5(std::span<const Location> locs, const EllipseParams& e);
std::vector<Vec2> project_m6(std::span<const Location> locs);

double angular_distance(Vec2 c1, Vec2 c2);
double chord_distance(double omega, double r);

/// Acute angle in [0, pi/2] between segment ab and the east-west axis.
double equator_angle(Vec2 a, Vec2 b);

}  // namespace plnspatial
