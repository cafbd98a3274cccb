#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "plnspatial/error.hpp"
#include "plnspatial/geometry.hpp"

using namespace plnspatial;
using std::numbers::pi;

namespace {

std::vector<Vec2> ellipse_points(double a, double b, double rot, Vec2 c, int n) {
  std::vector<Vec2> pts;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * pi * k / n;
    const double x = a * std::cos(t), y = b * std::sin(t);
    pts.push_back({c.x + x * std::cos(rot) - y * std::sin(rot), c.y + x * std::sin(rot) + y * std::cos(rot)});
  }
  return pts;
}

Location at(double x, double y) {
  Location l;
  l.easting = x;
  l.northing = y;
  return l;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("euclidean distance") {
  CHECK(euclidean_distance({0, 0}, {0, 0}) == 0.0);
  CHECK(euclidean_distance({0, 0}, {3, 4}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(euclidean_distance({1, 1}, {-2, 5}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(euclidean_distance({1, 7}, {-3, 2}) == euclidean_distance({-3, 2}, {1, 7}));
}

TEST_CASE("anisotropy transform") {
  const Vec2 s{0.3, -1.7};
  const Vec2 id = apply_aniso({0.0, 1.0}, s);
  CHECK(id.x == doctest::Approx(s.x).epsilon(1e-15));
  CHECK(id.y == doctest::Approx(s.y).epsilon(1e-15));

  const Vec2 a = apply_aniso({pi / 2, 2.0}, {1, 0});
  CHECK(std::abs(a.x) < 1e-15);
  CHECK(a.y == doctest::Approx(-0.5).epsilon(1e-15));

  const Vec2 b = apply_aniso({0.0, 2.0}, {0, 1});
  CHECK(std::abs(b.x) < 1e-15);
  CHECK(b.y == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("psi_R = 1 is a rotation") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int rep = 0; rep < 200; ++rep) {
    const AnisoTransform t{u(g) * 0.3 + 3.0, 1.0};
    const Vec2 p{u(g), u(g)}, q{u(g), u(g)};
    const double before = euclidean_distance(p, q);
    const double after = euclidean_distance(apply_aniso(t, p), apply_aniso(t, q));
    CHECK(std::abs(before - after) < 1e-12);
  }
}

TEST_CASE("ellipse fit: circle") {
  const auto pts = ellipse_points(2, 2, 0, {0, 0}, 36);
  const auto e = fit_ellipse_ols(pts);
  CHECK(std::abs(e.center.x) < 1e-8);
  CHECK(std::abs(e.center.y) < 1e-8);
  CHECK(e.semi_major == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(e.semi_minor == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("ellipse fit: axis aligned") {
  const auto pts = ellipse_points(2, 1, 0, {0, 0}, 36);
  const auto e = fit_ellipse_ols(pts);
  CHECK(e.semi_major == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(e.semi_minor == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::min(e.rotation, pi - e.rotation) < 1e-8);
  CHECK(ellipse_residual(e, pts) < 1e-8);
}

TEST_CASE("ellipse fit: tilted and offset, relative error") {
  const Vec2 c{690000.0, 5110000.0};
  const auto pts = ellipse_points(4000, 1500, 0.6, c, 50);
  const auto e = fit_ellipse_ols(pts);
  CHECK(std::abs(e.center.x - c.x) / 4000 < 1e-6);
  CHECK(std::abs(e.center.y - c.y) / 4000 < 1e-6);
  CHECK(std::abs(e.semi_major - 4000) / 4000 < 1e-6);
  CHECK(std::abs(e.semi_minor - 1500) / 1500 < 1e-6);
  CHECK(std::abs(e.rotation - 0.6) / 0.6 < 1e-6);
}

TEST_CASE("ellipse fit: degenerate input") {
  std::vector<Vec2> four = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  CHECK(kind_of([&] { fit_ellipse_ols(four); }) == ErrorKind::DegenerateConfiguration);
  std::vector<Vec2> line;
  for (int k = 0; k < 10; ++k) line.push_back({double(k), 2.0 * k});
  CHECK(kind_of([&] { fit_ellipse_ols(line); }) == ErrorKind::DegenerateConfiguration);
}

TEST_CASE("M5 projection") {
  const EllipseParams e{{0, 0}, 2, 1, 0};
  const std::vector<Location> locs = {at(2, 0), at(0, -1), at(4, 0)};
  const auto p = project_m5(locs, e);
  CHECK(p[0].x == doctest::Approx(1.0));
  CHECK(std::abs(p[0].y) < 1e-15);
  CHECK(std::abs(p[1].x) < 1e-15);
  CHECK(p[1].y == doctest::Approx(-1.0));
  CHECK(p[2].x == doctest::Approx(1.0));
  CHECK(std::abs(p[2].y) < 1e-15);
  CHECK(kind_of([&] { project_m5(std::vector<Location>{at(0, 0)}, e); }) == ErrorKind::ZeroNorm);
}

TEST_CASE("M6 projection") {
  // centroid at the origin
  const std::vector<Location> locs = {at(3, 4), at(-3, -4), at(0, -2), at(0, 2)};
  const auto p = project_m6(locs);
  CHECK(p[0].x == doctest::Approx(0.6));
  CHECK(p[0].y == doctest::Approx(0.8));
  CHECK(std::abs(p[2].x) < 1e-15);
  CHECK(p[2].y == doctest::Approx(-1.0));
  const std::vector<Location> with_centre = {at(1, 0), at(-1, 0), at(0, 0)};
  CHECK(kind_of([&] { project_m6(with_centre); }) == ErrorKind::ZeroNorm);
}

TEST_CASE("projections land on the unit circle") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(-5000, 5000);
  std::vector<Location> locs;
  for (int k = 0; k < 100; ++k) locs.push_back(at(690000 + u(g), 5110000 + 0.5 * u(g)));
  const EllipseParams e{{690000, 5110000}, 5000, 2500, 0.3};
  for (const auto& p : project_m5(locs, e)) CHECK(std::abs(std::hypot(p.x, p.y) - 1.0) < 1e-12);
  for (const auto& p : project_m6(locs)) CHECK(std::abs(std::hypot(p.x, p.y) - 1.0) < 1e-12);
}

TEST_CASE("angular distance") {
  CHECK(angular_distance({1, 0}, {0, 1}) == doctest::Approx(pi / 2));
  CHECK(angular_distance({1, 0}, {1, 0}) == 0.0);
  CHECK(angular_distance({1, 0}, {-1, 0}) == doctest::Approx(pi));
  CHECK(kind_of([] { angular_distance({2, 0}, {1, 0}); }) == ErrorKind::NotOnCircle);
}

TEST_CASE("angular distance is a metric") {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0, 2 * pi);
  auto pt = [&] {
    const double t = u(g);
    return Vec2{std::cos(t), std::sin(t)};
  };
  for (int rep = 0; rep < 1000; ++rep) {
    const Vec2 a = pt(), b = pt(), c = pt();
    const double ab = angular_distance(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= pi + 1e-12);
    CHECK(std::abs(ab - angular_distance(b, a)) < 1e-14);
    CHECK(angular_distance(a, c) <= ab + angular_distance(b, c) + 1e-12);
  }
}

TEST_CASE("chord distance") {
  CHECK(chord_distance(0.0, 1.0) == 0.0);
  CHECK(chord_distance(pi, 1.0) == doctest::Approx(2.0));
  CHECK(chord_distance(pi / 2, 1.0) == doctest::Approx(1.414214).epsilon(1e-6));
  double prev = -1.0;
  for (int k = 0; k <= 1000; ++k) {
    const double c = chord_distance(pi * k / 1000, 1.0);
    CHECK(c > prev);
    prev = c;
  }
}

TEST_CASE("equator angle") {
  CHECK(equator_angle({0, 0}, {1, 0}) == 0.0);
  CHECK(equator_angle({0, 0}, {1, 1}) == doctest::Approx(pi / 4));
  CHECK(equator_angle({0, 0}, {0, 1}) == doctest::Approx(pi / 2));
  CHECK(equator_angle({0, 0}, {-1, 1}) == doctest::Approx(pi / 4));
  CHECK(kind_of([] { equator_angle({2, 3}, {2, 3}); }) == ErrorKind::CoincidentPoints);
}

TEST_CASE("location validation") {
  Location l = at(1, 2);
  l.day_index = 0;
  CHECK_THROWS_AS(validate(l), Error);
  l.day_index = 1;
  l.geodetic_depth = std::nan("");
  CHECK_THROWS_AS(validate(l), Error);
}

}
