#include "plnspatial/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "plnspatial/error.hpp"

namespace plnspatial {

namespace {

constexpr double kPi = std::numbers::pi;

// Angle wrapped into [0, pi).
double wrap_half_turn(double angle) {
  double r = std::fmod(angle, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r -= kPi;
  return r;
}

EllipseParams normalized(double cx, double cy, double a, double b, double theta) {
  a = std::abs(a);
  b = std::abs(b);
  if (b > a) {
    std::swap(a, b);
    theta += kPi / 2.0;
  }
  return {{cx, cy}, a, b, wrap_half_turn(theta)};
}

// Direct least-squares ellipse fit (Halir & Flusser's numerically stable
// variant of Fitzgibbon's method). Input must already be centred and scaled.
EllipseParams algebraic_fit(const Eigen::MatrixX2d& p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixX3d d1(n, 3), d2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = p(i, 0), y = p(i, 1);
    d1.row(i) << x * x, x * y, y * y;
    d2.row(i) << x, y, 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;

  Eigen::FullPivLU<Eigen::Matrix3d> lu3(s3);
  lu3.setThreshold(1e-10);
  if (lu3.rank() < 3) {
    throw Error(ErrorKind::DegenerateConfiguration, "points are collinear");
  }
  const Eigen::Matrix3d t = -lu3.solve(s2.transpose());
  Eigen::Matrix3d m = s1 + s2 * t;
  Eigen::Matrix3d reduced;
  reduced.row(0) = m.row(2) / 2.0;
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> es(reduced);
  int pick = -1;
  double best = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d v = es.eigenvectors().col(k).real();
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (cond > best) {
      best = cond;
      pick = k;
    }
  }
  if (pick < 0) {
    throw Error(ErrorKind::DegenerateConfiguration, "conic fit is not an ellipse");
  }
  const Eigen::Vector3d a1 = es.eigenvectors().col(pick).real();
  const Eigen::Vector3d a2 = t * a1;
  const double A = a1(0), B = a1(1), C = a1(2), D = a2(0), E = a2(1), F = a2(2);

  const double den = B * B - 4.0 * A * C;
  const double x0 = (2.0 * C * D - B * E) / den;
  const double y0 = (2.0 * A * E - B * D) / den;
  const double f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F;

  Eigen::Matrix2d q;
  q << A, B / 2.0, B / 2.0, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qs(q);
  const Eigen::Vector2d lam = qs.eigenvalues();
  const double r0 = -f0 / lam(0);
  const double r1 = -f0 / lam(1);
  if (!(r0 > 0.0) || !(r1 > 0.0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "conic fit is not an ellipse");
  }
  // Smaller eigenvalue gives the longer axis.
  const Eigen::Vector2d major_dir = qs.eigenvectors().col(0);
  const double theta = std::atan2(major_dir(1), major_dir(0));
  return normalized(x0, y0, std::sqrt(r0), std::sqrt(r1), theta);
}

// Robust root of the foot-point equation (Eberly, "Distance from a point to an
// ellipse"). Operates on the first quadrant with e0 >= e1.
double get_root(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1.0;
  double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double ratio0 = n0 / (s + r0);
    const double ratio1 = z1 / (s + 1.0);
    g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
    if (g > 0.0) {
      s0 = s;
    } else if (g < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

double distance_point_ellipse(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0;
      const double z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return 0.0;
      const double r0 = (e0 / e1) * (e0 / e1);
      const double sbar = get_root(r0, z0, z1, g);
      const double x0 = r0 * y0 / (sbar + r0);
      const double x1 = y1 / (sbar + 1.0);
      return std::hypot(x0 - y0, x1 - y1);
    }
    return std::abs(y1 - e1);
  }
  const double numer0 = e0 * y0;
  const double denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    const double x0 = e0 * xde0;
    const double x1 = e1 * std::sqrt(1.0 - xde0 * xde0);
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

// Coordinates of p in the ellipse frame (centred, de-rotated).
Vec2 to_ellipse_frame(const EllipseParams& e, Vec2 p) {
  const double dx = p.x - e.center.x;
  const double dy = p.y - e.center.y;
  const double c = std::cos(e.rotation), s = std::sin(e.rotation);
  return {c * dx + s * dy, -s * dx + c * dy};
}

Vec2 unit(Vec2 v, double scale_hint) {
  const double norm = std::hypot(v.x, v.y);
  if (!(norm > 1e-12 * std::max(1.0, scale_hint))) {
    throw Error(ErrorKind::ZeroNorm, "point coincides with the projection centre");
  }
  return {v.x / norm, v.y / norm};
}

}  // namespace

void validate(const Location& loc) {
  if (loc.day_index < 1) {
    throw Error(ErrorKind::InvalidArgument, "day_index must be >= 1");
  }
  if (!std::isfinite(loc.easting) || !std::isfinite(loc.northing)) {
    throw Error(ErrorKind::InvalidArgument, "location coordinates must be finite");
  }
  if (!std::isfinite(loc.geodetic_depth)) {
    throw Error(ErrorKind::InvalidArgument, "geodetic depth must be finite");
  }
}

double euclidean_distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Vec2 apply_aniso(const AnisoTransform& t, Vec2 s) {
  const double c = std::cos(t.psi_A), sn = std::sin(t.psi_A);
  // Row vector times R(psi_A) = [[c, -s], [s, c]], then column scaling.
  const double u = s.x * c + s.y * sn;
  const double v = -s.x * sn + s.y * c;
  return {u, v / t.psi_R};
}

EllipseParams fit_ellipse_ols(std::span<const Vec2> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 5) {
    throw Error(ErrorKind::DegenerateConfiguration, "ellipse fit needs at least 5 points");
  }
  // Normalise for conditioning: centre on the mean, scale to unit RMS radius.
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double rms = 0.0;
  for (const auto& p : points) rms += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  rms = std::sqrt(rms / static_cast<double>(n));
  if (!(rms > 0.0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "all points coincide");
  }
  Eigen::MatrixX2d p(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i, 0) = (points[static_cast<size_t>(i)].x - mx) / rms;
    p(i, 1) = (points[static_cast<size_t>(i)].y - my) / rms;
  }

  EllipseParams e = algebraic_fit(p);

  // Parameter vector: cx, cy, a, b, theta, t_1..t_n.
  const Eigen::Index m = 5 + n;
  Eigen::VectorXd par(m);
  par.head<5>() << e.center.x, e.center.y, e.semi_major, e.semi_minor, e.rotation;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 f = to_ellipse_frame(e, {p(i, 0), p(i, 1)});
    par(5 + i) = std::atan2(f.y / e.semi_minor, f.x / e.semi_major);
  }

  auto residuals = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
    const double c = std::cos(q(4)), s = std::sin(q(4));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = q(2) * std::cos(q(5 + i));
      const double v = q(3) * std::sin(q(5 + i));
      r(2 * i) = p(i, 0) - (q(0) + c * u - s * v);
      r(2 * i + 1) = p(i, 1) - (q(1) + s * u + c * v);
    }
  };

  Eigen::VectorXd r(2 * n), r_try(2 * n);
  residuals(par, r);
  double cost = r.squaredNorm();
  double mu = 1e-6;
  Eigen::MatrixXd jac(2 * n, m);
  for (int iter = 0; iter < 100; ++iter) {
    jac.setZero();
    const double c = std::cos(par(4)), s = std::sin(par(4));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ct = std::cos(par(5 + i)), st = std::sin(par(5 + i));
      const double u = par(2) * ct, v = par(3) * st;
      const auto rx = 2 * i, ry = 2 * i + 1;
      jac(rx, 0) = -1.0;
      jac(ry, 1) = -1.0;
      jac(rx, 2) = -c * ct;
      jac(ry, 2) = -s * ct;
      jac(rx, 3) = s * st;
      jac(ry, 3) = -c * st;
      jac(rx, 4) = s * u + c * v;
      jac(ry, 4) = -c * u + s * v;
      const double du = -par(2) * st, dv = par(3) * ct;
      jac(rx, 5 + i) = -(c * du - s * dv);
      jac(ry, 5 + i) = -(s * du + c * dv);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool improved = false;
    Eigen::VectorXd step;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal().array() += mu * (1.0 + jtj.diagonal().array());
      step = -lhs.ldlt().solve(g);
      const Eigen::VectorXd trial = par + step;
      residuals(trial, r_try);
      const double c_try = r_try.squaredNorm();
      if (c_try <= cost) {
        par = trial;
        r = r_try;
        cost = c_try;
        mu = std::max(mu / 10.0, 1e-15);
        improved = true;
        break;
      }
      mu *= 10.0;
    }
    if (!improved || step.norm() < 1e-10) break;
  }

  e = normalized(par(0), par(1), par(2), par(3), par(4));
  // Undo the normalisation.
  e.center = {e.center.x * rms + mx, e.center.y * rms + my};
  e.semi_major *= rms;
  e.semi_minor *= rms;
  if (!(e.semi_minor > 0.0) || !std::isfinite(e.semi_major)) {
    throw Error(ErrorKind::DegenerateConfiguration, "geometric refinement diverged");
  }
  return e;
}

double ellipse_residual(const EllipseParams& e, std::span<const Vec2> points) {
  double total = 0.0;
  for (const auto& pt : points) {
    const Vec2 f = to_ellipse_frame(e, pt);
    const double d = distance_point_ellipse(e.semi_major, e.semi_minor, std::abs(f.x), std::abs(f.y));
    total += d * d;
  }
  return total;
}

std::vector<Vec2> project_m5(std::span<const Location> locs, const EllipseParams& e) {
  if (!(e.semi_minor > 0.0) || e.semi_major < e.semi_minor) {
    throw Error(ErrorKind::InvalidArgument, "invalid ellipse");
  }
  std::vector<Vec2> out;
  out.reserve(locs.size());
  for (const auto& loc : locs) {
    const Vec2 f = to_ellipse_frame(e, loc.coords());
    out.push_back(unit({f.x / e.semi_major, f.y / e.semi_minor}, 1.0));
  }
  return out;
}

std::vector<Vec2> project_m6(std::span<const Location> locs) {
  if (locs.empty()) {
    throw Error(ErrorKind::InvalidArgument, "no locations to project");
  }
  double mx = 0.0, my = 0.0;
  for (const auto& loc : locs) {
    mx += loc.easting;
    my += loc.northing;
  }
  mx /= static_cast<double>(locs.size());
  my /= static_cast<double>(locs.size());
  double scale = 0.0;
  for (const auto& loc : locs) {
    scale = std::max(scale, std::hypot(loc.easting - mx, loc.northing - my));
  }
  std::vector<Vec2> out;
  out.reserve(locs.size());
  for (const auto& loc : locs) {
    out.push_back(unit({loc.easting - mx, loc.northing - my}, scale));
  }
  return out;
}

double angular_distance(Vec2 c1, Vec2 c2) {
  for (const Vec2& c : {c1, c2}) {
    if (std::abs(std::hypot(c.x, c.y) - 1.0) >= 1e-9) {
      throw Error(ErrorKind::NotOnCircle, "point is not on the unit circle");
    }
  }
  const double cross = c1.x * c2.y - c1.y * c2.x;
  const double dot = c1.x * c2.x + c1.y * c2.y;
  return std::atan2(std::abs(cross), dot);
}

double chord_distance(double omega, double r) {
  if (!(omega >= 0.0 && omega <= kPi) || !(r > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "chord distance needs omega in [0, pi] and r > 0");
  }
  return 2.0 * r * std::sin(omega / 2.0);
}

double equator_angle(Vec2 a, Vec2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  if (dx == 0.0 && dy == 0.0) {
    throw Error(ErrorKind::CoincidentPoints, "equator angle of coincident points");
  }
  return std::atan2(std::abs(dy), std::abs(dx));
}

}  // namespace plnspatial
