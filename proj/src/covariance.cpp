#include "plnspatial/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "plnspatial/error.hpp"

namespace plnspatial {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be positive and finite");
  }
}

double omega_of(const SpatialPoint& a, const SpatialPoint& b) {
  return angular_distance(a.pos, b.pos);
}

bool on_unit_circle(const SpatialPoint& p) {
  return std::abs(std::hypot(p.pos.x, p.pos.y) - 1.0) < 1e-9;
}

// Shared by correlate() and the cached matrix fill so both agree bit-for-bit.
struct Evaluator {
  double cos_a = 1.0, sin_a = 0.0, inv_ratio = 1.0;

  explicit Evaluator(const CorrelationSpec& spec) {
    if (const auto* g = std::get_if<GeomAniso>(&spec)) {
      cos_a = std::cos(g->aniso.psi_A);
      sin_a = std::sin(g->aniso.psi_A);
      inv_ratio = 1.0 / g->aniso.psi_R;
    }
  }

  double operator()(const CorrelationSpec& spec, double dx, double dy, double dist, double ddepth,
                    double omega) const {
    return std::visit(
        overloaded{
            [&](const Independence&) { return dist == 0.0 && !(ddepth > 0.0) ? 1.0 : 0.0; },
            [&](const Isotropic& s) { return std::exp(-dist / s.phi); },
            [&](const GeomAniso& s) {
              const double u = dx * cos_a + dy * sin_a;
              const double v = (-dx * sin_a + dy * cos_a) * inv_ratio;
              return std::exp(-std::hypot(u, v) / s.phi);
            },
            [&](const CovariateInCorr& s) { return std::exp(-dist / s.phi1 - ddepth / s.phi2); },
            [&](const CircleChord& s) { return std::exp(-2.0 * std::sin(omega / 2.0) / s.phi); },
            [&](const CircleArc& s) { return std::exp(-omega / s.phi); },
        },
        spec);
  }
};

bool needs_depth(const CorrelationSpec& spec) { return std::holds_alternative<CovariateInCorr>(spec); }
bool needs_circle(const CorrelationSpec& spec) {
  return std::holds_alternative<CircleChord>(spec) || std::holds_alternative<CircleArc>(spec);
}

}  // namespace

void validate(const CorrelationSpec& spec) {
  std::visit(overloaded{
                 [](const Independence&) {},
                 [](const Isotropic& s) { require_positive(s.phi, "phi"); },
                 [](const GeomAniso& s) {
                   require_positive(s.phi, "phi");
                   if (!(s.aniso.psi_R >= 1.0) || !std::isfinite(s.aniso.psi_R)) {
                     throw Error(ErrorKind::InvalidArgument, "psi_R must be >= 1");
                   }
                   if (!std::isfinite(s.aniso.psi_A)) {
                     throw Error(ErrorKind::InvalidArgument, "psi_A must be finite");
                   }
                 },
                 [](const CovariateInCorr& s) {
                   require_positive(s.phi1, "phi1");
                   require_positive(s.phi2, "phi2");
                 },
                 [](const CircleChord& s) { require_positive(s.phi, "phi"); },
                 [](const CircleArc& s) { require_positive(s.phi, "phi"); },
             },
             spec);
}

std::string_view family_name(const CorrelationSpec& spec) {
  return std::visit(overloaded{
                        [](const Independence&) { return std::string_view("Independence"); },
                        [](const Isotropic&) { return std::string_view("Isotropic"); },
                        [](const GeomAniso&) { return std::string_view("GeomAniso"); },
                        [](const CovariateInCorr&) { return std::string_view("CovariateInCorr"); },
                        [](const CircleChord&) { return std::string_view("CircleChord"); },
                        [](const CircleArc&) { return std::string_view("CircleArc"); },
                    },
                    spec);
}

std::vector<HyperParamInfo> hyperparameters(const CorrelationSpec& spec) {
  return std::visit(
      overloaded{
          [](const Independence&) { return std::vector<HyperParamInfo>{}; },
          [](const Isotropic&) { return std::vector<HyperParamInfo>{{"phi", ParamScale::Log}}; },
          [](const GeomAniso&) {
            return std::vector<HyperParamInfo>{{"phi", ParamScale::Log},
                                               {"psi_A", ParamScale::HalfTurn},
                                               {"psi_R", ParamScale::LogMinusOne}};
          },
          [](const CovariateInCorr&) {
            return std::vector<HyperParamInfo>{{"phi1", ParamScale::Log}, {"phi2", ParamScale::Log}};
          },
          [](const CircleChord&) { return std::vector<HyperParamInfo>{{"phi", ParamScale::Log}}; },
          [](const CircleArc&) { return std::vector<HyperParamInfo>{{"phi", ParamScale::Log}}; },
      },
      spec);
}

std::vector<double> get_hyperparameters(const CorrelationSpec& spec) {
  return std::visit(overloaded{
                        [](const Independence&) { return std::vector<double>{}; },
                        [](const Isotropic& s) { return std::vector<double>{s.phi}; },
                        [](const GeomAniso& s) {
                          return std::vector<double>{s.phi, s.aniso.psi_A, s.aniso.psi_R};
                        },
                        [](const CovariateInCorr& s) { return std::vector<double>{s.phi1, s.phi2}; },
                        [](const CircleChord& s) { return std::vector<double>{s.phi}; },
                        [](const CircleArc& s) { return std::vector<double>{s.phi}; },
                    },
                    spec);
}

void set_hyperparameters(CorrelationSpec& spec, std::span<const double> v) {
  if (v.size() != hyperparameters(spec).size()) {
    throw Error(ErrorKind::InvalidArgument, "wrong number of correlation hyperparameters");
  }
  std::visit(overloaded{
                 [](Independence&) {},
                 [&](Isotropic& s) { s.phi = v[0]; },
                 [&](GeomAniso& s) {
                   s.phi = v[0];
                   s.aniso.psi_A = v[1];
                   s.aniso.psi_R = v[2];
                 },
                 [&](CovariateInCorr& s) {
                   s.phi1 = v[0];
                   s.phi2 = v[1];
                 },
                 [&](CircleChord& s) { s.phi = v[0]; },
                 [&](CircleArc& s) { s.phi = v[0]; },
             },
             spec);
}

double correlate(const CorrelationSpec& spec, const SpatialPoint& a, const SpatialPoint& b) {
  validate(spec);
  double ddepth = kNaN;
  if (needs_depth(spec)) {
    if (!a.depth || !b.depth) {
      throw Error(ErrorKind::MissingCovariate, "covariate-in-correlation needs geodetic depth");
    }
    ddepth = std::abs(*a.depth - *b.depth);
  } else if (std::holds_alternative<Independence>(spec) && a.depth && b.depth) {
    ddepth = std::abs(*a.depth - *b.depth);
  }
  const double omega = needs_circle(spec) ? omega_of(a, b) : kNaN;
  const double dx = a.pos.x - b.pos.x, dy = a.pos.y - b.pos.y;
  return Evaluator(spec)(spec, dx, dy, std::hypot(dx, dy), ddepth, omega);
}

CorrelationKernel::CorrelationKernel(std::vector<SpatialPoint> points) : points_(std::move(points)) {
  const auto n = points_.size();
  for (const auto& p : points_) {
    has_depth_ = has_depth_ && p.depth.has_value();
    on_circle_ = on_circle_ && on_unit_circle(p);
  }
  pairs_.reserve(n * (n - (n > 0 ? 1 : 0)) / 2);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const auto& a = points_[i];
      const auto& b = points_[j];
      Pair pr{};
      pr.dx = a.pos.x - b.pos.x;
      pr.dy = a.pos.y - b.pos.y;
      pr.dist = std::hypot(pr.dx, pr.dy);
      pr.ddepth = has_depth_ ? std::abs(*a.depth - *b.depth) : kNaN;
      pr.omega = on_circle_ ? angular_distance(a.pos, b.pos) : kNaN;
      max_dist_ = std::max(max_dist_, pr.dist);
      if (has_depth_) max_ddepth_ = std::max(max_ddepth_, pr.ddepth);
      pairs_.push_back(pr);
    }
  }
}

void CorrelationKernel::fill(const CorrelationSpec& spec, Eigen::MatrixXd& out) const {
  validate(spec);
  if (needs_depth(spec) && !has_depth_) {
    throw Error(ErrorKind::MissingCovariate, "covariate-in-correlation needs geodetic depth");
  }
  if (needs_circle(spec) && !on_circle_) {
    throw Error(ErrorKind::NotOnCircle, "circle kernel applied to points off the unit circle");
  }
  const Eigen::Index n = size();
  out.resize(n, n);
  if (std::holds_alternative<Independence>(spec)) {
    out.setIdentity();
    return;
  }
  const Evaluator eval(spec);
  size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j, ++k) {
      const Pair& p = pairs_[k];
      const double v = eval(spec, p.dx, p.dy, p.dist, p.ddepth, p.omega);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
}

Eigen::MatrixXd CorrelationKernel::matrix(const CorrelationSpec& spec) const {
  Eigen::MatrixXd m;
  fill(spec, m);
  return m;
}

std::vector<Vec2> circle_points(std::span<const Location> locs, CircleProjection projection) {
  if (projection == CircleProjection::M6) return project_m6(locs);
  std::vector<Vec2> pts;
  pts.reserve(locs.size());
  for (const auto& l : locs) pts.push_back(l.coords());
  return project_m5(locs, fit_ellipse_ols(pts));
}

Eigen::MatrixXd CovarianceMatrix::in_input_order() const {
  const Eigen::Index n = dim();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      out(order[static_cast<size_t>(a)], order[static_cast<size_t>(b)]) = values(a, b);
    }
  }
  return out;
}

namespace {

std::vector<SpatialPoint> planar_points(std::span<const Location> locs, std::span<const int> idx) {
  std::vector<SpatialPoint> pts;
  pts.reserve(idx.size());
  for (int i : idx) {
    const auto& l = locs[static_cast<size_t>(i)];
    pts.push_back({l.coords(), l.geodetic_depth});
  }
  return pts;
}

void check_variance(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorKind::InvalidArgument, "process variance must be positive");
  }
}

}  // namespace

CovarianceMatrix build_covariance(const DomainSpec& domain, std::span<const Location> locs) {
  const auto n = static_cast<int>(locs.size());
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "need at least one location");
  CovarianceMatrix out;
  out.order.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.order[static_cast<size_t>(i)] = i;

  std::visit(
      overloaded{
          [&](const WholeLakeDomain& d) {
            check_variance(d.process.variance);
            const CorrelationKernel k(planar_points(locs, out.order));
            out.values = d.process.variance * k.matrix(d.process.corr);
          },
          [&](const CircleDomain& d) {
            check_variance(d.process.variance);
            std::vector<SpatialPoint> pts;
            for (const auto& c : circle_points(locs, d.projection)) pts.push_back({c, std::nullopt});
            const CorrelationKernel k(std::move(pts));
            out.values = d.process.variance * k.matrix(d.process.corr);
          },
          [&](const ByShoreDomain& d) {
            check_variance(d.north.variance);
            check_variance(d.south.variance);
            std::vector<int> north, south;
            for (int i = 0; i < n; ++i) {
              (locs[static_cast<size_t>(i)].shore == Shore::North ? north : south).push_back(i);
            }
            if (north.empty() || south.empty()) {
              throw Error(ErrorKind::EmptyShore, "by-shore domain needs both shores present");
            }
            out.order = north;
            out.order.insert(out.order.end(), south.begin(), south.end());
            const auto nn = static_cast<Eigen::Index>(north.size());
            const auto ns = static_cast<Eigen::Index>(south.size());
            out.values = Eigen::MatrixXd::Zero(n, n);
            out.values.topLeftCorner(nn, nn) =
                d.north.variance * CorrelationKernel(planar_points(locs, north)).matrix(d.north.corr);
            out.values.bottomRightCorner(ns, ns) =
                d.south.variance * CorrelationKernel(planar_points(locs, south)).matrix(d.south.corr);
          },
      },
      domain);
  return out;
}

JitteredCholesky cholesky_jittered(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidArgument, "matrix must be square");
  const double mean_diag = m.rows() > 0 ? m.diagonal().mean() : 0.0;
  JitteredCholesky out;
  for (double level : {0.0, 1e-10, 1e-8, 1e-6}) {
    const double jitter = level * mean_diag;
    if (jitter == 0.0) {
      out.llt.compute(m);
    } else {
      Eigen::MatrixXd shifted = m;
      shifted.diagonal().array() += jitter;
      out.llt.compute(shifted);
    }
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      return out;
    }
  }
  throw Error(ErrorKind::NotPositiveDefinite, "Cholesky failed at every jitter level");
}

JitteredCholesky cholesky_jittered(CovarianceMatrix& m) {
  auto f = cholesky_jittered(m.values);
  m.values.diagonal().array() += f.jitter;
  m.jitter_used = f.jitter;
  return f;
}

}  // namespace plnspatial
