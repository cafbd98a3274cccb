#include "plnspatial/design.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "plnspatial/error.hpp"

namespace plnspatial {

namespace {

Eigen::VectorXd std_normal(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

std::vector<int> cluster_schedule(const DesignSpec& spec) {
  if (!spec.cluster_sizes.empty()) return spec.cluster_sizes;
  if (spec.n_days < 1) throw Error(ErrorKind::InvalidArgument, "n_days must be positive");
  const int base = spec.n_locations / spec.n_days;
  if (base < 1) throw Error(ErrorKind::InvalidArgument, "fewer locations than sampling days");
  std::vector<int> sizes(static_cast<size_t>(spec.n_days), base);
  int rem = spec.n_locations - base * spec.n_days;
  // whole extra clusters go to consecutive mid-season days
  const int extra_days = std::min(rem / base, spec.n_days);
  const int first = std::max(0, spec.n_days / 2 - 1 - (extra_days - 1) / 2);
  for (int d = 0; d < extra_days; ++d) sizes[static_cast<size_t>((first + d) % spec.n_days)] += base;
  rem -= extra_days * base;
  sizes.back() += rem;
  return sizes;
}

void validate(const DesignSpec& spec) {
  if (spec.n_locations < 1) throw Error(ErrorKind::InvalidArgument, "n_locations must be positive");
  if (spec.n_days < 1) throw Error(ErrorKind::InvalidArgument, "n_days must be positive");
  if (spec.n_days > spec.span_days) throw Error(ErrorKind::InvalidArgument, "n_days exceeds span_days");
  const auto sizes = cluster_schedule(spec);
  if (static_cast<int>(sizes.size()) != spec.n_days) {
    throw Error(ErrorKind::InvalidArgument, "cluster schedule length differs from n_days");
  }
  if (std::any_of(sizes.begin(), sizes.end(), [](int s) { return s < 1; })) {
    throw Error(ErrorKind::InvalidArgument, "every sampling day needs at least one location");
  }
  if (std::accumulate(sizes.begin(), sizes.end(), 0) != spec.n_locations) {
    throw Error(ErrorKind::InvalidArgument, "cluster sizes do not sum to n_locations");
  }
  if (!(spec.semi_major > 0.0) || !(spec.semi_minor > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "lake semi-axes must be positive");
  }
  if (!(spec.band_width >= 0.0 && spec.band_width < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "band_width must lie in [0, 1)");
  }
  if (!(spec.arc_half_angle > 0.0 && spec.arc_half_angle <= std::numbers::pi / 2.0)) {
    throw Error(ErrorKind::InvalidArgument, "arc_half_angle must lie in (0, pi/2]");
  }
  if (!(spec.max_depth > spec.min_depth)) throw Error(ErrorKind::InvalidArgument, "max_depth must exceed min_depth");
}

std::vector<Location> generate_locations(const DesignSpec& spec, Rng& rng) {
  validate(spec);
  const auto sizes = cluster_schedule(spec);
  const int T = spec.n_days;

  std::vector<int> pool(static_cast<size_t>(spec.span_days));
  std::iota(pool.begin(), pool.end(), 1);
  std::shuffle(pool.begin(), pool.end(), rng.engine());
  std::vector<int> julian(pool.begin(), pool.begin() + T);
  std::sort(julian.begin(), julian.end());

  std::vector<Shore> shore(static_cast<size_t>(T));
  for (int d = 0; d < T; ++d) {
    shore[static_cast<size_t>(d)] =
        spec.alternate_shores ? (d % 2 == 0 ? Shore::North : Shore::South)
                              : (rng.uniform() < 0.5 ? Shore::North : Shore::South);
  }
  int per_shore[2] = {0, 0};
  for (int d = 0; d < T; ++d) per_shore[static_cast<int>(shore[static_cast<size_t>(d)])] += sizes[static_cast<size_t>(d)];

  const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
  int next[2] = {0, 0};
  std::vector<Location> locs;
  locs.reserve(static_cast<size_t>(spec.n_locations));
  for (int d = 0; d < T; ++d) {
    const Shore sh = shore[static_cast<size_t>(d)];
    const int k_sh = static_cast<int>(sh);
    const double mid = sh == Shore::North ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
    for (int j = 0; j < sizes[static_cast<size_t>(d)]; ++j) {
      const int k = next[k_sh]++;
      const int m = per_shore[k_sh];
      // west to east along the arc
      const double frac = m > 1 ? static_cast<double>(k) / (m - 1) : 0.5;
      const double t = sh == Shore::North ? mid + spec.arc_half_angle * (1.0 - 2.0 * frac)
                                          : mid - spec.arc_half_angle * (1.0 - 2.0 * frac);
      const double u = rng.uniform();
      const double r = 1.0 - spec.band_width * u;
      const double lx = r * spec.semi_major * std::cos(t);
      const double ly = r * spec.semi_minor * std::sin(t);
      Location l;
      l.id = static_cast<int>(locs.size()) + 1;
      l.easting = spec.center.x + c * lx - s * ly + rng.normal(0.0, spec.jitter);
      l.northing = spec.center.y + s * lx + c * ly + rng.normal(0.0, spec.jitter);
      l.shore = sh;
      // deeper offshore, smooth along the arc
      const double level = std::clamp(0.5 + 0.3 * std::sin(3.0 * t) + 0.2 * (2.0 * u - 1.0), 0.0, 1.0);
      l.geodetic_depth = spec.min_depth + (spec.max_depth - spec.min_depth) * level;
      l.day_index = d + 1;
      l.julian_day = julian[static_cast<size_t>(d)];
      locs.push_back(l);
    }
  }
  return locs;
}

Eigen::MatrixXd generate_covariates(const CovariateSpec& spec, const std::vector<Location>& locs, Rng& rng) {
  if (spec.count < 0) throw Error(ErrorKind::InvalidArgument, "covariate count must be non-negative");
  if (!(spec.cross_correlation >= 0.0 && spec.cross_correlation <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "cross_correlation must lie in [0, 1]");
  }
  if (!(spec.spatial_weight >= 0.0 && spec.spatial_weight <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "spatial_weight must lie in [0, 1]");
  }
  const auto n = static_cast<Eigen::Index>(locs.size());
  Eigen::MatrixXd x(n, spec.count);
  int col = 0;
  if (spec.depth_first && spec.count > 0) {
    for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = locs[static_cast<size_t>(i)].geodetic_depth;
    col = 1;
  }
  Eigen::MatrixXd chol;
  if (spec.spatial_weight > 0.0 && col < spec.count) {
    std::vector<SpatialPoint> pts;
    for (const auto& l : locs) pts.push_back({l.coords(), std::nullopt});
    CorrelationKernel k(pts);
    const double range = spec.spatial_range > 0.0 ? spec.spatial_range : std::max(k.max_distance() / 4.0, 1e-9);
    chol = cholesky_jittered(k.matrix(Isotropic{range})).lower();
  }
  const double rho = spec.cross_correlation;
  auto component = [&](bool spatial) {
    auto draw = [&] {
      Eigen::VectorXd z = std_normal(n, rng);
      return spatial ? Eigen::VectorXd(chol * z) : z;
    };
    Eigen::VectorXd common = draw();
    std::vector<Eigen::VectorXd> out;
    for (int k = col; k < spec.count; ++k) out.push_back(std::sqrt(rho) * common + std::sqrt(1.0 - rho) * draw());
    return out;
  };
  std::vector<Eigen::VectorXd> field, noise;
  if (spec.spatial_weight > 0.0) field = component(true);
  if (spec.spatial_weight < 1.0) noise = component(false);
  for (int k = col; k < spec.count; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    const auto j = static_cast<size_t>(k - col);
    if (!field.empty()) v += std::sqrt(spec.spatial_weight) * field[j];
    if (!noise.empty()) v += std::sqrt(1.0 - spec.spatial_weight) * noise[j];
    x.col(k) = v;
  }
  if (spec.standardize && n > 1) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      auto c = x.col(k);
      c.array() -= c.mean();
      const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(n - 1));
      if (sd > 0.0) c /= sd;
    }
  }
  return x;
}

SimulatedData generate_dataset(const ModelConfig& model, const ParameterState& truth,
                               const std::vector<Location>& locs, const Eigen::MatrixXd& covariates, Rng& rng) {
  SimulatedData out;
  out.data = make_dataset(locs, std::vector<int>(locs.size(), 0), covariates, looks_standardized(covariates));
  Dataset& data = out.data;
  const SpatialLayout layout = make_layout(model, data);
  if (truth.beta_star.size() != data.n_covariates()) {
    throw Error(ErrorKind::InvalidArgument, "truth has the wrong number of coefficients");
  }
  if (truth.sigma2.size() != layout.blocks.size() || truth.corr.size() != layout.blocks.size()) {
    throw Error(ErrorKind::InvalidArgument, "truth does not match the model's spatial blocks");
  }
  ParameterState s = truth;
  const int n = data.n();

  s.gamma = Eigen::VectorXd::Zero(data.n_days);
  if (truth.tau2 > 0.0) {
    const Eigen::MatrixXd l = cholesky_jittered(temporal_cov(truth.tau2, truth.phi_gamma, data.julian)).lower();
    s.gamma = l * std_normal(data.n_days, rng);
  } else if (truth.tau2 < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "tau2 must be non-negative");
  }

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  for (size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& blk = layout.blocks[b];
    if (truth.sigma2[b] < 0.0) throw Error(ErrorKind::InvalidArgument, "sigma2 must be non-negative");
    if (truth.sigma2[b] == 0.0) continue;
    validate(truth.corr[b]);
    const Eigen::MatrixXd l = cholesky_jittered(Eigen::MatrixXd(truth.sigma2[b] * blk.kernel.matrix(truth.corr[b]))).lower();
    const Eigen::VectorXd zb = l * std_normal(static_cast<Eigen::Index>(blk.sites.size()), rng);
    for (size_t a = 0; a < blk.sites.size(); ++a) z(blk.sites[a]) = zb(static_cast<Eigen::Index>(a));
  }

  s.W = z.array() + s.beta0;
  for (int i = 0; i < n; ++i) s.W(i) += s.gamma(data.locations[static_cast<size_t>(i)].day_index - 1);

  const Eigen::VectorXd eta =
      model.restricted ? restricted_linear_predictor(s, data, residual_projector(data)) : linear_predictor(s, data);
  for (int i = 0; i < n; ++i) {
    const double lambda = std::exp(eta(i));
    if (!std::isfinite(lambda) || lambda > 1e9) {
      throw Error(ErrorKind::NonFiniteLinearPredictor, "simulated rate overflows at site " + std::to_string(i));
    }
    data.counts[static_cast<size_t>(i)] = rng.poisson(lambda);
  }
  out.truth = std::move(s);
  return out;
}

Eigen::VectorXd default_coefficients(int n_covariates) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_covariates);
  if (n_covariates > 0) b(0) = -std::log(11.0) / 4.5;
  if (n_covariates > 1) b(1) = std::log(4.0) / 4.5;
  return b;
}

ParameterState default_truth(const ModelConfig& model, const Dataset& data, const CorrelationSpec& corr) {
  const SpatialLayout layout = make_layout(model, data);
  ParameterState s;
  s.beta0 = std::log(5.0);
  s.beta_star = default_coefficients(data.n_covariates());
  s.gamma = Eigen::VectorXd::Zero(data.n_days);
  s.W = Eigen::VectorXd::Zero(data.n());
  s.tau2 = 0.1;
  for (size_t b = 0; b < layout.blocks.size(); ++b) {
    s.sigma2.push_back(0.5);
    s.corr.push_back(corr);
  }
  if (model.temporal_correlation) s.phi_gamma = 10.0;
  return s;
}

}  // namespace plnspatial
