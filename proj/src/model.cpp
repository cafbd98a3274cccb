#include "plnspatial/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "plnspatial/error.hpp"

namespace plnspatial {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

ModelId parse_model_id(std::string_view s) {
  static constexpr std::string_view names[] = {"M0", "M1", "M2", "M3", "M4", "M5",
                                               "M6", "M7", "M8", "M9", "M10"};
  for (size_t i = 0; i < std::size(names); ++i) {
    if (s == names[i]) return static_cast<ModelId>(i);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown model id '" + std::string(s) + "'");
}

std::string to_string(ModelId id) { return "M" + std::to_string(static_cast<int>(id)); }

ModelConfig model_config(ModelId id, bool circle_arc) {
  ModelConfig m;
  m.id = id;
  const CorrKind circle = circle_arc ? CorrKind::CircleArc : CorrKind::CircleChord;
  switch (id) {
    case ModelId::M0: break;
    case ModelId::M1: m.domain = DomainKind::WholeLake; m.corr = CorrKind::Independence; break;
    case ModelId::M2: m.domain = DomainKind::WholeLake; m.corr = CorrKind::Isotropic; break;
    case ModelId::M3: m.domain = DomainKind::WholeLake; m.corr = CorrKind::GeomAniso; break;
    case ModelId::M4: m.domain = DomainKind::WholeLake; m.corr = CorrKind::CovariateInCorr; break;
    case ModelId::M5:
      m.domain = DomainKind::Circle;
      m.corr = circle;
      m.projection = CircleProjection::M5;
      break;
    case ModelId::M6:
      m.domain = DomainKind::Circle;
      m.corr = circle;
      m.projection = CircleProjection::M6;
      break;
    case ModelId::M7: m.domain = DomainKind::ByShore; m.corr = CorrKind::Independence; break;
    case ModelId::M8: m.domain = DomainKind::ByShore; m.corr = CorrKind::Isotropic; break;
    case ModelId::M9: m.domain = DomainKind::ByShore; m.corr = CorrKind::GeomAniso; break;
    case ModelId::M10: m.domain = DomainKind::ByShore; m.corr = CorrKind::CovariateInCorr; break;
  }
  return m;
}

std::string structure_name(const ModelConfig& m) {
  switch (m.corr) {
    case CorrKind::None: return "None";
    case CorrKind::Independence: return "Independence";
    case CorrKind::Isotropic: return "Isotropy";
    case CorrKind::GeomAniso: return "Anisotropy-Geometric";
    case CorrKind::CovariateInCorr: return "Anisotropy-CovariateInCorrelation";
    case CorrKind::CircleChord: return "Isotropy-Chord";
    case CorrKind::CircleArc: return "Isotropy-Arc";
  }
  return "None";
}

std::string domain_name(const ModelConfig& m) {
  switch (m.domain) {
    case DomainKind::None: return "None";
    case DomainKind::WholeLake: return "WholeLake";
    case DomainKind::Circle: return m.projection == CircleProjection::M5 ? "Circle-M5" : "Circle-M6";
    case DomainKind::ByShore: return "ByShore";
  }
  return "None";
}

// ---------------------------------------------------------------------------

std::vector<int> Dataset::day_counts() const {
  std::vector<int> out(static_cast<size_t>(n_days), 0);
  for (const auto& l : locations) out[static_cast<size_t>(l.day_index - 1)] += 1;
  return out;
}

Eigen::VectorXd Dataset::y() const {
  Eigen::VectorXd v(n());
  for (int i = 0; i < n(); ++i) v(i) = counts[static_cast<size_t>(i)];
  return v;
}

Dataset make_dataset(std::vector<Location> locations, std::vector<int> counts, Eigen::MatrixXd covariates,
                     bool standardized) {
  Dataset d;
  d.locations = std::move(locations);
  d.counts = std::move(counts);
  d.covariates = std::move(covariates);
  d.covariates_standardized = standardized;
  int t_max = 0;
  for (const auto& l : d.locations) t_max = std::max(t_max, l.day_index);
  d.n_days = t_max;
  d.julian.assign(static_cast<size_t>(t_max), -1);
  for (const auto& l : d.locations) {
    if (l.day_index < 1) throw Error(ErrorKind::InvalidArgument, "day_index must be >= 1");
    auto& j = d.julian[static_cast<size_t>(l.day_index - 1)];
    if (j >= 0 && j != l.julian_day) {
      throw Error(ErrorKind::InvalidArgument,
                  "day " + std::to_string(l.day_index) + " maps to two different Julian days");
    }
    j = l.julian_day;
  }
  validate(d);
  return d;
}

void validate(const Dataset& data) {
  const auto n = static_cast<size_t>(data.n());
  if (data.locations.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "counts and locations differ in length");
  }
  if (static_cast<size_t>(data.covariates.rows()) != n) {
    throw Error(ErrorKind::InvalidArgument, "covariate rows differ from number of counts");
  }
  if (data.n_days < 1 || data.julian.size() != static_cast<size_t>(data.n_days)) {
    throw Error(ErrorKind::InvalidArgument, "invalid number of sampling days");
  }
  for (int c : data.counts) {
    if (c < 0) throw Error(ErrorKind::InvalidArgument, "counts must be non-negative");
  }
  if (!data.covariates.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "covariates must be finite");
  }
  std::vector<int> seen(static_cast<size_t>(data.n_days), 0);
  for (const auto& l : data.locations) {
    validate(l);
    if (l.day_index > data.n_days) throw Error(ErrorKind::InvalidArgument, "day_index exceeds T");
    if (data.julian[static_cast<size_t>(l.day_index - 1)] != l.julian_day) {
      throw Error(ErrorKind::InvalidArgument, "inconsistent Julian day map");
    }
    seen[static_cast<size_t>(l.day_index - 1)] = 1;
  }
  for (int t = 0; t < data.n_days; ++t) {
    if (!seen[static_cast<size_t>(t)]) {
      throw Error(ErrorKind::InvalidArgument, "sampling day " + std::to_string(t + 1) + " has no locations");
    }
  }
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.counts == b.counts && a.locations == b.locations && a.n_days == b.n_days &&
         a.julian == b.julian && a.covariates_standardized == b.covariates_standardized &&
         a.covariates.rows() == b.covariates.rows() && a.covariates.cols() == b.covariates.cols() &&
         a.covariates == b.covariates;
}

bool looks_standardized(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) return false;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double m = x.col(k).mean();
    const double sd = std::sqrt((x.col(k).array() - m).square().sum() / static_cast<double>(x.rows() - 1));
    if (std::abs(m) > 1e-9 || std::abs(sd - 1.0) > 1e-9) return false;
  }
  return true;
}


void standardize_covariates(Dataset& data) {
  const auto n = data.covariates.rows();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "standardisation needs at least two rows");
  for (Eigen::Index k = 0; k < data.covariates.cols(); ++k) {
    auto col = data.covariates.col(k);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw Error(ErrorKind::InvalidArgument, "constant covariate column");
    col /= sd;
  }
  data.covariates_standardized = true;
}

Eigen::MatrixXd temporal_design(const Dataset& data) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(data.n(), data.n_days);
  for (int i = 0; i < data.n(); ++i) b(i, data.locations[static_cast<size_t>(i)].day_index - 1) = 1.0;
  return b;
}

Eigen::MatrixXd fixed_effect_design(const Dataset& data) {
  Eigen::MatrixXd x(data.n(), data.n_covariates() + 1);
  x.col(0).setOnes();
  if (data.n_covariates() > 0) x.rightCols(data.n_covariates()) = data.covariates;
  return x;
}

Eigen::MatrixXd residual_projector(const Dataset& data) { return residual_projection(fixed_effect_design(data)); }

Eigen::MatrixXd residual_projection(const Eigen::MatrixXd& x) {
  if (x.cols() > x.rows()) {
    throw Error(ErrorKind::RankDeficientDesign, "design has more columns than rows");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    throw Error(ErrorKind::RankDeficientDesign, "fixed-effect design has rank " + std::to_string(qr.rank()) +
                                                    " < " + std::to_string(x.cols()));
  }
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols());
  Eigen::MatrixXd p = -q * q.transpose();
  p.diagonal().array() += 1.0;
  return p;
}

// ---------------------------------------------------------------------------

SpatialLayout make_layout(const ModelConfig& model, const Dataset& data) {
  SpatialLayout layout;
  const int n = data.n();
  auto planar = [&](const std::vector<int>& sites) {
    std::vector<SpatialPoint> pts;
    pts.reserve(sites.size());
    for (int i : sites) {
      const auto& l = data.locations[static_cast<size_t>(i)];
      pts.push_back({l.coords(), l.geodetic_depth});
    }
    return pts;
  };
  std::vector<int> all(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;

  switch (model.domain) {
    case DomainKind::None: break;
    case DomainKind::WholeLake:
      layout.blocks.push_back({"", all, CorrelationKernel(planar(all))});
      break;
    case DomainKind::Circle: {
      std::vector<SpatialPoint> pts;
      for (const auto& c : circle_points(data.locations, model.projection)) pts.push_back({c, std::nullopt});
      layout.blocks.push_back({"", all, CorrelationKernel(std::move(pts))});
      break;
    }
    case DomainKind::ByShore: {
      std::vector<int> north, south;
      for (int i = 0; i < n; ++i) {
        (data.locations[static_cast<size_t>(i)].shore == Shore::North ? north : south).push_back(i);
      }
      if (north.empty() || south.empty()) {
        throw Error(ErrorKind::EmptyShore, "by-shore model needs locations on both shores");
      }
      layout.blocks.push_back({"N", north, CorrelationKernel(planar(north))});
      layout.blocks.push_back({"S", south, CorrelationKernel(planar(south))});
      break;
    }
  }
  return layout;
}

CorrelationSpec initial_correlation(const ModelConfig& model, const SpatialBlock& block) {
  const double d = block.kernel.max_distance() > 0.0 ? block.kernel.max_distance() : 1.0;
  const double q = block.kernel.max_depth_difference() > 0.0 ? block.kernel.max_depth_difference() : 1.0;
  switch (model.corr) {
    case CorrKind::None:
    case CorrKind::Independence: return Independence{};
    case CorrKind::Isotropic: return Isotropic{d / 20.0};
    case CorrKind::GeomAniso: return GeomAniso{d / 20.0, {std::numbers::pi / 2.0, 1.5}};
    case CorrKind::CovariateInCorr: return CovariateInCorr{d / 20.0, q / 2.0};
    case CorrKind::CircleChord: return CircleChord{d / 20.0};
    case CorrKind::CircleArc: return CircleArc{d / 20.0};
  }
  return Independence{};
}

// ---------------------------------------------------------------------------

Eigen::VectorXd latent_spatial(const ParameterState& s, const Dataset& data) {
  Eigen::VectorXd z = s.W.array() - s.beta0;
  for (int i = 0; i < data.n(); ++i) z(i) -= s.gamma(data.locations[static_cast<size_t>(i)].day_index - 1);
  return z;
}

Eigen::VectorXd linear_predictor(const ParameterState& s, const Dataset& data) {
  Eigen::VectorXd eta = s.W;
  if (data.n_covariates() > 0) eta.noalias() += data.covariates * s.beta_star;
  return eta;
}

Eigen::VectorXd restricted_linear_predictor(const ParameterState& s, const Dataset& data,
                                            const Eigen::MatrixXd& p_perp) {
  const Eigen::VectorXd z = latent_spatial(s, data);
  Eigen::VectorXd eta = p_perp * z;
  eta.array() += s.beta0;
  for (int i = 0; i < data.n(); ++i) eta(i) += s.gamma(data.locations[static_cast<size_t>(i)].day_index - 1);
  if (data.n_covariates() > 0) eta.noalias() += data.covariates * s.beta_star;
  return eta;
}

// ---------------------------------------------------------------------------

double log_normal_density(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double log_inv_gamma_density(double x, const InvGammaPrior& p) {
  if (!(x > 0.0)) return kNegInf;
  return p.shape * std::log(p.scale) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(x) - p.scale / x;
}

double log_gamma_density(double x, const GammaPrior& p) {
  if (!(x > 0.0)) return kNegInf;
  return p.shape * std::log(p.rate) - std::lgamma(p.shape) + (p.shape - 1.0) * std::log(x) - p.rate * x;
}

double log_pareto_density(double x, const ParetoPrior& p) {
  if (!(x >= p.scale)) return kNegInf;
  return std::log(p.shape) + p.shape * std::log(p.scale) - (p.shape + 1.0) * std::log(x);
}

double preliminary_residual_variance(const Dataset& data) {
  const int n = data.n();
  const Eigen::MatrixXd x = fixed_effect_design(data);
  const Eigen::VectorXd ly = (data.y().array() + 0.5).log();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::VectorXd coef = qr.solve(ly);
  const double rss = (ly - x * coef).squaredNorm();
  const int dof = n - static_cast<int>(qr.rank());
  const double s2 = dof > 0 ? rss / dof : 1.0;
  return std::max(s2, 1e-6);
}

double range_gamma_rate(double shape, double max_distance, double probability) {
  if (!(max_distance > 0.0)) return 1.0;
  return boost::math::gamma_p_inv(shape, probability) / (max_distance / 6.0);
}

ResolvedPriors resolve_priors(const Hyperpriors& hp, const ModelConfig& model, const Dataset& data,
                              const SpatialLayout& layout) {
  if (!(hp.variance_shape > 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "inverse-gamma shape must exceed 1 for a finite mean");
  }
  ResolvedPriors r;
  r.beta_prior_var = hp.beta_prior_var;
  r.prelim_residual_variance = preliminary_residual_variance(data);
  // Inverse gamma with mean equal to the preliminary residual variance.
  const double scale = r.prelim_residual_variance * (hp.variance_shape - 1.0);
  r.sigma2 = {hp.variance_shape, hp.sigma2_scale.value_or(scale)};
  r.tau2 = {hp.variance_shape, hp.tau2_scale.value_or(scale)};
  r.psi_R = hp.psi_R;
  for (const auto& b : layout.blocks) {
    r.phi.push_back({hp.phi_shape, hp.phi_rate.value_or(range_gamma_rate(
                                       hp.phi_shape, b.kernel.max_distance(), hp.range_probability))});
    r.phi2.push_back({hp.phi_shape, hp.phi2_rate.value_or(range_gamma_rate(
                                        hp.phi_shape, b.kernel.max_depth_difference(), hp.range_probability))});
  }
  const auto [jmin, jmax] = std::minmax_element(data.julian.begin(), data.julian.end());
  r.phi_gamma = {hp.phi_shape,
                 hp.phi_gamma_rate.value_or(range_gamma_rate(hp.phi_shape, static_cast<double>(*jmax - *jmin),
                                                             hp.range_probability))};
  (void)model;
  return r;
}

double log_prior(const ParameterState& s, const ResolvedPriors& p) {
  double lp = log_normal_density(s.beta0, 0.0, p.beta_prior_var);
  for (Eigen::Index k = 0; k < s.beta_star.size(); ++k) lp += log_normal_density(s.beta_star(k), 0.0, p.beta_prior_var);
  for (size_t b = 0; b < s.sigma2.size(); ++b) lp += log_inv_gamma_density(s.sigma2[b], p.sigma2);
  lp += log_inv_gamma_density(s.tau2, p.tau2);
  for (size_t b = 0; b < s.corr.size(); ++b) {
    const GammaPrior phi = b < p.phi.size() ? p.phi[b] : GammaPrior{};
    const GammaPrior phi2 = b < p.phi2.size() ? p.phi2[b] : GammaPrior{};
    lp += log_correlation_prior(s.corr[b], phi, phi2, p.psi_R);
  }
  if (s.phi_gamma) lp += log_gamma_density(*s.phi_gamma, p.phi_gamma);
  return lp;
}

double log_correlation_prior(const CorrelationSpec& c, const GammaPrior& phi, const GammaPrior& phi2,
                             const ParetoPrior& psi_R) {
  if (const auto* iso = std::get_if<Isotropic>(&c)) return log_gamma_density(iso->phi, phi);
  if (const auto* g = std::get_if<GeomAniso>(&c)) {
    const double a = g->aniso.psi_A;
    if (!(a >= 0.0 && a <= std::numbers::pi)) return kNegInf;
    return log_gamma_density(g->phi, phi) - std::log(std::numbers::pi) + log_pareto_density(g->aniso.psi_R, psi_R);
  }
  if (const auto* cc = std::get_if<CovariateInCorr>(&c)) {
    return log_gamma_density(cc->phi1, phi) + log_gamma_density(cc->phi2, phi2);
  }
  if (const auto* ch = std::get_if<CircleChord>(&c)) return log_gamma_density(ch->phi, phi);
  if (const auto* ar = std::get_if<CircleArc>(&c)) return log_gamma_density(ar->phi, phi);
  return 0.0;
}

// ---------------------------------------------------------------------------

double poisson_log_likelihood(const Eigen::VectorXd& eta, std::span<const int> counts) {
  if (static_cast<size_t>(eta.size()) != counts.size()) {
    throw Error(ErrorKind::InvalidArgument, "linear predictor and counts differ in length");
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta(i);
    const double lambda = std::exp(e);
    if (!std::isfinite(e) || !std::isfinite(lambda)) {
      throw Error(ErrorKind::NonFiniteLinearPredictor, "lambda is not finite at site " + std::to_string(i));
    }
    const int y = counts[static_cast<size_t>(i)];
    ll += -lambda + y * e - std::lgamma(y + 1.0);
  }
  return ll;
}

double log_likelihood(const ParameterState& s, const Dataset& data) {
  return poisson_log_likelihood(linear_predictor(s, data), data.counts);
}

MarginalMoments marginal_moments(const Eigen::VectorXd& mu, double sigma2, const Eigen::MatrixXd& rho) {
  if (sigma2 < 0.0) throw Error(ErrorKind::InvalidArgument, "sigma2 must be non-negative");
  const Eigen::Index n = mu.size();
  if (rho.rows() != n || rho.cols() != n) throw Error(ErrorKind::InvalidArgument, "rho dimension mismatch");
  MarginalMoments m;
  m.mean = (mu.array() + sigma2 / 2.0).exp().matrix();
  m.cov.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = m.mean(i) * m.mean(j) * std::expm1(sigma2 * (i == j ? 1.0 : rho(i, j)));
      m.cov(i, j) = v;
      m.cov(j, i) = v;
    }
    m.cov(i, i) += m.mean(i);
  }
  return m;
}

Eigen::MatrixXd temporal_cov(double tau2, std::optional<double> phi_gamma, std::span<const int> julian) {
  if (!(tau2 > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau2 must be positive");
  const auto t = static_cast<Eigen::Index>(julian.size());
  if (!phi_gamma) return tau2 * Eigen::MatrixXd::Identity(t, t);
  if (!(*phi_gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "phi_gamma must be positive");
  Eigen::MatrixXd c(t, t);
  for (Eigen::Index a = 0; a < t; ++a) {
    for (Eigen::Index b = 0; b < t; ++b) {
      c(a, b) = tau2 * std::exp(-std::abs(julian[static_cast<size_t>(a)] - julian[static_cast<size_t>(b)]) / *phi_gamma);
    }
  }
  return c;
}

}  // namespace plnspatial
