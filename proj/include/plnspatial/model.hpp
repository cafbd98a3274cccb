#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plnspatial/covariance.hpp"
#include "plnspatial/geometry.hpp"

namespace plnspatial {

// ---------------------------------------------------------------------------
// Model lattice: spatial domain x correlation structure.

enum class ModelId { M0, M1, M2, M3, M4, M5, M6, M7, M8, M9, M10 };

ModelId parse_model_id(std::string_view s);
std::string to_string(ModelId id);

enum class DomainKind { None, WholeLake, Circle, ByShore };
enum class CorrKind { None, Independence, Isotropic, GeomAniso, CovariateInCorr, CircleChord, CircleArc };

struct ModelConfig {
  ModelId id = ModelId::M0;
  DomainKind domain = DomainKind::None;
  CorrKind corr = CorrKind::None;
  CircleProjection projection = CircleProjection::M5;
  /// Restricted spatial regression: spatial effects enter the linear predictor
  /// only through their projection onto the residual space of [1, X*].
  bool restricted = false;
  /// Exponential decay of temporal effects in Julian days (phi_gamma sampled).
  bool temporal_correlation = false;

  bool spatial() const { return domain != DomainKind::None; }
};

/// The model of Table-style id; circle models use the chord kernel unless
/// `circle_arc` is set.
ModelConfig model_config(ModelId id, bool circle_arc = false);

/// Human-readable correlation structure ("None", "Independence", ...).
std::string structure_name(const ModelConfig& m);
std::string domain_name(const ModelConfig& m);

// ---------------------------------------------------------------------------
// Data.

struct Dataset {
  std::vector<int> counts;
  Eigen::MatrixXd covariates;  // n x (K-1), no intercept column
  std::vector<Location> locations;
  int n_days = 0;
  std::vector<int> julian;  // julian[t-1] = J(t)
  bool covariates_standardized = false;

  int n() const { return static_cast<int>(counts.size()); }
  int n_covariates() const { return static_cast<int>(covariates.cols()); }
  /// n_t for t = 1..T.
  std::vector<int> day_counts() const;
  Eigen::VectorXd y() const;
};

/// Builds a dataset, deriving T and the Julian-day map from the locations.
Dataset make_dataset(std::vector<Location> locations, std::vector<int> counts,
                     Eigen::MatrixXd covariates, bool standardized);

void validate(const Dataset& data);
bool operator==(const Dataset& a, const Dataset& b);

/// Every column has mean 0 and sample sd 1 to 1e-9.
bool looks_standardized(const Eigen::MatrixXd& x);

/// Centre and scale every covariate column to zero mean and unit variance.
void standardize_covariates(Dataset& data);

/// n x T indicator matrix B with B(i, t(s_i)) = 1.
Eigen::MatrixXd temporal_design(const Dataset& data);

/// [1, X*].
Eigen::MatrixXd fixed_effect_design(const Dataset& data);
/// I - X (X'X)^-1 X'. RankDeficientDesign if X is not of full column rank.
Eigen::MatrixXd residual_projection(const Eigen::MatrixXd& x);
/// residual_projection of [1, X*].
Eigen::MatrixXd residual_projector(const Dataset& data);

// ---------------------------------------------------------------------------
// Spatial blocks: one per independent Gaussian process.

struct SpatialBlock {
  std::string label;  // "", "N" or "S"
  std::vector<int> sites;
  CorrelationKernel kernel;
};

struct SpatialLayout {
  std::vector<SpatialBlock> blocks;
};

SpatialLayout make_layout(const ModelConfig& model, const Dataset& data);

/// Starting correlation spec of a block for the model's family.
CorrelationSpec initial_correlation(const ModelConfig& model, const SpatialBlock& block);

// ---------------------------------------------------------------------------
// Parameters.

struct ParameterState {
  double beta0 = 0.0;
  Eigen::VectorXd beta_star;
  Eigen::VectorXd gamma;
  Eigen::VectorXd W;
  std::vector<double> sigma2;  // one per spatial block
  double tau2 = 1.0;
  std::vector<CorrelationSpec> corr;  // one per spatial block
  std::optional<double> phi_gamma;
};

/// Z = W - 1 beta0 - B gamma.
Eigen::VectorXd latent_spatial(const ParameterState& s, const Dataset& data);

/// log lambda for an unrestricted model: X* beta* + W.
Eigen::VectorXd linear_predictor(const ParameterState& s, const Dataset& data);
/// log lambda when the spatial effect is replaced by P_perp Z.
Eigen::VectorXd restricted_linear_predictor(const ParameterState& s, const Dataset& data,
                                            const Eigen::MatrixXd& p_perp);

struct InvGammaPrior {
  double shape = 2.0;
  double scale = 1.0;
};
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};
struct ParetoPrior {
  double scale = 1.0;
  double shape = 2.0;
};

/// User-facing prior settings; unset values are resolved from the data.
struct Hyperpriors {
  double beta_prior_var = 100.0;
  double variance_shape = 2.0;
  std::optional<double> sigma2_scale;
  std::optional<double> tau2_scale;
  double phi_shape = 1.0;
  std::optional<double> phi_rate;
  std::optional<double> phi2_rate;
  std::optional<double> phi_gamma_rate;
  ParetoPrior psi_R;
  /// Prior probability that the practical range 3*phi is at most half the
  /// largest observed distance; used to set unset gamma rates.
  double range_probability = 0.99;
};

struct ResolvedPriors {
  double beta_prior_var = 100.0;
  InvGammaPrior sigma2;
  InvGammaPrior tau2;
  std::vector<GammaPrior> phi;   // per block, decay on geographic (or circle) distance
  std::vector<GammaPrior> phi2;  // per block, decay on depth difference
  ParetoPrior psi_R;
  GammaPrior phi_gamma;
  double prelim_residual_variance = 1.0;
};

/// Residual variance of the least-squares fit of log(y + 0.5) on [1, X*].
double preliminary_residual_variance(const Dataset& data);

/// Gamma rate such that P(phi <= max_distance / 6) = probability.
double range_gamma_rate(double shape, double max_distance, double probability);

ResolvedPriors resolve_priors(const Hyperpriors& hp, const ModelConfig& model, const Dataset& data,
                              const SpatialLayout& layout);

double log_prior(const ParameterState& s, const ResolvedPriors& p);
/// Prior log-density of one block's correlation hyperparameters.
double log_correlation_prior(const CorrelationSpec& c, const GammaPrior& phi, const GammaPrior& phi2,
                             const ParetoPrior& psi_R);

// Component log-densities (exposed for tests and the sampler).
double log_normal_density(double x, double mean, double var);
double log_inv_gamma_density(double x, const InvGammaPrior& p);
double log_gamma_density(double x, const GammaPrior& p);
double log_pareto_density(double x, const ParetoPrior& p);

// ---------------------------------------------------------------------------
// Likelihood and moments.

/// Poisson log-likelihood including the -log(y!) normalising term.
double poisson_log_likelihood(const Eigen::VectorXd& eta, std::span<const int> counts);
double log_likelihood(const ParameterState& s, const Dataset& data);

struct MarginalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Mean and covariance of Y when log lambda ~ N(mu, sigma2 * rho).
MarginalMoments marginal_moments(const Eigen::VectorXd& mu, double sigma2, const Eigen::MatrixXd& rho);

/// T x T covariance of gamma: tau2 * I, or tau2 * exp(-|J - J'| / phi_gamma).
Eigen::MatrixXd temporal_cov(double tau2, std::optional<double> phi_gamma, std::span<const int> julian);

}  // namespace plnspatial
