#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plnspatial/design.hpp"
#include "plnspatial/sampler.hpp"

namespace plnspatial {

struct ProjectionOperator {
  Eigen::MatrixXd p_perp;
  int rank = 0;  // n - K
};

/// P_perp = I - X (X'X)^-1 X'; X carries the intercept column.
ProjectionOperator projection(const Eigen::MatrixXd& x);

/// Restricted spatial regression: the sampler with Z entering the linear
/// predictor only as P_perp Z. `model` must be spatial.
PosteriorSample fit_rsr(const ChainConfig& config, ModelConfig model, const Dataset& data,
                        const SamplerOptions& options = {});

/// Draws x [intercept, covariates].
Eigen::MatrixXd coefficient_draws(const PosteriorSample& sample);

/// beta~(m) = alpha(m) - (X'X)^-1 X' Z(m). alpha: draws x K, x: n x K, z: n x draws.
Eigen::MatrixXd rsr_ppd(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);
/// Same, from an RSR fit: alpha from the stored coefficients, Z the unconstrained spatial effect.
Eigen::MatrixXd rsr_ppd(const PosteriorSample& rsr, const Dataset& data);

struct IntervalSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  bool covers(double v) const { return lower <= v && v <= upper; }
  bool overlaps_zero() const { return covers(0.0); }
};

/// Posterior mean and equal-tailed credible interval.
IntervalSummary summarize(std::span<const double> draws, double level = 0.95);
IntervalSummary summarize(const Eigen::VectorXd& draws, double level = 0.95);

struct ConfoundingRow {
  std::string coefficient;
  IntervalSummary sglm;     // beta
  IntervalSummary rsr;      // alpha
  IntervalSummary rsr_ppd;  // beta~
};

/// Covariate coefficients (intercept excluded) under the three approaches.
std::vector<ConfoundingRow> confounding_report(const PosteriorSample& sglm, const PosteriorSample& rsr,
                                               const Dataset& data);

enum class Generator { SGLM, RSR };
enum class Fitter { SGLM, RSR, RSR_PPD };
std::string to_string(Generator g);
std::string to_string(Fitter f);

struct StudyConfig {
  int n_reps = 30;
  std::uint64_t seed = 1;
  ModelId model = ModelId::M8;
  DesignSpec design;
  CovariateSpec covariates;
  ChainConfig chain;
  SamplerOptions sampler;
  double beta0 = 1.6;
  double sigma2 = 0.5;
  double tau2 = 0.1;
  /// Decay length of the generating field; 0 means a tenth of the largest distance.
  double phi = 0.0;
};

/// Defaults for the desk-scale study: 100 locations over 25 days, spatially
/// smooth covariates, shortened chains.
StudyConfig default_study_config();

struct CoverageRow {
  Generator generator;
  Fitter fitter;
  std::string coefficient;
  double coverage;
  double mean_width;
  int n_reps;
};

/// Fits SGLM and RSR (and the RSR-PPD transform) to n_reps data sets from
/// `generator`; one row per fitter and covariate.
std::vector<CoverageRow> misspecification_study(Generator generator, const StudyConfig& config);

}  // namespace plnspatial
