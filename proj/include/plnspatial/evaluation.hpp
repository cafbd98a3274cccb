#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "plnspatial/sampler.hpp"

namespace plnspatial {

struct DicResult {
  double dbar;
  double pd;
  double dic;
};

DicResult dic(std::span<const double> deviance_draws, double deviance_at_mean);

/// Sum over k of (F(k) - 1{y <= k})^2; stops once k >= y and 1 - F(k) < 1e-10.
double rps(std::span<const double> pmf, int y);

inline constexpr double kLogScoreFloor = 1e-300;

struct LogScore {
  double value;
  bool capped;  // p(y) underflowed; value is -log(kLogScoreFloor)
};

LogScore log_score(std::span<const double> pmf, int y);

/// ((y - mu) / sigma)^2 + 2 log sigma. DegenerateVariance unless sigma > 0.
double dss(double mu, double sigma, int y);

/// Posterior predictive of one count: an equal-weight mixture of Poissons.
struct PredictiveDistribution {
  std::vector<double> pmf;  // k = 0..K, truncated where 1 - F < 1e-10
  double mean;
  double sd;
};

PredictiveDistribution predictive(std::span<const double> lambdas);

/// Poisson pmf at k computed in log space.
double poisson_pmf(int k, double lambda);

struct ScoreReport {
  std::string model;
  double dbar = 0.0;
  double pd = 0.0;
  double dic = 0.0;
  double rps = 0.0;   // mean per observation
  double logs = 0.0;  // mean per observation
  double dss = 0.0;   // mean per observation
  std::vector<int> capped_sites;
};

/// Log rates of every stored draw (n x draws), using the restricted predictor
/// for RSR fits.
Eigen::MatrixXd linear_predictor_draws(const PosteriorSample& sample, const Dataset& data);

ScoreReport score_model(const PosteriorSample& sample, const Dataset& data);

/// Sorted by DIC; ties keep input order.
std::vector<ScoreReport> rank_by_dic(std::vector<ScoreReport> reports);

// ---------------------------------------------------------------------------
// Binned angle-correlation summary.

struct AnisotropyOptions {
  int n_bins = 6;
  int n_strata = 10;
  /// Fold pair directions to the acute angle with the east-west axis, [0, pi/2];
  /// otherwise bin line orientations over [0, pi).
  bool fold = true;
  int min_pairs = 10;
};

struct AngleBin {
  double lower;
  double upper;
  double value;  // distance-adjusted mean posterior correlation
  int n_pairs;
  bool too_few_pairs;
};

/// Pairs within each spatial block; correlations averaged over stored draws.
std::vector<AngleBin> anisotropy_summary(const PosteriorSample& sample, const Dataset& data,
                                         const AnisotropyOptions& options = {});

/// Index of the highest bin among those with enough pairs (-1 if none).
int peak_bin(const std::vector<AngleBin>& bins);

/// Direction folded to the acute angle with the east-west axis.
double acute_angle(double direction);

}  // namespace plnspatial
