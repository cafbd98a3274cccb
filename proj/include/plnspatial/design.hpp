#pragma once

#include <vector>

#include "plnspatial/model.hpp"
#include "plnspatial/rng.hpp"

namespace plnspatial {

/// Sampling design: two arcs along the north and south sides of an elliptical
/// lake, visited in clusters of adjacent locations, one cluster per day.
struct DesignSpec {
  int n_locations = 160;
  int n_days = 38;
  int span_days = 70;
  /// Locations per sampling day; empty means 4 on every day except two
  /// consecutive mid-season days with 8 (the 36x4 + 2x8 schedule for defaults).
  std::vector<int> cluster_sizes;
  bool alternate_shores = true;

  Vec2 center{690000.0, 5110000.0};
  double semi_major = 4000.0;
  double semi_minor = 2000.0;
  double rotation = 0.0;
  /// Half the angular extent of each arc, radians, around due north / south.
  double arc_half_angle = 1.1;
  /// Locations sit between (1 - band_width) and 1 times the shoreline radius.
  double band_width = 0.05;
  /// Isotropic positional noise, metres.
  double jitter = 15.0;
  double min_depth = 0.5;
  double max_depth = 6.0;
};

void validate(const DesignSpec& spec);
std::vector<int> cluster_schedule(const DesignSpec& spec);

std::vector<Location> generate_locations(const DesignSpec& spec, Rng& rng);

struct CovariateSpec {
  int count = 4;
  /// x1 is the geodetic depth of the location.
  bool depth_first = true;
  /// Correlation between every pair of the generated (non-depth) columns.
  double cross_correlation = 0.0;
  /// Share of variance from a smooth spatial field; the rest is white noise.
  double spatial_weight = 0.0;
  /// Decay length of that field; 0 means a quarter of the largest distance.
  double spatial_range = 0.0;
  bool standardize = true;
};

Eigen::MatrixXd generate_covariates(const CovariateSpec& spec, const std::vector<Location>& locs, Rng& rng);

struct SimulatedData {
  Dataset data;
  /// The generating state with the realised gamma and W filled in.
  ParameterState truth;
};

/// Draws gamma ~ N(0, tau2 R_gamma), Z ~ N(0, Sigma) per spatial block and
/// y ~ Poisson(lambda). A restricted `model` generates from the RSR predictor.
/// tau2 or sigma2 equal to 0 switch the corresponding effect off.
SimulatedData generate_dataset(const ModelConfig& model, const ParameterState& truth,
                               const std::vector<Location>& locs, const Eigen::MatrixXd& covariates, Rng& rng);

/// Coefficients giving ~11-fold (depth, negative) and ~4-fold (transparency,
/// positive) rate changes across 4.5 standard deviations; the rest zero.
Eigen::VectorXd default_coefficients(int n_covariates);

/// A generating state for `model` on `data`'s layout: beta0 = log(5),
/// default coefficients, sigma2 = 0.5, tau2 = 0.1 and the given correlation.
ParameterState default_truth(const ModelConfig& model, const Dataset& data, const CorrelationSpec& corr);

}  // namespace plnspatial
