#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "plnspatial/model.hpp"

namespace testsupport {

// Small hand-built dataset: site i at (x_i, 0), alternating shores, on day days[i].
inline plnspatial::Dataset tiny_dataset(const std::vector<int>& days, const std::vector<int>& counts,
                                        Eigen::MatrixXd covariates = {}, double spacing = 100.0) {
  using namespace plnspatial;
  std::vector<Location> locs;
  for (size_t i = 0; i < days.size(); ++i) {
    Location l;
    l.id = static_cast<int>(i) + 1;
    l.easting = spacing * static_cast<double>(i);
    l.northing = (i % 2) ? -50.0 : 50.0;
    l.shore = (i % 2) ? Shore::South : Shore::North;
    l.geodetic_depth = 1.0 + 0.5 * static_cast<double>(i);
    l.day_index = days[i];
    l.julian_day = 10 + 3 * days[i];
    locs.push_back(l);
  }
  if (covariates.size() == 0) covariates.resize(static_cast<Eigen::Index>(days.size()), 0);
  return make_dataset(std::move(locs), counts, std::move(covariates), false);
}

// One-sample KS distance of draws against a cdf.
inline double ks_distance(std::vector<double> draws, const std::function<double(double)>& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (size_t i = 0; i < draws.size(); ++i) {
    const double f = cdf(draws[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

// Piecewise-linear cdf from an unnormalised log-density on a uniform grid.
struct GridCdf {
  std::vector<double> x;
  std::vector<double> F;

  GridCdf(const std::function<double(double)>& log_density, double lo, double hi, int n) {
    std::vector<double> lp(static_cast<size_t>(n));
    double mx = -INFINITY;
    for (int k = 0; k < n; ++k) {
      x.push_back(lo + (hi - lo) * k / (n - 1));
      lp[static_cast<size_t>(k)] = log_density(x.back());
      mx = std::max(mx, lp[static_cast<size_t>(k)]);
    }
    F.assign(static_cast<size_t>(n), 0.0);
    for (size_t k = 1; k < x.size(); ++k) {
      const double a = std::exp(lp[k - 1] - mx), b = std::exp(lp[k] - mx);
      F[k] = F[k - 1] + 0.5 * (a + b) * (x[k] - x[k - 1]);
    }
    for (double& f : F) f /= F.back();
  }

  double operator()(double v) const {
    if (v <= x.front()) return 0.0;
    if (v >= x.back()) return 1.0;
    const auto it = std::upper_bound(x.begin(), x.end(), v);
    const size_t k = static_cast<size_t>(it - x.begin());
    const double t = (v - x[k - 1]) / (x[k] - x[k - 1]);
    return F[k - 1] + t * (F[k] - F[k - 1]);
  }
};

}  // namespace testsupport
