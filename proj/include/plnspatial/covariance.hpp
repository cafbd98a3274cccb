#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "plnspatial/geometry.hpp"

namespace plnspatial {

// Correlation families. All decay parameters are length scales (> 0); the
// circle kernels work on the unit circle (r = 1).
struct Independence {};
struct Isotropic {
  double phi = 1.0;
};
struct GeomAniso {
  double phi = 1.0;
  AnisoTransform aniso;
};
struct CovariateInCorr {
  double phi1 = 1.0;  // geographic distance
  double phi2 = 1.0;  // geodetic depth difference
};
struct CircleChord {
  double phi = 1.0;
};
struct CircleArc {
  double phi = 1.0;
};

using CorrelationSpec =
    std::variant<Independence, Isotropic, GeomAniso, CovariateInCorr, CircleChord, CircleArc>;

void validate(const CorrelationSpec& spec);
std::string_view family_name(const CorrelationSpec& spec);

/// How a hyperparameter is moved by the random-walk sampler.
enum class ParamScale {
  Log,          // phi > 0, walk on log(phi)
  LogMinusOne,  // psi_R >= 1, walk on log(psi_R - 1)
  HalfTurn,     // psi_A, walk reflected into (0, pi)
};

struct HyperParamInfo {
  std::string name;
  ParamScale scale;
};

std::vector<HyperParamInfo> hyperparameters(const CorrelationSpec& spec);
std::vector<double> get_hyperparameters(const CorrelationSpec& spec);
void set_hyperparameters(CorrelationSpec& spec, std::span<const double> values);

/// A point handed to a correlation function: planar coordinates (or a point
/// on the unit circle) plus the geodetic depth when the kernel needs it.
struct SpatialPoint {
  Vec2 pos;
  std::optional<double> depth;
};

double correlate(const CorrelationSpec& spec, const SpatialPoint& a, const SpatialPoint& b);

/// Pairwise geometry cached once per location set; correlation matrices are
/// rebuilt from it for every hyperparameter value.
class CorrelationKernel {
 public:
  explicit CorrelationKernel(std::vector<SpatialPoint> points);

  Eigen::Index size() const { return static_cast<Eigen::Index>(points_.size()); }
  const std::vector<SpatialPoint>& points() const { return points_; }

  /// Unit-diagonal correlation matrix for `spec`.
  void fill(const CorrelationSpec& spec, Eigen::MatrixXd& out) const;
  Eigen::MatrixXd matrix(const CorrelationSpec& spec) const;

  double max_distance() const { return max_dist_; }
  double max_depth_difference() const { return max_ddepth_; }

 private:
  struct Pair {
    double dx, dy, dist, ddepth, omega;
  };

  std::vector<SpatialPoint> points_;
  std::vector<Pair> pairs_;  // strict upper triangle, row-major
  bool has_depth_ = true;
  bool on_circle_ = true;
  double max_dist_ = 0.0;
  double max_ddepth_ = 0.0;
};

// Spatial domains.
enum class CircleProjection { M5, M6 };

struct Process {
  CorrelationSpec corr;
  double variance = 1.0;
};
struct WholeLakeDomain {
  Process process;
};
struct CircleDomain {
  CircleProjection projection = CircleProjection::M5;
  Process process;
};
struct ByShoreDomain {
  Process north;
  Process south;
};
using DomainSpec = std::variant<WholeLakeDomain, CircleDomain, ByShoreDomain>;

/// Circle coordinates for a set of locations under the given projection.
std::vector<Vec2> circle_points(std::span<const Location> locs, CircleProjection projection);

struct CovarianceMatrix {
  Eigen::MatrixXd values;
  double jitter_used = 0.0;
  /// Row k of `values` corresponds to input location order[k].
  std::vector<int> order;

  Eigen::Index dim() const { return values.rows(); }
  Eigen::MatrixXd in_input_order() const;
};

CovarianceMatrix build_covariance(const DomainSpec& domain, std::span<const Location> locs);

struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  Eigen::MatrixXd lower() const { return llt.matrixL(); }
};

/// Factor m + jitter*I, escalating jitter through {0, 1e-10, 1e-8, 1e-6} times
/// the mean diagonal. Throws NotPositiveDefinite when every level fails.
JitteredCholesky cholesky_jittered(const Eigen::MatrixXd& m);
/// Same, and folds the jitter into the stored matrix.
JitteredCholesky cholesky_jittered(CovarianceMatrix& m);

}  // namespace plnspatial
