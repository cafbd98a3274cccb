#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "plnspatial/error.hpp"
#include "plnspatial/model.hpp"
#include "plnspatial/rng.hpp"
#include "test_support.hpp"

using namespace plnspatial;
using testsupport::tiny_dataset;

TEST_SUITE("model") {

TEST_CASE("poisson log-likelihood") {
  CHECK(poisson_log_likelihood(Eigen::VectorXd::Zero(1), std::vector<int>{0}) == doctest::Approx(-1.0));
  CHECK(poisson_log_likelihood(Eigen::VectorXd::Zero(1), std::vector<int>{1}) == doctest::Approx(-1.0));
  CHECK(poisson_log_likelihood(Eigen::VectorXd::Zero(2), std::vector<int>{2, 0}) ==
        doctest::Approx(-2.0 - std::log(2.0)).epsilon(1e-14));
  Eigen::VectorXd big(1);
  big << 800.0;
  CHECK_THROWS_AS(poisson_log_likelihood(big, std::vector<int>{1}), Error);
}

TEST_CASE("log-likelihood is unimodal in each rate") {
  const std::vector<int> y = {3, 0, 7};
  Eigen::VectorXd eta(3);
  eta << std::log(3.0), -1.0, std::log(7.0);
  double prev = poisson_log_likelihood(eta, y);
  for (int k = 1; k <= 20; ++k) {
    eta(0) = std::log(3.0) + 0.1 * k;
    const double ll = poisson_log_likelihood(eta, y);
    CHECK(ll < prev);
    prev = ll;
  }
}

TEST_CASE("log_likelihood uses X* beta* + W") {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, -1.0;
  const auto d = tiny_dataset({1, 1}, {2, 0}, x);
  ParameterState s;
  s.beta_star = Eigen::VectorXd::Constant(1, 0.5);
  s.W = Eigen::Vector2d(-0.5, 0.5);
  CHECK(log_likelihood(s, d) == doctest::Approx(-2.0 - std::log(2.0)));
}

TEST_CASE("marginal moments") {
  const Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(2, 2);
  const auto pure = marginal_moments(Eigen::Vector2d(0.3, -0.2), 0.0, rho);
  CHECK(pure.mean(0) == doctest::Approx(std::exp(0.3)));
  CHECK(pure.cov(0, 0) == doctest::Approx(pure.mean(0)));
  CHECK(pure.cov(0, 1) == 0.0);

  const auto m = marginal_moments(Eigen::VectorXd::Zero(1), 2.0 * std::log(2.0), Eigen::MatrixXd::Identity(1, 1));
  CHECK(m.mean(0) == doctest::Approx(2.0));
  CHECK(m.cov(0, 0) == doctest::Approx(14.0));

  Eigen::MatrixXd r(3, 3);
  r << 1, 0.4, 0.1, 0.4, 1, 0.2, 0.1, 0.2, 1;
  const Eigen::Vector3d mu(0.1, 0.5, -0.3);
  const auto g = marginal_moments(mu, 0.7, r);
  CHECK((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 3; ++i) {
    const double a = std::exp(mu(i) + 0.35);
    CHECK(g.cov(i, i) == doctest::Approx(a + a * a * std::expm1(0.7)));
  }
}

TEST_CASE("marginal moments against Monte Carlo") {
  Rng rng(17);
  const double s2 = 2.0 * std::log(2.0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double y = rng.poisson(std::exp(rng.normal(0.0, std::sqrt(s2))));
    sum += y;
    sum2 += y * y;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean - 2.0) < 3.0 * std::sqrt(14.0 / n));
  // loose: the fourth moment of Y is large
  CHECK(std::abs(var - 14.0) / 14.0 < 0.1);
}

TEST_CASE("temporal covariance") {
  const std::vector<int> j = {5, 8, 20};
  CHECK(temporal_cov(0.5, std::nullopt, j).isApprox(0.5 * Eigen::MatrixXd::Identity(3, 3), 0.0));
  const auto c = temporal_cov(0.5, 3.0, j);
  CHECK(c(1, 1) == 0.5);
  CHECK(c(0, 1) == doctest::Approx(0.5 * std::exp(-1.0)));
  CHECK(c(0, 2) == doctest::Approx(0.5 * std::exp(-5.0)));
}

TEST_CASE("temporal design") {
  const auto two = temporal_design(tiny_dataset({1, 1, 2}, {0, 0, 0}));
  CHECK(two.row(0) == Eigen::RowVector2d(1, 0));
  CHECK(two.row(1) == Eigen::RowVector2d(1, 0));
  const auto d = tiny_dataset({1, 2, 1, 3, 3, 3}, {0, 1, 2, 3, 4, 5});
  const auto b = temporal_design(d);
  const Eigen::VectorXd sums = b.colwise().sum();
  const auto nt = d.day_counts();
  for (int t = 0; t < 3; ++t) CHECK(sums(t) == nt[size_t(t)]);

  const auto d3 = tiny_dataset({1, 2, 1}, {0, 0, 0});
  const Eigen::VectorXd bg = temporal_design(d3) * Eigen::Vector2d(1.5, -2.0);
  CHECK(bg == Eigen::Vector3d(1.5, -2.0, 1.5));
}

TEST_CASE("prior components") {
  CHECK(log_pareto_density(1.0, {}) == doctest::Approx(std::log(2.0)));
  CHECK(log_pareto_density(0.5, {}) == -std::numeric_limits<double>::infinity());
  const GammaPrior g{1.0, 1.0};
  const double with_angle = log_correlation_prior(GeomAniso{1.0, {std::numbers::pi / 2, 1.0}}, g, g, {});
  CHECK(with_angle - log_gamma_density(1.0, g) - std::log(2.0) == doctest::Approx(-std::log(std::numbers::pi)));
  CHECK(log_correlation_prior(GeomAniso{1.0, {1.0, 0.5}}, g, g, {}) == -std::numeric_limits<double>::infinity());
  CHECK(log_inv_gamma_density(-1.0, {}) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("pareto tail probability by quadrature") {
  // P(psi_R > 2) = integral of the density over [2, inf); substitute u = 1/x.
  const int m = 20000;
  double p = 0.0;
  for (int k = 0; k < m; ++k) {
    const double u = 0.5 * (k + 0.5) / m;
    const double x = 1.0 / u;
    p += std::exp(log_pareto_density(x, {})) * x * x * (0.5 / m);
  }
  CHECK(p == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("range-based gamma rate") {
  const double rate = range_gamma_rate(1.0, 600.0, 0.99);
  CHECK(1.0 - std::exp(-rate * 100.0) == doctest::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("reconstruction identity") {
  Rng rng(3);
  Eigen::MatrixXd x(5, 2);
  for (int i = 0; i < 10; ++i) x(i % 5, i / 5) = rng.normal();
  const auto d = tiny_dataset({1, 2, 2, 3, 1}, {1, 2, 3, 4, 5}, x);
  ParameterState s;
  s.beta0 = 0.7;
  s.beta_star = Eigen::Vector2d(0.2, -0.4);
  s.gamma = Eigen::Vector3d(0.1, -0.3, 0.05);
  s.W = Eigen::VectorXd::NullaryExpr(5, [&] { return rng.normal(); });
  const Eigen::VectorXd z = latent_spatial(s, d);
  const Eigen::VectorXd eta = x * s.beta_star + Eigen::VectorXd::Constant(5, s.beta0) + temporal_design(d) * s.gamma + z;
  CHECK((eta - linear_predictor(s, d)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("model lattice") {
  CHECK(structure_name(model_config(ModelId::M0)) == "None");
  CHECK(model_config(ModelId::M9).domain == DomainKind::ByShore);
  CHECK(model_config(ModelId::M9).corr == CorrKind::GeomAniso);
  CHECK(model_config(ModelId::M5).projection == CircleProjection::M5);
  CHECK(model_config(ModelId::M6, true).corr == CorrKind::CircleArc);
  CHECK(parse_model_id("M10") == ModelId::M10);
  CHECK_THROWS_AS(parse_model_id("M11"), Error);
}

TEST_CASE("projection of the fixed-effect design") {
  Eigen::MatrixXd x(2, 1);
  x << 1, 1;
  Eigen::Matrix2d expect;
  expect << 0.5, -0.5, -0.5, 0.5;
  CHECK((residual_projection(x) - expect).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::MatrixXd dup(3, 2);
  dup << 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(residual_projection(dup), Error);
}

}
