#include "plnspatial/confounding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "plnspatial/error.hpp"
#include "plnspatial/parallel.hpp"

namespace plnspatial {

ProjectionOperator projection(const Eigen::MatrixXd& x) {
  ProjectionOperator p;
  p.p_perp = residual_projection(x);
  p.rank = static_cast<int>(x.rows() - x.cols());
  return p;
}

PosteriorSample fit_rsr(const ChainConfig& config, ModelConfig model, const Dataset& data,
                        const SamplerOptions& options) {
  if (!model.spatial()) throw Error(ErrorKind::InvalidArgument, "restricted regression needs a spatial model");
  model.restricted = true;
  return run_chains(config, model, data, options);
}

Eigen::MatrixXd coefficient_draws(const PosteriorSample& sample) {
  if (sample.draws.empty()) return {};
  const auto k = sample.draws.front().beta_star.size() + 1;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(sample.draws.size()), k);
  for (size_t m = 0; m < sample.draws.size(); ++m) {
    const auto row = static_cast<Eigen::Index>(m);
    out(row, 0) = sample.draws[m].beta0;
    out.row(row).tail(k - 1) = sample.draws[m].beta_star.transpose();
  }
  return out;
}

Eigen::MatrixXd rsr_ppd(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
  if (alpha.cols() != x.cols() || z.rows() != x.rows() || z.cols() != alpha.rows()) {
    throw Error(ErrorKind::InvalidArgument, "dimension mismatch in RSR-PPD inputs");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) throw Error(ErrorKind::RankDeficientDesign, "design is rank deficient");
  // (X'X)^-1 X' Z is the least-squares fit of every Z draw on X
  const Eigen::MatrixXd shift = qr.solve(z);  // K x draws
  return alpha - shift.transpose();
}

Eigen::MatrixXd rsr_ppd(const PosteriorSample& rsr, const Dataset& data) {
  Eigen::MatrixXd z(data.n(), static_cast<Eigen::Index>(rsr.draws.size()));
  for (size_t m = 0; m < rsr.draws.size(); ++m) z.col(static_cast<Eigen::Index>(m)) = latent_spatial(rsr.draws[m], data);
  return rsr_ppd(coefficient_draws(rsr), fixed_effect_design(data), z);
}

IntervalSummary summarize(std::span<const double> draws, double level) {
  if (draws.empty()) throw Error(ErrorKind::InvalidArgument, "no draws to summarise");
  std::vector<double> v(draws.begin(), draws.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  IntervalSummary s;
  double sum = 0.0;
  for (double d : v) sum += d;
  s.mean = sum / static_cast<double>(v.size());
  s.lower = quantile((1.0 - level) / 2.0);
  s.upper = quantile(1.0 - (1.0 - level) / 2.0);
  return s;
}

IntervalSummary summarize(const Eigen::VectorXd& draws, double level) {
  return summarize(std::span<const double>(draws.data(), static_cast<size_t>(draws.size())), level);
}

std::vector<ConfoundingRow> confounding_report(const PosteriorSample& sglm, const PosteriorSample& rsr,
                                               const Dataset& data) {
  const Eigen::MatrixXd beta = coefficient_draws(sglm);
  const Eigen::MatrixXd alpha = coefficient_draws(rsr);
  const Eigen::MatrixXd tilde = rsr_ppd(rsr, data);
  std::vector<ConfoundingRow> rows;
  for (Eigen::Index k = 1; k < beta.cols(); ++k) {
    rows.push_back({"beta" + std::to_string(k), summarize(Eigen::VectorXd(beta.col(k))),
                    summarize(Eigen::VectorXd(alpha.col(k))), summarize(Eigen::VectorXd(tilde.col(k)))});
  }
  return rows;
}

std::string to_string(Generator g) { return g == Generator::SGLM ? "SGLM" : "RSR"; }

std::string to_string(Fitter f) {
  switch (f) {
    case Fitter::SGLM: return "SGLM";
    case Fitter::RSR: return "RSR";
    case Fitter::RSR_PPD: return "RSR-PPD";
  }
  return "SGLM";
}

StudyConfig default_study_config() {
  StudyConfig c;
  c.design.n_locations = 100;
  c.design.n_days = 25;
  c.covariates.spatial_weight = 0.8;
  c.chain.n_iter = 6000;
  c.chain.burn_in = 2000;
  c.chain.thin = 4;
  c.chain.n_chains = 2;
  return c;
}

namespace {

CorrelationSpec study_correlation(const ModelConfig& m, double phi) {
  switch (m.corr) {
    case CorrKind::None:
    case CorrKind::Independence: return Independence{};
    case CorrKind::Isotropic: return Isotropic{phi};
    case CorrKind::GeomAniso: return GeomAniso{phi, {0.0, 1.0}};
    case CorrKind::CovariateInCorr: return CovariateInCorr{phi, 1e12};
    case CorrKind::CircleChord: return CircleChord{phi};
    case CorrKind::CircleArc: return CircleArc{phi};
  }
  return Independence{};
}

}  // namespace

std::vector<CoverageRow> misspecification_study(Generator generator, const StudyConfig& config) {
  if (config.n_reps < 20) throw Error(ErrorKind::InvalidArgument, "the study needs at least 20 replicates");
  const ModelConfig model = model_config(config.model);
  if (!model.spatial()) throw Error(ErrorKind::InvalidArgument, "the study needs a spatial model");
  const int p = config.covariates.count;
  constexpr int kFitters = 3;

  struct RepResult {
    std::vector<int> covered;  // fitter * p + k
    std::vector<double> width;
  };
  std::vector<RepResult> results(static_cast<size_t>(config.n_reps));

  parallel_for(static_cast<size_t>(config.n_reps), [&](size_t r) {
    Rng rng(mix_seed(config.seed, r));
    const auto locs = generate_locations(config.design, rng);
    const Eigen::MatrixXd x = generate_covariates(config.covariates, locs, rng);
    const Dataset skeleton = make_dataset(locs, std::vector<int>(locs.size(), 0), x, config.covariates.standardize);
    const SpatialLayout layout = make_layout(model, skeleton);
    const double phi = config.phi > 0.0 ? config.phi : layout.blocks.front().kernel.max_distance() / 10.0;

    ParameterState truth = default_truth(model, skeleton, study_correlation(model, phi));
    truth.beta0 = config.beta0;
    truth.tau2 = config.tau2;
    for (auto& s2 : truth.sigma2) s2 = config.sigma2;
    ModelConfig gen_model = model;
    gen_model.restricted = generator == Generator::RSR;
    const auto sim = generate_dataset(gen_model, truth, locs, x, rng);

    ChainConfig chain = config.chain;
    chain.seed = mix_seed(config.seed ^ 0x5DEECE66DULL, r);
    const auto sglm = run_chains(chain, model, sim.data, config.sampler);
    const auto rsr = fit_rsr(chain, model, sim.data, config.sampler);
    const Eigen::MatrixXd fits[kFitters] = {coefficient_draws(sglm), coefficient_draws(rsr), rsr_ppd(rsr, sim.data)};

    auto& out = results[r];
    for (int f = 0; f < kFitters; ++f) {
      for (int k = 0; k < p; ++k) {
        const auto s = summarize(Eigen::VectorXd(fits[f].col(k + 1)));
        out.covered.push_back(s.covers(truth.beta_star(k)) ? 1 : 0);
        out.width.push_back(s.width());
      }
    }
  });

  std::vector<CoverageRow> rows;
  for (int f = 0; f < kFitters; ++f) {
    for (int k = 0; k < p; ++k) {
      double cov = 0.0, width = 0.0;
      const auto idx = static_cast<size_t>(f * p + k);
      for (const auto& r : results) {
        cov += r.covered[idx];
        width += r.width[idx];
      }
      rows.push_back({generator, static_cast<Fitter>(f), "beta" + std::to_string(k + 1), cov / config.n_reps,
                      width / config.n_reps, config.n_reps});
    }
  }
  return rows;
}

}  // namespace plnspatial
