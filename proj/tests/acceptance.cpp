// Acceptance run: one PASS/FAIL line per criterion.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <CLI11.hpp>
#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include "plnspatial/config.hpp"
#include "plnspatial/confounding.hpp"
#include "plnspatial/design.hpp"
#include "plnspatial/evaluation.hpp"
#include "plnspatial/io.hpp"
#include "plnspatial/parallel.hpp"
#include "plnspatial/sampler.hpp"

using namespace plnspatial;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ChainConfig chain(int iters, int burn, int thin, int chains, std::uint64_t seed) {
  ChainConfig c;
  c.n_iter = iters;
  c.burn_in = burn;
  c.thin = thin;
  c.n_chains = chains;
  c.seed = seed;
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

int block_index(const ModelConfig& m, const Dataset& d, const std::string& label) {
  const auto layout = make_layout(m, d);
  for (size_t b = 0; b < layout.blocks.size(); ++b)
    if (layout.blocks[b].label == label) return static_cast<int>(b);
  return -1;
}

double decay_length(const CorrelationSpec& c) {
  const auto info = hyperparameters(c);
  const auto vals = get_hyperparameters(c);
  for (size_t k = 0; k < info.size(); ++k)
    if (info[k].name == "phi") return vals[k];
  return NAN;
}

struct Synthetic {
  Dataset data;
  ParameterState truth;
};

Synthetic synthesize(const ModelConfig& m, const DesignSpec& ds, const TruthSpec& ts, std::uint64_t seed) {
  Rng g(seed);
  const auto locs = generate_locations(ds, g);
  const Eigen::MatrixXd x = generate_covariates(CovariateSpec{}, locs, g);
  const auto skeleton = make_dataset(locs, std::vector<int>(locs.size(), 0), x, true);
  auto sim = generate_dataset(m, make_truth(ts, m, skeleton), locs, x, g);
  return {std::move(sim.data), std::move(sim.truth)};
}

// ---------------------------------------------------------------------------

Outcome dic_identity() {
  struct Row {
    const char* model;
    double dbar, pd, dic;
  };
  const Row rows[] = {{"M0", 1591.7, 36.6, 1628.2}, {"M1", 905.0, 133.6, 1038.6}, {"M2", 906.9, 127.2, 1034.1},
                      {"M3", 906.2, 127.2, 1033.4}, {"M4", 902.9, 128.4, 1031.3}, {"M5", 910.1, 131.0, 1041.0},
                      {"M6", 918.5, 133.1, 1051.6}, {"M7", 909.0, 133.4, 1042.4}, {"M8", 899.3, 126.5, 1025.8},
                      {"M9", 897.3, 125.1, 1022.4}, {"M10", 900.8, 129.1, 1029.9}};
  double worst = 0.0;
  std::string at;
  int bad = 0;
  for (const auto& r : rows) {
    const double devs[] = {r.dbar};
    const double diff = std::abs(dic(devs, r.dbar - r.pd).dic - r.dic);
    // 1e-9 absorbs binary rounding of the one-decimal values
    if (diff > 0.1 + 1e-9) ++bad;
    if (diff > worst) worst = diff, at = r.model;
  }
  return {bad == 0, fmt("11 rows, max |Dbar + pD - DIC| = %.2f (%s)", worst, at.c_str())};
}

Outcome nesting() {
  Rng g(11);
  const auto locs = generate_locations(DesignSpec{}, g);
  auto cov = [&](CorrelationSpec c) {
    return build_covariance(ByShoreDomain{{c, 0.7}, {c, 0.4}}, locs).in_input_order();
  };
  const double phi = 650.0;
  const Eigen::MatrixXd m8 = cov(Isotropic{phi});
  const double e9 = (cov(GeomAniso{phi, {0.0, 1.0}}) - m8).cwiseAbs().maxCoeff();
  const double e10 = (cov(CovariateInCorr{phi, 1e12}) - m8).cwiseAbs().maxCoeff();
  const Eigen::MatrixXd m7 = cov(Independence{});
  const double e7 = (cov(Isotropic{1e-12}) - m7).cwiseAbs().maxCoeff();
  const bool diag = (m7 - Eigen::MatrixXd(m7.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  return {e9 <= 1e-12 && e10 <= 1e-9 && e7 <= 1e-9 && diag,
          fmt("M9->M8 %.1e, M10->M8 %.1e, M8->M7 %.1e (n = %d)", e9, e10, e7, int(locs.size()))};
}

// Gauss-Hermite nodes and weights for weight exp(-x^2), Golub-Welsch.
void gauss_hermite(int m, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  x.resize(size_t(m));
  w.resize(size_t(m));
  for (int k = 0; k < m; ++k) {
    x[size_t(k)] = es.eigenvalues()(k);
    w[size_t(k)] = std::sqrt(kPi) * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  }
}

// log p(y | beta1, sigma2) with beta0 ~ N(0, v) and W integrated out.
struct MarginalLikelihood {
  Eigen::VectorXd x;
  std::vector<int> y;
  Eigen::MatrixXd R;
  double v;
  std::vector<Eigen::VectorXd> nodes;
  std::vector<double> log_weights;

  MarginalLikelihood(Eigen::VectorXd x_, std::vector<int> y_, Eigen::MatrixXd R_, double v_, int m)
      : x(std::move(x_)), y(std::move(y_)), R(std::move(R_)), v(v_) {
    std::vector<double> gx, gw;
    gauss_hermite(m, gx, gw);
    const int d = int(x.size());
    std::vector<int> idx(size_t(d), 0);
    while (true) {
      Eigen::VectorXd z(d);
      double lw = 0.0;
      for (int a = 0; a < d; ++a) {
        z(a) = gx[size_t(idx[size_t(a)])];
        lw += std::log(gw[size_t(idx[size_t(a)])]) + z(a) * z(a);
      }
      nodes.push_back(z);
      log_weights.push_back(lw);
      int a = 0;
      while (a < d && ++idx[size_t(a)] == m) idx[size_t(a++)] = 0;
      if (a == d) break;
    }
  }

  double operator()(double beta1, double sigma2) const {
    const int d = int(x.size());
    const Eigen::MatrixXd S = sigma2 * R + v * Eigen::MatrixXd::Ones(d, d);
    Eigen::LLT<Eigen::MatrixXd> sl(S);
    const Eigen::MatrixXd Si = sl.solve(Eigen::MatrixXd::Identity(d, d));
    const double logdet_S = 2.0 * Eigen::MatrixXd(sl.matrixL()).diagonal().array().log().sum();
    auto g = [&](const Eigen::VectorXd& w) {
      double s = -0.5 * w.dot(Si * w);
      for (int i = 0; i < d; ++i) {
        const double eta = x(i) * beta1 + w(i);
        s += y[size_t(i)] * eta - std::exp(eta);
      }
      return s;
    };
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) w(i) = std::log(y[size_t(i)] + 0.5) - x(i) * beta1;
    Eigen::MatrixXd negH;
    for (int it = 0; it < 100; ++it) {
      Eigen::VectorXd lam(d);
      for (int i = 0; i < d; ++i) lam(i) = std::exp(x(i) * beta1 + w(i));
      Eigen::VectorXd grad = -Si * w;
      for (int i = 0; i < d; ++i) grad(i) += y[size_t(i)] - lam(i);
      negH = Si;
      negH.diagonal() += lam;
      const Eigen::VectorXd step = negH.llt().solve(grad);
      w += step;
      if (step.cwiseAbs().maxCoeff() < 1e-12) break;
    }
    Eigen::VectorXd lam(d);
    for (int i = 0; i < d; ++i) lam(i) = std::exp(x(i) * beta1 + w(i));
    negH = Si;
    negH.diagonal() += lam;
    const Eigen::MatrixXd L = negH.llt().solve(Eigen::MatrixXd::Identity(d, d)).llt().matrixL();
    const double g0 = g(w);
    double sum = 0.0;
    for (size_t k = 0; k < nodes.size(); ++k)
      sum += std::exp(log_weights[k] + g(w + std::sqrt(2.0) * L * nodes[k]) - g0);
    double lfact = 0.0;
    for (int c : y) lfact += std::lgamma(c + 1.0);
    return g0 + std::log(sum) + 0.5 * d * std::log(2.0) + L.diagonal().array().log().sum() -
           0.5 * (logdet_S + d * std::log(2 * kPi)) - lfact;
  }
};

Outcome posterior_oracle() {
  // four sites on two days, one covariate; gamma, tau2 and the decay held fixed
  std::vector<Location> locs;
  const double east[] = {0, 120, 260, 400}, north[] = {0, 60, -40, 30};
  for (int i = 0; i < 4; ++i) {
    Location l;
    l.id = i + 1;
    l.easting = east[i];
    l.northing = north[i];
    l.shore = i % 2 ? Shore::South : Shore::North;
    l.day_index = 1 + i / 2;
    l.julian_day = 5 + 4 * (i / 2);
    locs.push_back(l);
  }
  const std::vector<int> y = {2, 6, 1, 9};
  Eigen::MatrixXd xc(4, 1);
  xc << -1.1, 0.2, -0.4, 1.3;
  const Dataset d = make_dataset(locs, y, xc, false);
  const auto model = model_config(ModelId::M2);
  const double phi = 150.0;
  const auto layout = make_layout(model, d);
  const auto priors = resolve_priors(Hyperpriors{}, model, d, layout);

  Eigen::MatrixXd R(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) R(a, b) = std::exp(-std::hypot(east[a] - east[b], north[a] - north[b]) / phi);
  const MarginalLikelihood ml(xc.col(0), y, R, priors.beta_prior_var, 10);
  auto log_post = [&](double b1, double u) {
    const double s2 = std::exp(u);
    return ml(b1, s2) - 0.5 * b1 * b1 / priors.beta_prior_var - (priors.sigma2.shape + 1) * u -
           priors.sigma2.scale / s2 + u;
  };
  // coarse pass to find the support, then a fine grid over it
  double b_lo = -25, b_hi = 25, u_lo = -12, u_hi = 10;
  {
    const int m = 41;
    std::vector<double> lp(size_t(m * m));
    double mx = -INFINITY;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        lp[size_t(i * m + j)] = log_post(b_lo + (b_hi - b_lo) * i / (m - 1), u_lo + (u_hi - u_lo) * j / (m - 1));
        mx = std::max(mx, lp[size_t(i * m + j)]);
      }
    int i0 = m, i1 = -1, j0 = m, j1 = -1;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (lp[size_t(i * m + j)] > mx - 30) i0 = std::min(i0, i), i1 = std::max(i1, i), j0 = std::min(j0, j), j1 = std::max(j1, j);
    const double db = (b_hi - b_lo) / (m - 1), du = (u_hi - u_lo) / (m - 1);
    const double nb_lo = b_lo + (i0 - 1) * db, nb_hi = b_lo + (i1 + 1) * db;
    const double nu_lo = u_lo + (j0 - 1) * du, nu_hi = u_lo + (j1 + 1) * du;
    b_lo = nb_lo, b_hi = nb_hi, u_lo = nu_lo, u_hi = nu_hi;
  }
  // a thin ridge at large sigma2 follows the beta1 prior, hence the wide box
  const int nb = 301, mu = 141;
  std::vector<double> lp(size_t(nb * mu));
  double mx = -INFINITY;
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < mu; ++j) {
      lp[size_t(i * mu + j)] = log_post(b_lo + (b_hi - b_lo) * i / (nb - 1), u_lo + (u_hi - u_lo) * j / (mu - 1));
      mx = std::max(mx, lp[size_t(i * mu + j)]);
    }
  double z = 0, eb = 0, es = 0, edge = -INFINITY;
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < mu; ++j) {
      const double b1 = b_lo + (b_hi - b_lo) * i / (nb - 1), u = u_lo + (u_hi - u_lo) * j / (mu - 1);
      const bool bi = i == 0 || i == nb - 1, bj = j == 0 || j == mu - 1;
      const double wt = std::exp(lp[size_t(i * mu + j)] - mx) * (bi ? 0.5 : 1) * (bj ? 0.5 : 1);
      z += wt;
      eb += wt * b1;
      es += wt * std::exp(u);
      if (bi || bj) edge = std::max(edge, lp[size_t(i * mu + j)] - mx);
    }
  const double oracle_b = eb / z, oracle_s = es / z;

  SamplerOptions opt;
  ParameterState init;
  init.beta0 = std::log(4.5);
  init.beta_star = Eigen::VectorXd::Zero(1);
  init.gamma = Eigen::VectorXd::Zero(d.n_days);
  init.W = Eigen::VectorXd::Constant(4, init.beta0);
  init.sigma2 = {0.5};
  init.tau2 = 0.1;
  init.corr = {Isotropic{phi}};
  opt.initial = init;
  opt.fixed.gamma = opt.fixed.tau2 = opt.fixed.corr = true;
  const auto sample = run_chains(chain(120000, 20000, 10, 4, 31), model, d, opt);
  const auto table = parameter_table(sample, d, false);
  auto col = [&](const std::string& name) {
    return int(std::find(table.names.begin(), table.names.end(), name) - table.names.begin());
  };
  auto check = [&](int c, double truth, double& mean, double& mcse, double& ess) {
    const auto ch = chains_of(table, c);
    ess = effective_sample_size(ch);
    mean = table.values.col(c).mean();
    const double sd = std::sqrt((table.values.col(c).array() - mean).square().sum() / double(table.values.rows() - 1));
    mcse = sd / std::sqrt(ess);
    return std::abs(mean - truth) <= 3 * mcse && ess > 500;
  };
  double mb, sb, eb_, ms, ss, es_;
  const bool ok_b = check(col("beta1"), oracle_b, mb, sb, eb_);
  const bool ok_s = check(col("sigma2"), oracle_s, ms, ss, es_);
  return {ok_b && ok_s && edge < -15,
          fmt("beta1 %.4f vs %.4f (MCSE %.4f, ESS %.0f); sigma2 %.4f vs %.4f (MCSE %.4f, ESS %.0f); grid edge %.1f", mb, oracle_b,
              sb, eb_, ms, oracle_s, ss, es_, edge)};
}

Outcome moments() {
  const Eigen::Vector3d mu(0.5, 1.0, 1.5);
  const double s2 = 0.3;
  Eigen::Matrix3d rho;
  rho << 1.0, 0.6, 0.2, 0.6, 1.0, 0.45, 0.2, 0.45, 1.0;
  const auto mm = marginal_moments(mu, s2, rho);
  // closed forms written out independently
  double lib_err = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double ea = std::exp(mu(a) + s2 / 2);
    lib_err = std::max(lib_err, std::abs(mm.mean(a) - ea) / ea);
    for (int b = 0; b < 3; ++b) {
      const double eb = std::exp(mu(b) + s2 / 2);
      const double c = (a == b ? ea : 0.0) + ea * eb * std::expm1(s2 * rho(a, b));
      lib_err = std::max(lib_err, std::abs(mm.cov(a, b) - c) / c);
    }
  }
  const Eigen::Matrix3d L = (s2 * rho).llt().matrixL();
  Rng g(41);
  const int N = 1000000;
  Eigen::MatrixXd y(N, 3);
  for (int r = 0; r < N; ++r) {
    const Eigen::Vector3d z(g.normal(), g.normal(), g.normal());
    const Eigen::Vector3d l = mu + L * z;
    for (int a = 0; a < 3; ++a) y(r, a) = g.poisson(std::exp(l(a)));
  }
  const Eigen::RowVector3d mean = y.colwise().mean();
  const Eigen::MatrixXd c = y.rowwise() - mean;
  double worst = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double se_m = std::sqrt(c.col(a).squaredNorm() / (N - 1) / N);
    worst = std::max(worst, std::abs(mean(a) - mm.mean(a)) / se_m);
    for (int b = a; b < 3; ++b) {
      const Eigen::ArrayXd prod = c.col(a).array() * c.col(b).array();
      const double cab = prod.sum() / (N - 1);
      const double se_c = std::sqrt((prod - prod.mean()).square().sum() / (N - 1) / N);
      worst = std::max(worst, std::abs(cab - mm.cov(a, b)) / se_c);
    }
  }
  return {lib_err < 1e-12 && worst <= 3.0,
          fmt("10^6 draws: max |MC - closed form| = %.2f SE over 3 means, 6 (co)variances", worst)};
}

struct RecoveryResult {
  std::vector<int> covered;  // per coefficient
  int phi_ok = 0;
  int reps = 0;
  double w_min = 1.0, w_max = 0.0;
  int w_out = 0, w_total = 0;
};

RecoveryResult recovery_runs;
bool recovery_done = false;

void run_recovery() {
  if (recovery_done) return;
  const auto model = model_config(ModelId::M9);
  TruthSpec ts;
  ts.psi_A = 3 * kPi / 4;
  ts.psi_R = 3.0;
  const int reps = 50;
  RecoveryResult res;
  res.reps = reps;
  res.covered.assign(5, 0);
  std::mutex mu;
  parallel_for(size_t(reps), [&](size_t r) {
    const auto syn = synthesize(model, DesignSpec{}, ts, mix_seed(500, r));
    const auto s = run_chains(chain(10000, 4000, 6, 2, mix_seed(600, r)), model, syn.data);
    const Eigen::MatrixXd coef = coefficient_draws(s);
    std::vector<int> cov(size_t(coef.cols()), 0);
    for (Eigen::Index k = 0; k < coef.cols(); ++k) {
      const double truth = k == 0 ? syn.truth.beta0 : syn.truth.beta_star(k - 1);
      cov[size_t(k)] = summarize(coef.col(k).eval()).covers(truth) ? 1 : 0;
    }
    const int bn = block_index(model, syn.data, "N");
    std::vector<double> phis;
    for (const auto& st : s.draws) phis.push_back(decay_length(st.corr[size_t(bn)]));
    const double truth_phi = decay_length(syn.truth.corr[size_t(bn)]);
    const double med = median(phis);
    const bool phi_ok = med >= truth_phi / 2 && med <= truth_phi * 2;
    std::lock_guard lock(mu);
    for (size_t k = 0; k < cov.size(); ++k) res.covered[k] += cov[k];
    res.phi_ok += phi_ok ? 1 : 0;
    for (const auto& a : s.acceptance)
      for (double w : a.W) {
        res.w_min = std::min(res.w_min, w);
        res.w_max = std::max(res.w_max, w);
        res.w_out += (w < 0.3 || w > 0.6) ? 1 : 0;
        ++res.w_total;
      }
    std::fprintf(stderr, "  recovery rep %zu: phi_N median %.0f (truth %.0f)\n", r + 1, med, truth_phi);
  });
  recovery_runs = res;
  recovery_done = true;
}

Outcome recovery() {
  run_recovery();
  const auto& r = recovery_runs;
  bool ok = true;
  std::string cov;
  for (size_t k = 0; k < r.covered.size(); ++k) {
    const double c = double(r.covered[k]) / r.reps;
    ok = ok && c >= 0.85 && c <= 1.0;
    cov += fmt("%sbeta%zu %.2f", k ? ", " : "", k, c);
  }
  const double phi_frac = double(r.phi_ok) / r.reps;
  ok = ok && phi_frac >= 0.6;
  return {ok, fmt("%d reps; coverage %s; phi_N within 2x in %.0f%%", r.reps, cov.c_str(), 100 * phi_frac)};
}

Outcome w_acceptance() {
  run_recovery();
  const auto& r = recovery_runs;
  return {r.w_out == 0, fmt("%d site rates over %d fits: range [%.3f, %.3f], %d outside [0.3, 0.6]", r.w_total,
                            r.reps, r.w_min, r.w_max, r.w_out)};
}

Outcome propriety() {
  int bad = 0, cases = 0;
  for (double truth : {0.2, 0.8, 2.5, 7.0, 20.0, 55.0}) {
    std::vector<double> pt;
    for (int k = 0; k < 2000; ++k) {
      pt.push_back(poisson_pmf(k, truth));
      if (k > truth && pt.back() < 1e-18) break;
    }
    const double step = 0.01 * truth;
    double best[3] = {INFINITY, INFINITY, INFINITY}, arg[3] = {0, 0, 0};
    for (int gi = -50; gi <= 50; ++gi) {
      const double lam = truth + gi * step;
      const double one[] = {lam};
      const auto pf = predictive(one);
      double e[3] = {0, 0, 0};
      for (size_t y = 0; y < pt.size(); ++y) {
        e[0] += pt[y] * rps(pf.pmf, int(y));
        e[1] += pt[y] * log_score(pf.pmf, int(y)).value;
        e[2] += pt[y] * dss(pf.mean, pf.sd, int(y));
      }
      for (int s = 0; s < 3; ++s)
        if (e[s] < best[s]) best[s] = e[s], arg[s] = lam;
    }
    for (int s = 0; s < 3; ++s) {
      ++cases;
      if (std::abs(arg[s] - truth) > step * 1.0001) ++bad;
    }
  }
  return {bad == 0, fmt("%d of %d (truth, score) pairs minimised within one grid step (1%% of lambda)", cases - bad, cases)};
}

Outcome ranking() {
  const auto m8 = model_config(ModelId::M8), m0 = model_config(ModelId::M0);
  const int reps = 20;
  int wins[4] = {0, 0, 0, 0}, all = 0;
  std::mutex mu;
  parallel_for(size_t(reps), [&](size_t r) {
    const auto syn = synthesize(m8, DesignSpec{}, TruthSpec{}, mix_seed(700, r));
    const auto cfg = chain(10000, 4000, 6, 2, mix_seed(800, r));
    const auto a = score_model(run_chains(cfg, m8, syn.data), syn.data);
    const auto b = score_model(run_chains(cfg, m0, syn.data), syn.data);
    const bool w[4] = {a.dic < b.dic, a.rps < b.rps, a.logs < b.logs, a.dss < b.dss};
    std::lock_guard lock(mu);
    for (int k = 0; k < 4; ++k) wins[k] += w[k];
    all += (w[0] && w[1] && w[2] && w[3]) ? 1 : 0;
    std::fprintf(stderr, "  ranking rep %zu: DIC %.1f vs %.1f\n", r + 1, a.dic, b.dic);
  });
  const bool ok = std::all_of(wins, wins + 4, [&](int w) { return w >= 18; });
  return {ok, fmt("M8 beats M0 in %d/%d (DIC), %d (RPS), %d (LogS), %d (DSS); all four in %d", wins[0], reps,
                  wins[1], wins[2], wins[3], all)};
}

Outcome confounding() {
  StudyConfig sc = default_study_config();
  sc.n_reps = 30;
  sc.seed = 900;
  const auto rows = misspecification_study(Generator::SGLM, sc);
  bool rsr_low = false, others_ok = true;
  double w_sglm = 0, w_rsr = 0;
  int n_sglm = 0, n_rsr = 0;
  std::string detail;
  for (const auto& r : rows) {
    detail += fmt("%s/%s %.2f; ", to_string(r.fitter).c_str(), r.coefficient.c_str(), r.coverage);
    if (r.fitter == Fitter::RSR) {
      rsr_low = rsr_low || r.coverage < 0.95;
      w_rsr += r.mean_width, ++n_rsr;
    } else {
      others_ok = others_ok && r.coverage >= 0.85 && r.coverage <= 1.0;
      if (r.fitter == Fitter::SGLM) w_sglm += r.mean_width, ++n_sglm;
    }
  }
  w_rsr /= n_rsr;
  w_sglm /= n_sglm;
  return {rsr_low && others_ok && w_rsr < w_sglm,
          detail + fmt("mean width RSR %.3f vs SGLM %.3f", w_rsr, w_sglm)};
}

Outcome anisotropy() {
  const auto model = model_config(ModelId::M9);
  // sites must spread across each shore, not only along it, for direction to be identified
  DesignSpec ds;
  ds.band_width = 0.5;
  TruthSpec ts;
  ts.psi_A = 3 * kPi / 4;
  ts.psi_R = 4.0;
  ts.phi = 1000.0;
  ts.sigma2 = 1.0;
  const auto syn = synthesize(model, ds, ts, 1001);
  const auto s = run_chains(chain(10000, 4000, 6, 2, 1002), model, syn.data);
  AnisotropyOptions o;
  o.n_bins = 5;
  const auto bins = anisotropy_summary(s, syn.data, o);
  const int pk = peak_bin(bins);
  const double target = acute_angle(ts.psi_A);
  std::string detail;
  for (const auto& b : bins) detail += fmt("[%.0f,%.0f) %.3f; ", b.lower * 180 / kPi, b.upper * 180 / kPi, b.value);
  const bool ok = pk >= 0 && bins[size_t(pk)].lower <= target && target < bins[size_t(pk)].upper;
  return {ok, detail + fmt("peak bin %d, target %.0f deg", pk, target * 180 / kPi)};
}

Outcome geometry_suite() {
  doctest::Context ctx;
  ctx.setOption("test-suite", "geometry,covariance");
  ctx.setOption("minimal", true);
  const int rc = ctx.run();
  return {rc == 0, rc == 0 ? "geometry and covariance suites pass" : "unit failures, see above"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string report;
  app.add_option("--only", only, "criteria to run (1-11)")->delimiter(',');
  app.add_option("--report", report, "also write the result lines here");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"DIC identity", dic_identity},
      {"nesting identities", nesting},
      {"posterior oracle (n = 4, M2)", posterior_oracle},
      {"Poisson-lognormal moments", moments},
      {"simulation recovery (M9)", recovery},
      {"scoring-rule propriety", propriety},
      {"model ranking M8 vs M0", ranking},
      {"confounding study", confounding},
      {"anisotropy retrieval", anisotropy},
      {"adaptive W acceptance", w_acceptance},
      {"geometry unit suite", geometry_suite},
  };
  std::set<int> want(only.begin(), only.end());
  std::ostringstream lines;
  int failed = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!want.empty() && !want.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string line =
        fmt("%s [%2d] %s: ", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str()) + o.detail + fmt(" (%.0f s)", secs);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines << line << "\n";
    failed += o.pass ? 0 : 1;
  }
  if (!report.empty()) std::ofstream(report) << lines.str();
  return failed == 0 ? 0 : 1;
}
