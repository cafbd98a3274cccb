#include "plnspatial/sampler.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "plnspatial/error.hpp"
#include "plnspatial/parallel.hpp"

namespace plnspatial {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Counter {
  long acc = 0, tries = 0;
  long win_acc = 0, win_tries = 0;

  void record(bool accepted) {
    ++tries;
    ++win_tries;
    if (accepted) {
      ++acc;
      ++win_acc;
    }
  }
  double rate() const { return tries > 0 ? static_cast<double>(acc) / static_cast<double>(tries) : kNaN; }
  void reset() { acc = tries = 0; }
};

struct Adaptive {
  double log_scale = 0.0;
  Counter count;

  double scale() const { return std::exp(log_scale); }
  void adapt(double target, double step) {
    if (count.win_tries > 0) {
      const double r = static_cast<double>(count.win_acc) / static_cast<double>(count.win_tries);
      log_scale += step * (r - target);
    }
    count.win_acc = count.win_tries = 0;
  }
};

struct Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double logdet = 0.0;
  double jitter = 0.0;
};

std::optional<Factor> factorize(const Eigen::MatrixXd& r) {
  try {
    auto c = cholesky_jittered(r);
    Factor f;
    f.jitter = c.jitter;
    f.logdet = 2.0 * c.llt.matrixLLT().diagonal().array().log().sum();
    f.llt = std::move(c.llt);
    if (!std::isfinite(f.logdet)) return std::nullopt;
    return f;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotPositiveDefinite) return std::nullopt;
    throw;
  }
}

Eigen::MatrixXd inverse_of(const Factor& f, Eigen::Index n) {
  Eigen::MatrixXd inv = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

// Weighted-least-squares (one Fisher-scoring step) proposal for a block of
// Poisson regression coefficients with a zero-mean Gaussian prior.
struct WlsProposal {
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double half_logdet = 0.0;
};

std::optional<WlsProposal> wls_proposal(const Eigen::MatrixXd& d, const Eigen::VectorXd& offset,
                                        const Eigen::VectorXd& y, const Eigen::MatrixXd& prior_prec,
                                        const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = d * coef + offset;
  const Eigen::VectorXd lambda = eta.array().exp().matrix();
  if (!lambda.allFinite()) return std::nullopt;
  Eigen::MatrixXd p = prior_prec;
  p.noalias() += d.transpose() * lambda.asDiagonal() * d;
  const Eigen::VectorXd g = d.transpose() * (y - lambda) - prior_prec * coef;
  WlsProposal w;
  w.llt.compute(p);
  if (w.llt.info() != Eigen::Success) return std::nullopt;
  w.mean = coef + w.llt.solve(g);
  w.half_logdet = w.llt.matrixLLT().diagonal().array().log().sum();
  if (!w.mean.allFinite() || !std::isfinite(w.half_logdet)) return std::nullopt;
  return w;
}

double log_proposal(const WlsProposal& w, const Eigen::VectorXd& x) {
  const Eigen::VectorXd u = w.llt.matrixU() * (x - w.mean);
  return w.half_logdet - 0.5 * u.squaredNorm();
}

double log_target(const Eigen::MatrixXd& d, const Eigen::VectorXd& offset, const Eigen::VectorXd& y,
                  const Eigen::MatrixXd& prior_prec, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = d * coef + offset;
  double lt = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double l = std::exp(eta(i));
    if (!std::isfinite(l)) return kNegInf;
    lt += y(i) * eta(i) - l;
  }
  return lt - 0.5 * coef.dot(prior_prec * coef);
}

// Fisher scoring from `start` to the conditional mode, with step halving.
// The proposal is the Gaussian at the mode, so it does not depend on the
// current value and the Metropolis ratio stays valid from any starting point.
std::optional<WlsProposal> mode_proposal(const Eigen::MatrixXd& d, const Eigen::VectorXd& offset,
                                         const Eigen::VectorXd& y, const Eigen::MatrixXd& prior_prec,
                                         Eigen::VectorXd x) {
  double lt = log_target(d, offset, y, prior_prec, x);
  if (lt == kNegInf) x.setZero(), lt = log_target(d, offset, y, prior_prec, x);
  for (int it = 0; it < 100; ++it) {
    const auto w = wls_proposal(d, offset, y, prior_prec, x);
    if (!w) return std::nullopt;
    Eigen::VectorXd step = w->mean - x;
    Eigen::VectorXd next = w->mean;
    double lt_next = log_target(d, offset, y, prior_prec, next);
    for (int h = 0; h < 40 && !(lt_next >= lt - 1e-12); ++h) {
      step *= 0.5;
      next = x + step;
      lt_next = log_target(d, offset, y, prior_prec, next);
    }
    if (!(lt_next >= lt - 1e-12)) break;
    x = next;
    lt = lt_next;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  auto w = wls_proposal(d, offset, y, prior_prec, x);
  if (w) w->mean = x;
  return w;
}

// One Fisher-scoring step from the current value (Gamerman), or the Gaussian
// at the conditional mode when `at_mode` is set.
bool gamerman_step(const Eigen::MatrixXd& d, const Eigen::VectorXd& offset, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& prior_prec, Eigen::VectorXd& coef, Rng& rng, bool at_mode) {
  const auto q = at_mode ? mode_proposal(d, offset, y, prior_prec, coef) : wls_proposal(d, offset, y, prior_prec, coef);
  if (!q) return false;
  Eigen::VectorXd z(coef.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  const Eigen::VectorXd prop = q->mean + q->llt.matrixU().solve(z);
  const double lt_new = log_target(d, offset, y, prior_prec, prop);
  if (lt_new == kNegInf) return false;
  double log_q_rev = 0.0;
  if (at_mode) {
    log_q_rev = log_proposal(*q, coef);
  } else {
    const auto rev = wls_proposal(d, offset, y, prior_prec, prop);
    if (!rev) return false;
    log_q_rev = log_proposal(*rev, coef);
  }
  const double log_alpha =
      lt_new - log_target(d, offset, y, prior_prec, coef) + log_q_rev - log_proposal(*q, prop);
  if (!std::isfinite(log_alpha) && log_alpha != kNegInf) return false;
  if (std::log(rng.uniform()) < log_alpha) {
    coef = prop;
    return true;
  }
  return false;
}

double block_log_prior(const CorrelationSpec& spec, const ResolvedPriors& pr, size_t b) {
  return log_correlation_prior(spec, pr.phi[b], pr.phi2[b], pr.psi_R);
}

std::string suffixed(const std::string& name, const std::string& label) {
  return label.empty() ? name : name + "_" + label;
}

}  // namespace

double reflect_half_turn(double x) {
  constexpr double pi = std::numbers::pi;
  x = std::fmod(x, 2.0 * pi);
  if (x < 0.0) x += 2.0 * pi;
  return x > pi ? 2.0 * pi - x : x;
}

void validate(const ChainConfig& c) {
  if (c.n_iter < 1) throw Error(ErrorKind::InvalidArgument, "n_iter must be positive");
  if (c.burn_in < 0 || c.burn_in >= c.n_iter) throw Error(ErrorKind::InvalidArgument, "need 0 <= burn_in < n_iter");
  if (c.thin < 1) throw Error(ErrorKind::InvalidArgument, "thin must be >= 1");
  if (c.n_chains < 1) throw Error(ErrorKind::InvalidArgument, "n_chains must be >= 1");
  if (c.adapt_window < 1) throw Error(ErrorKind::InvalidArgument, "adapt_window must be >= 1");
  if (!(c.adapt_target > 0.0 && c.adapt_target < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "adapt_target must lie in (0, 1)");
  }
}

std::vector<UpdateBlock> default_update_order() {
  return {UpdateBlock::BetaStar, UpdateBlock::W,      UpdateBlock::Beta0, UpdateBlock::Gamma,
          UpdateBlock::Sigma2,   UpdateBlock::Tau2,   UpdateBlock::Corr};
}

// ---------------------------------------------------------------------------

struct MwgSampler::Impl {
  struct Block {
    std::vector<int> sites;
    std::vector<int> days;  // 0-based day of each local site
    Eigen::MatrixXd Rinv;
    Eigen::VectorXd colsum;
    Eigen::MatrixXd G;  // B_b' Rinv B_b
    double logdet = 0.0;
    Eigen::VectorXd z;  // local spatial effect
    std::vector<HyperParamInfo> info;
    std::vector<Adaptive> hyper;
  };

  ModelConfig model;
  Dataset data;
  ResolvedPriors priors;
  ChainConfig cfg;
  SamplerOptions opt;
  SpatialLayout layout;
  Rng rng;

  bool gaussian_w = true;
  int n = 0, T = 0, p = 0;
  Eigen::VectorXd y;
  std::vector<int> day;
  std::vector<int> site_block, site_local;
  Eigen::MatrixXd B;
  Eigen::MatrixXd pperp;

  ParameterState s;
  Eigen::VectorXd eta, lambda, xb;
  Eigen::VectorXd eta_buf;
  std::vector<Block> blocks;
  Eigen::MatrixXd Rg_inv;
  double Rg_logdet = 0.0;

  std::vector<Adaptive> w_prop;
  Counter beta_star_count, joint_count;
  Adaptive phi_gamma_prop;
  int iter = 0;
  int jitter_events = 0;

  Impl(const ModelConfig& m, const Dataset& d, const ResolvedPriors& pr, const ChainConfig& c, int chain,
       const SamplerOptions& o)
      : model(m), data(d), priors(pr), cfg(c), opt(o), layout(make_layout(m, d)),
        rng(mix_seed(c.seed, static_cast<std::uint64_t>(chain))) {
    validate(data);
    gaussian_w = model.spatial() && !model.restricted;
    n = data.n();
    T = data.n_days;
    p = data.n_covariates();
    y = data.y();
    day.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) day[static_cast<size_t>(i)] = data.locations[static_cast<size_t>(i)].day_index - 1;
    B = temporal_design(data);
    if (model.restricted) pperp = residual_projector(data);
    if (priors.phi.size() < layout.blocks.size() || priors.phi2.size() < layout.blocks.size()) {
      throw Error(ErrorKind::InvalidArgument, "priors do not match the spatial layout");
    }

    site_block.assign(static_cast<size_t>(n), -1);
    site_local.assign(static_cast<size_t>(n), -1);
    for (size_t b = 0; b < layout.blocks.size(); ++b) {
      Block blk;
      blk.sites = layout.blocks[b].sites;
      for (size_t a = 0; a < blk.sites.size(); ++a) {
        const int i = blk.sites[a];
        site_block[static_cast<size_t>(i)] = static_cast<int>(b);
        site_local[static_cast<size_t>(i)] = static_cast<int>(a);
        blk.days.push_back(day[static_cast<size_t>(i)]);
      }
      blocks.push_back(std::move(blk));
    }

    ParameterState init;
    if (opt.initial) {
      init = *opt.initial;
    } else {
      init = initial_state(model, data, layout, priors, chain, rng);
    }
    set_state(init);

    for (auto& blk : blocks) {
      blk.info = hyperparameters(s.corr[static_cast<size_t>(&blk - blocks.data())]);
      blk.hyper.assign(blk.info.size(), Adaptive{});
      for (size_t k = 0; k < blk.info.size(); ++k) {
        blk.hyper[k].log_scale = std::log(blk.info[k].scale == ParamScale::HalfTurn ? 0.3 : 0.5);
      }
    }
    phi_gamma_prop.log_scale = std::log(0.5);
    w_prop.assign(static_cast<size_t>(n), Adaptive{});
    // multipliers of the local sd used in update_W
    for (auto& a : w_prop) a.log_scale = std::log(2.4);
  }

  // -- state bookkeeping ----------------------------------------------------

  void set_state(const ParameterState& st) {
    if (st.beta_star.size() != p || st.gamma.size() != T || st.W.size() != n) {
      throw Error(ErrorKind::InvalidArgument, "parameter state dimensions do not match the data");
    }
    if (st.sigma2.size() != blocks.size() || st.corr.size() != blocks.size()) {
      throw Error(ErrorKind::InvalidArgument, "parameter state does not match the spatial layout");
    }
    if (model.temporal_correlation != st.phi_gamma.has_value()) {
      throw Error(ErrorKind::InvalidArgument, "phi_gamma presence does not match the model");
    }
    s = st;
    xb = p > 0 ? Eigen::VectorXd(data.covariates * s.beta_star) : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd z = latent_spatial(s, data);
    for (size_t b = 0; b < blocks.size(); ++b) {
      auto& blk = blocks[b];
      blk.z.resize(static_cast<Eigen::Index>(blk.sites.size()));
      for (size_t a = 0; a < blk.sites.size(); ++a) blk.z(static_cast<Eigen::Index>(a)) = z(blk.sites[a]);
      const auto f = factorize(layout.blocks[b].kernel.matrix(s.corr[b]));
      if (!f) throw Error(ErrorKind::NotPositiveDefinite, "initial correlation matrix is not positive definite");
      install(blk, *f);
    }
    if (!model.spatial()) {
      // no spatial effect: W is exactly 1 beta0 + B gamma
      rebuild_w();
    }
    set_temporal();
    recompute_eta();
  }

  void install(Block& blk, const Factor& f) {
    const auto nb = static_cast<Eigen::Index>(blk.sites.size());
    blk.Rinv = inverse_of(f, nb);
    blk.logdet = f.logdet;
    if (f.jitter > 0.0) ++jitter_events;
    blk.colsum = blk.Rinv.rowwise().sum();
    // Rinv B_b aggregated by day, then B_b' (.)
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nb, T);
    for (Eigen::Index c = 0; c < nb; ++c) m.col(blk.days[static_cast<size_t>(c)]) += blk.Rinv.col(c);
    blk.G = Eigen::MatrixXd::Zero(T, T);
    for (Eigen::Index a = 0; a < nb; ++a) blk.G.row(blk.days[static_cast<size_t>(a)]) += m.row(a);
  }

  void set_temporal() {
    const Eigen::MatrixXd rg = temporal_cov(1.0, s.phi_gamma, data.julian);
    const auto f = factorize(rg);
    if (!f) throw Error(ErrorKind::NotPositiveDefinite, "temporal correlation matrix is not positive definite");
    Rg_inv = inverse_of(*f, T);
    Rg_logdet = f->logdet;
  }

  // W = 1 beta0 + B gamma + Z for the joint-step samplers.
  void rebuild_w() {
    for (int i = 0; i < n; ++i) s.W(i) = s.beta0 + s.gamma(day[static_cast<size_t>(i)]);
    for (const auto& blk : blocks) {
      for (size_t a = 0; a < blk.sites.size(); ++a) s.W(blk.sites[a]) += blk.z(static_cast<Eigen::Index>(a));
    }
  }

  void recompute_eta() {
    if (model.restricted) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
      for (const auto& blk : blocks) {
        for (size_t a = 0; a < blk.sites.size(); ++a) z(blk.sites[a]) = blk.z(static_cast<Eigen::Index>(a));
      }
      eta = pperp * z;
      for (int i = 0; i < n; ++i) eta(i) += s.beta0 + s.gamma(day[static_cast<size_t>(i)]);
      eta += xb;
    } else {
      eta = xb + s.W;
    }
    lambda = eta.array().exp().matrix();
    if (!lambda.allFinite()) {
      throw Error(ErrorKind::NonFiniteLinearPredictor, "linear predictor overflows at the current state");
    }
  }

  void shift_z_by_intercepts(double d_beta0, const Eigen::VectorXd& d_gamma) {
    for (auto& blk : blocks) {
      for (Eigen::Index a = 0; a < blk.z.size(); ++a) blk.z(a) -= d_beta0 + d_gamma(blk.days[static_cast<size_t>(a)]);
    }
  }

  // -- updates --------------------------------------------------------------

  bool update_beta_star() {
    if (p == 0 || opt.fixed.beta_star) return false;
    const Eigen::VectorXd offset = eta - xb;
    const Eigen::MatrixXd prior = Eigen::MatrixXd::Identity(p, p) / priors.beta_prior_var;
    const bool acc = gamerman_step(data.covariates, offset, y, prior, s.beta_star, rng, false);
    beta_star_count.record(acc);
    if (acc) {
      xb = data.covariates * s.beta_star;
      eta = offset + xb;
      lambda = eta.array().exp().matrix();
    }
    return acc;
  }

  int update_W() {
    if (opt.fixed.W || blocks.empty()) return 0;
    int accepted = 0;
    for (size_t b = 0; b < blocks.size(); ++b) {
      auto& blk = blocks[b];
      const double sig2 = s.sigma2[b];
      for (size_t a = 0; a < blk.sites.size(); ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const int i = blk.sites[a];
        auto& prop = w_prop[static_cast<size_t>(i)];
        const double q = blk.Rinv(ai, ai);
        const double cond_mean = blk.z(ai) - blk.Rinv.col(ai).dot(blk.z) / q;
        const double cond_var = sig2 / q;
        // relative to the current conditional prior, so the tuned multiplier
        // survives later moves of sigma2 and the correlation parameters
        const double delta = prop.scale() * rng.normal() / std::sqrt(q / sig2 + y(i) + 0.5);
        const double z_old = blk.z(ai);
        const double z_new = z_old + delta;
        double log_alpha =
            -((z_new - cond_mean) * (z_new - cond_mean) - (z_old - cond_mean) * (z_old - cond_mean)) / (2.0 * cond_var);
        if (model.restricted) {
          const auto col = pperp.col(i);
          eta_buf = eta + delta * col;
          double dl = 0.0;
          for (int j = 0; j < n; ++j) dl += y(j) * delta * col(j) - (std::exp(eta_buf(j)) - lambda(j));
          log_alpha += dl;
        } else {
          const double e_new = eta(i) + delta;
          log_alpha += y(i) * delta - (std::exp(e_new) - lambda(i));
        }
        const bool acc = std::isfinite(log_alpha) ? std::log(rng.uniform()) < log_alpha : false;
        prop.count.record(acc);
        if (!acc) continue;
        ++accepted;
        blk.z(ai) = z_new;
        s.W(i) += delta;
        if (model.restricted) {
          eta.swap(eta_buf);
          lambda = eta.array().exp().matrix();
        } else {
          eta(i) += delta;
          lambda(i) = std::exp(eta(i));
        }
      }
    }
    return accepted;
  }

  NormalConditional beta0_conditional() const {
    if (!gaussian_w) throw Error(ErrorKind::InvalidArgument, "beta0 has no closed-form conditional in this model");
    double prec = 1.0 / priors.beta_prior_var;
    double rhs = 0.0;
    for (size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      const double tot = blk.colsum.sum();
      prec += tot / s.sigma2[b];
      rhs += (blk.colsum.dot(blk.z) + s.beta0 * tot) / s.sigma2[b];
    }
    if (!(prec > 0.0) || !std::isfinite(prec)) throw Error(ErrorKind::SingularCovariance, "beta0 precision not positive");
    return {rhs / prec, 1.0 / prec};
  }

  GaussianConditional gamma_conditional() const {
    if (!gaussian_w) throw Error(ErrorKind::InvalidArgument, "gamma has no closed-form conditional in this model");
    GaussianConditional c;
    c.precision = Rg_inv / s.tau2;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(T);
    for (size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      c.precision += blk.G / s.sigma2[b];
      Eigen::VectorXd w = blk.z;
      for (Eigen::Index a = 0; a < w.size(); ++a) w(a) += s.gamma(blk.days[static_cast<size_t>(a)]);
      const Eigen::VectorXd v = blk.Rinv * w;
      for (Eigen::Index a = 0; a < v.size(); ++a) rhs(blk.days[static_cast<size_t>(a)]) += v(a) / s.sigma2[b];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c.precision);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularCovariance, "gamma precision not positive definite");
    c.mean = llt.solve(rhs);
    return c;
  }

  bool update_beta0() {
    if (gaussian_w) {
      if (opt.fixed.beta0) return false;
      const auto c = beta0_conditional();
      const double nb = rng.normal(c.mean, std::sqrt(c.var));
      shift_z_by_intercepts(nb - s.beta0, Eigen::VectorXd::Zero(T));
      s.beta0 = nb;
      return true;
    }
    if (opt.fixed.beta0 && opt.fixed.gamma) return false;
    return joint_step(!opt.fixed.beta0, !opt.fixed.gamma);
  }

  bool update_gamma() {
    if (opt.fixed.gamma) return false;
    if (gaussian_w) {
      const auto c = gamma_conditional();
      Eigen::LLT<Eigen::MatrixXd> llt(c.precision);
      Eigen::VectorXd z(T);
      for (int t = 0; t < T; ++t) z(t) = rng.normal();
      const Eigen::VectorXd g = c.mean + llt.matrixU().solve(z);
      shift_z_by_intercepts(0.0, g - s.gamma);
      s.gamma = g;
      return true;
    }
    if (!opt.fixed.beta0) return false;  // moved jointly with beta0
    return joint_step(false, true);
  }

  bool joint_step(bool with_beta0, bool with_gamma) {
    const int k = (with_beta0 ? 1 : 0) + (with_gamma ? T : 0);
    Eigen::MatrixXd d(n, k);
    Eigen::VectorXd coef(k);
    Eigen::MatrixXd prior = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd offset = eta;
    int col = 0;
    if (with_beta0) {
      d.col(0).setOnes();
      coef(0) = s.beta0;
      prior(0, 0) = 1.0 / priors.beta_prior_var;
      offset.array() -= s.beta0;
      col = 1;
    }
    if (with_gamma) {
      d.middleCols(col, T) = B;
      coef.segment(col, T) = s.gamma;
      prior.block(col, col, T, T) = Rg_inv / s.tau2;
      for (int i = 0; i < n; ++i) offset(i) -= s.gamma(day[static_cast<size_t>(i)]);
    }
    const bool acc = gamerman_step(d, offset, y, prior, coef, rng, true);
    joint_count.record(acc);
    if (!acc) return false;
    if (with_beta0) s.beta0 = coef(0);
    if (with_gamma) s.gamma = coef.segment(col, T);
    rebuild_w();
    eta = offset + d * coef;
    lambda = eta.array().exp().matrix();
    return true;
  }

  InvGammaPrior sigma2_conditional(int b) const {
    if (b < 0 || static_cast<size_t>(b) >= blocks.size()) throw Error(ErrorKind::InvalidArgument, "no such block");
    const auto& blk = blocks[static_cast<size_t>(b)];
    const double quad = blk.z.dot(blk.Rinv * blk.z);
    return {priors.sigma2.shape + 0.5 * static_cast<double>(blk.z.size()), priors.sigma2.scale + 0.5 * quad};
  }

  InvGammaPrior tau2_conditional() const {
    const double quad = s.gamma.dot(Rg_inv * s.gamma);
    return {priors.tau2.shape + 0.5 * T, priors.tau2.scale + 0.5 * quad};
  }

  void update_sigma2() {
    if (opt.fixed.sigma2) return;
    for (size_t b = 0; b < blocks.size(); ++b) {
      const auto c = sigma2_conditional(static_cast<int>(b));
      s.sigma2[b] = rng.inv_gamma(c.shape, c.scale);
    }
  }

  void update_tau2() {
    if (opt.fixed.tau2) return;
    const auto c = tau2_conditional();
    s.tau2 = rng.inv_gamma(c.shape, c.scale);
  }

  int update_corr() {
    if (opt.fixed.corr) return 0;
    int accepted = 0;
    for (size_t b = 0; b < blocks.size(); ++b) {
      auto& blk = blocks[b];
      for (size_t k = 0; k < blk.info.size(); ++k) {
        const bool acc = corr_step(b, k);
        blk.hyper[k].count.record(acc);
        accepted += acc ? 1 : 0;
      }
    }
    if (s.phi_gamma) {
      const bool acc = phi_gamma_step();
      phi_gamma_prop.count.record(acc);
      accepted += acc ? 1 : 0;
    }
    return accepted;
  }

  bool corr_step(size_t b, size_t k) {
    auto& blk = blocks[b];
    const CorrelationSpec& cur = s.corr[b];
    std::vector<double> vals = get_hyperparameters(cur);
    const double old = vals[k];
    const double h = blk.hyper[k].scale() * rng.normal();
    double log_jac = 0.0;
    switch (blk.info[k].scale) {
      case ParamScale::Log:
        vals[k] = old * std::exp(h);
        log_jac = h;
        break;
      case ParamScale::LogMinusOne:
        vals[k] = 1.0 + (old - 1.0) * std::exp(h);
        log_jac = h;
        break;
      case ParamScale::HalfTurn:
        vals[k] = reflect_half_turn(old + h);
        break;
    }
    if (!std::isfinite(vals[k])) return false;
    CorrelationSpec prop = cur;
    try {
      set_hyperparameters(prop, vals);
    } catch (const Error&) {
      return false;
    }
    const double lp_new = block_log_prior(prop, priors, b);
    if (lp_new == kNegInf) return false;
    const auto f = factorize(layout.blocks[b].kernel.matrix(prop));
    if (!f) return false;
    const double sig2 = s.sigma2[b];
    const double quad_new = f->llt.matrixL().solve(blk.z).squaredNorm();
    const double quad_old = blk.z.dot(blk.Rinv * blk.z);
    const double log_alpha = -0.5 * (f->logdet - blk.logdet) - 0.5 * (quad_new - quad_old) / sig2 + lp_new -
                             block_log_prior(cur, priors, b) + log_jac;
    if (!std::isfinite(log_alpha) || !(std::log(rng.uniform()) < log_alpha)) return false;
    s.corr[b] = prop;
    install(blk, *f);
    return true;
  }

  bool phi_gamma_step() {
    const double old = *s.phi_gamma;
    const double h = phi_gamma_prop.scale() * rng.normal();
    const double nv = old * std::exp(h);
    if (!(nv > 0.0) || !std::isfinite(nv)) return false;
    const auto f = factorize(temporal_cov(1.0, nv, data.julian));
    if (!f) return false;
    const double quad_new = f->llt.matrixL().solve(s.gamma).squaredNorm();
    const double quad_old = s.gamma.dot(Rg_inv * s.gamma);
    const double log_alpha = -0.5 * (f->logdet - Rg_logdet) - 0.5 * (quad_new - quad_old) / s.tau2 +
                             log_gamma_density(nv, priors.phi_gamma) -
                             log_gamma_density(old, priors.phi_gamma) + h;
    if (!std::isfinite(log_alpha) || !(std::log(rng.uniform()) < log_alpha)) return false;
    s.phi_gamma = nv;
    Rg_inv = inverse_of(*f, T);
    Rg_logdet = f->logdet;
    return true;
  }

  void sweep() {
    ++iter;
    for (auto step : opt.order) {
      switch (step) {
        case UpdateBlock::BetaStar: update_beta_star(); break;
        case UpdateBlock::W: update_W(); break;
        case UpdateBlock::Beta0: update_beta0(); break;
        case UpdateBlock::Gamma: update_gamma(); break;
        case UpdateBlock::Sigma2: update_sigma2(); break;
        case UpdateBlock::Tau2: update_tau2(); break;
        case UpdateBlock::Corr: update_corr(); break;
      }
    }
    if (iter <= cfg.burn_in && iter % cfg.adapt_window == 0) {
      const double step = 1.0 / std::ceil(static_cast<double>(iter) / cfg.adapt_window);
      for (auto& a : w_prop) a.adapt(cfg.adapt_target, step);
      for (auto& blk : blocks) {
        for (auto& a : blk.hyper) a.adapt(cfg.adapt_target, step);
      }
      phi_gamma_prop.adapt(cfg.adapt_target, step);
    }
    if (iter == cfg.burn_in) reset_acceptance();
  }

  void reset_acceptance() {
    for (auto& a : w_prop) a.count.reset();
    for (auto& blk : blocks) {
      for (auto& a : blk.hyper) a.count.reset();
    }
    phi_gamma_prop.count.reset();
    beta_star_count.reset();
    joint_count.reset();
  }

  AcceptanceRates acceptance() const {
    AcceptanceRates r;
    r.beta_star = beta_star_count.rate();
    r.intercept_temporal = joint_count.rate();
    if (!blocks.empty()) {
      for (const auto& a : w_prop) r.W.push_back(a.count.rate());
    }
    for (size_t b = 0; b < blocks.size(); ++b) {
      for (size_t k = 0; k < blocks[b].info.size(); ++k) {
        r.hyper_names.push_back(suffixed(blocks[b].info[k].name, layout.blocks[b].label));
        r.hyper.push_back(blocks[b].hyper[k].count.rate());
      }
    }
    if (s.phi_gamma) {
      r.hyper_names.push_back("phi_gamma");
      r.hyper.push_back(phi_gamma_prop.count.rate());
    }
    return r;
  }
};

MwgSampler::MwgSampler(const ModelConfig& model, const Dataset& data, const ResolvedPriors& priors,
                       const ChainConfig& config, int chain, const SamplerOptions& options)
    : impl_(std::make_unique<Impl>(model, data, priors, config, chain, options)) {}
MwgSampler::~MwgSampler() = default;
MwgSampler::MwgSampler(MwgSampler&&) noexcept = default;
MwgSampler& MwgSampler::operator=(MwgSampler&&) noexcept = default;

bool MwgSampler::update_beta_star() { return impl_->update_beta_star(); }
int MwgSampler::update_W() { return impl_->update_W(); }
bool MwgSampler::update_beta0() { return impl_->update_beta0(); }
bool MwgSampler::update_gamma() { return impl_->update_gamma(); }
void MwgSampler::update_sigma2() { impl_->update_sigma2(); }
void MwgSampler::update_tau2() { impl_->update_tau2(); }
int MwgSampler::update_corr() { return impl_->update_corr(); }
void MwgSampler::sweep() { impl_->sweep(); }
int MwgSampler::iteration() const { return impl_->iter; }
NormalConditional MwgSampler::beta0_conditional() const { return impl_->beta0_conditional(); }
GaussianConditional MwgSampler::gamma_conditional() const { return impl_->gamma_conditional(); }
InvGammaPrior MwgSampler::sigma2_conditional(int block) const { return impl_->sigma2_conditional(block); }
InvGammaPrior MwgSampler::tau2_conditional() const { return impl_->tau2_conditional(); }
const ParameterState& MwgSampler::state() const { return impl_->s; }
void MwgSampler::set_state(const ParameterState& s) { impl_->set_state(s); }
const Eigen::VectorXd& MwgSampler::eta() const { return impl_->eta; }
bool MwgSampler::gaussian_w() const { return impl_->gaussian_w; }
const SpatialLayout& MwgSampler::layout() const { return impl_->layout; }
AcceptanceRates MwgSampler::acceptance() const { return impl_->acceptance(); }
void MwgSampler::reset_acceptance() { impl_->reset_acceptance(); }
int MwgSampler::jitter_events() const { return impl_->jitter_events; }

std::vector<double> MwgSampler::W_scales() const {
  std::vector<double> out;
  for (const auto& a : impl_->w_prop) out.push_back(a.scale());
  return out;
}

void MwgSampler::set_W_scales(double scale) {
  for (auto& a : impl_->w_prop) a.log_scale = std::log(scale);
}

std::vector<double> MwgSampler::hyper_scales() const {
  std::vector<double> out;
  for (const auto& blk : impl_->blocks) {
    for (const auto& a : blk.hyper) out.push_back(a.scale());
  }
  if (impl_->s.phi_gamma) out.push_back(impl_->phi_gamma_prop.scale());
  return out;
}

// ---------------------------------------------------------------------------

ParameterState initial_state(const ModelConfig& model, const Dataset& data, const SpatialLayout& layout,
                             const ResolvedPriors& priors, int chain, Rng& rng) {
  const int n = data.n();
  // alternate below/above, widening with the chain index
  const double sign = chain % 2 == 0 ? -1.0 : 1.0;
  const double offset = sign * 0.25 * (1 + chain / 2);
  const double factor = chain % 2 == 0 ? 0.5 : 2.0;

  ParameterState s;
  s.beta_star.resize(data.n_covariates());
  for (Eigen::Index k = 0; k < s.beta_star.size(); ++k) s.beta_star(k) = rng.normal(0.0, 0.5);
  s.gamma = Eigen::VectorXd::Zero(data.n_days);
  const Eigen::VectorXd ly = (data.y().array() + 0.5).log().matrix();
  const double sig_mean = priors.sigma2.scale / (priors.sigma2.shape - 1.0);
  const double tau_mean = priors.tau2.scale / (priors.tau2.shape - 1.0);
  s.tau2 = tau_mean * factor;
  for (const auto& b : layout.blocks) {
    s.sigma2.push_back(sig_mean * factor);
    CorrelationSpec c = initial_correlation(model, b);
    auto vals = get_hyperparameters(c);
    const auto info = hyperparameters(c);
    for (size_t k = 0; k < vals.size(); ++k) {
      if (info[k].scale == ParamScale::Log) vals[k] *= factor;
    }
    set_hyperparameters(c, vals);
    s.corr.push_back(c);
  }
  if (model.temporal_correlation) {
    const auto [lo, hi] = std::minmax_element(data.julian.begin(), data.julian.end());
    s.phi_gamma = std::max(1.0, static_cast<double>(*hi - *lo) / 20.0) * factor;
  }

  if (model.spatial() && !model.restricted) {
    s.W = ly.array() + offset;
    s.beta0 = s.W.mean();
  } else {
    // Without a Gaussian W the fixed effects only move through mode-centred
    // proposals, which cannot climb out of a far tail; start from a draw of
    // the Laplace approximation with doubled standard deviations instead.
    const Eigen::VectorXd base =
        model.restricted ? Eigen::VectorXd(residual_projector(data) * ly) : Eigen::VectorXd::Zero(n);
    const Eigen::MatrixXd d = fixed_effect_design(data);
    const Eigen::MatrixXd prior = Eigen::MatrixXd::Identity(d.cols(), d.cols()) / priors.beta_prior_var;
    const auto q = mode_proposal(d, base, data.y(), prior, Eigen::VectorXd::Zero(d.cols()));
    if (!q) throw Error(ErrorKind::NumericalFailure, "no finite starting point for the fixed effects");
    Eigen::VectorXd z(d.cols());
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal(0.0, 2.0);
    const Eigen::VectorXd coef = q->mean + q->llt.matrixU().solve(z);
    s.beta0 = coef(0);
    s.beta_star = coef.tail(d.cols() - 1);
    s.W = base.array() + s.beta0;
  }
  return s;
}

int PosteriorSample::draws_per_chain() const {
  return n_chains() > 0 ? static_cast<int>(draws.size()) / n_chains() : 0;
}

PosteriorSample run_chains(const ChainConfig& config, const ModelConfig& model, const Dataset& data,
                           const SamplerOptions& options) {
  validate(config);
  validate(data);
  const SpatialLayout layout = make_layout(model, data);
  const ResolvedPriors priors = resolve_priors(options.priors, model, data, layout);
  const int per_chain = (config.n_iter - config.burn_in) / config.thin;

  PosteriorSample out;
  out.model = model;
  out.config = config;
  out.priors = priors;
  for (const auto& b : layout.blocks) out.block_labels.push_back(b.label);

  std::vector<std::vector<ParameterState>> draws(static_cast<size_t>(config.n_chains));
  std::vector<AcceptanceRates> acc(static_cast<size_t>(config.n_chains));
  std::vector<int> jitter(static_cast<size_t>(config.n_chains), 0);

  parallel_for(static_cast<size_t>(config.n_chains), [&](size_t c) {
    MwgSampler sampler(model, data, priors, config, static_cast<int>(c), options);
    auto& mine = draws[c];
    mine.reserve(static_cast<size_t>(per_chain));
    for (int it = 1; it <= config.n_iter; ++it) {
      try {
        sampler.sweep();
      } catch (const Error& e) {
        throw Error(e.kind(), "chain " + std::to_string(c) + ", iteration " + std::to_string(it) + ": " + e.what());
      }
      if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) mine.push_back(sampler.state());
    }
    acc[c] = sampler.acceptance();
    jitter[c] = sampler.jitter_events();
  });

  for (int c = 0; c < config.n_chains; ++c) {
    for (auto& d : draws[static_cast<size_t>(c)]) {
      out.draws.push_back(std::move(d));
      out.chain_of.push_back(c);
    }
  }
  out.acceptance = std::move(acc);
  out.jitter_events = std::move(jitter);
  return out;
}

}  // namespace plnspatial
