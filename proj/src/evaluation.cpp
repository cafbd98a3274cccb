#include "plnspatial/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "plnspatial/error.hpp"

namespace plnspatial {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

DicResult dic(std::span<const double> deviance_draws, double deviance_at_mean) {
  if (deviance_draws.empty()) throw Error(ErrorKind::InvalidArgument, "no deviance draws");
  double sum = 0.0;
  for (double d : deviance_draws) sum += d;
  const double dbar = sum / static_cast<double>(deviance_draws.size());
  const double pd = dbar - deviance_at_mean;
  return {dbar, pd, dbar + pd};
}

double rps(std::span<const double> pmf, int y) {
  if (y < 0) throw Error(ErrorKind::InvalidArgument, "counts must be non-negative");
  const int last = std::max(static_cast<int>(pmf.size()) - 1, y);
  double f = 0.0;
  double score = 0.0;
  for (int k = 0; k <= last; ++k) {
    // past the truncation point the remaining mass is below tolerance
    f = k < static_cast<int>(pmf.size()) ? f + pmf[static_cast<size_t>(k)] : 1.0;
    const double ind = y <= k ? 1.0 : 0.0;
    score += (f - ind) * (f - ind);
    if (k >= y && 1.0 - f < 1e-10) break;
  }
  return score;
}

LogScore log_score(std::span<const double> pmf, int y) {
  if (y < 0) throw Error(ErrorKind::InvalidArgument, "counts must be non-negative");
  const double p = y < static_cast<int>(pmf.size()) ? pmf[static_cast<size_t>(y)] : 0.0;
  if (!(p > kLogScoreFloor)) return {-std::log(kLogScoreFloor), true};
  return {-std::log(p), false};
}

double dss(double mu, double sigma, int y) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::DegenerateVariance, "predictive standard deviation must be positive");
  }
  const double r = (y - mu) / sigma;
  return r * r + 2.0 * std::log(sigma);
}

double poisson_pmf(int k, double lambda) {
  if (k < 0) return 0.0;
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

PredictiveDistribution predictive(std::span<const double> lambdas) {
  if (lambdas.empty()) throw Error(ErrorKind::InvalidArgument, "no draws");
  const double m = static_cast<double>(lambdas.size());
  double mean = 0.0, max_l = 0.0;
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorKind::NonFiniteLinearPredictor, "invalid rate");
    mean += l;
    max_l = std::max(max_l, l);
  }
  mean /= m;
  double var_l = 0.0;
  for (double l : lambdas) var_l += (l - mean) * (l - mean);
  var_l /= m;

  PredictiveDistribution out;
  out.mean = mean;
  out.sd = std::sqrt(mean + var_l);

  // log Poisson pmf per draw, advanced one k at a time
  std::vector<double> lp(lambdas.size()), log_l(lambdas.size());
  for (size_t j = 0; j < lambdas.size(); ++j) {
    log_l[j] = lambdas[j] > 0.0 ? std::log(lambdas[j]) : -std::numeric_limits<double>::infinity();
    lp[j] = -lambdas[j];
  }
  const int k_cap = static_cast<int>(std::ceil(max_l + 40.0 * std::sqrt(max_l) + 50.0));
  double cdf = 0.0;
  for (int k = 0; k <= k_cap; ++k) {
    if (k > 0) {
      const double lk = std::log(static_cast<double>(k));
      for (size_t j = 0; j < lp.size(); ++j) lp[j] += log_l[j] - lk;
    }
    double p = 0.0;
    for (double v : lp) p += std::exp(v);
    p /= m;
    out.pmf.push_back(p);
    cdf += p;
    if (1.0 - cdf < 1e-10 && k >= mean) break;
  }
  return out;
}

Eigen::MatrixXd linear_predictor_draws(const PosteriorSample& sample, const Dataset& data) {
  Eigen::MatrixXd eta(data.n(), static_cast<Eigen::Index>(sample.draws.size()));
  Eigen::MatrixXd p_perp;
  if (sample.model.restricted) p_perp = residual_projector(data);
  for (size_t m = 0; m < sample.draws.size(); ++m) {
    const auto& s = sample.draws[m];
    eta.col(static_cast<Eigen::Index>(m)) =
        sample.model.restricted ? restricted_linear_predictor(s, data, p_perp) : linear_predictor(s, data);
  }
  return eta;
}

ScoreReport score_model(const PosteriorSample& sample, const Dataset& data) {
  if (sample.draws.empty()) throw Error(ErrorKind::InvalidArgument, "posterior sample is empty");
  const Eigen::MatrixXd eta = linear_predictor_draws(sample, data);
  const auto n_draws = eta.cols();
  const int n = data.n();

  std::vector<double> dev(static_cast<size_t>(n_draws));
  for (Eigen::Index m = 0; m < n_draws; ++m) {
    dev[static_cast<size_t>(m)] = -2.0 * poisson_log_likelihood(eta.col(m), data.counts);
  }
  const Eigen::VectorXd eta_bar = eta.rowwise().mean();
  const DicResult d = dic(dev, -2.0 * poisson_log_likelihood(eta_bar, data.counts));

  ScoreReport r;
  r.model = to_string(sample.model.id);
  r.dbar = d.dbar;
  r.pd = d.pd;
  r.dic = d.dic;
  std::vector<double> lambdas(static_cast<size_t>(n_draws)), logp(static_cast<size_t>(n_draws));
  for (int i = 0; i < n; ++i) {
    const int y = data.counts[static_cast<size_t>(i)];
    for (Eigen::Index m = 0; m < n_draws; ++m) {
      const double e = eta(i, m);
      lambdas[static_cast<size_t>(m)] = std::exp(e);
      logp[static_cast<size_t>(m)] = y * e - std::exp(e) - std::lgamma(y + 1.0);
    }
    const auto pred = predictive(lambdas);
    r.rps += rps(pred.pmf, y);
    r.dss += dss(pred.mean, pred.sd, y);
    // p(y) straight from the mixture so counts beyond the truncation still score
    const double mx = *std::max_element(logp.begin(), logp.end());
    double acc = 0.0;
    for (double v : logp) acc += std::exp(v - mx);
    const double log_py = mx + std::log(acc / static_cast<double>(n_draws));
    if (!(log_py > std::log(kLogScoreFloor))) {
      r.logs += -std::log(kLogScoreFloor);
      r.capped_sites.push_back(i);
    } else {
      r.logs += -log_py;
    }
  }
  r.rps /= n;
  r.logs /= n;
  r.dss /= n;
  return r;
}

std::vector<ScoreReport> rank_by_dic(std::vector<ScoreReport> reports) {
  std::stable_sort(reports.begin(), reports.end(),
                   [](const ScoreReport& a, const ScoreReport& b) { return a.dic < b.dic; });
  return reports;
}

// ---------------------------------------------------------------------------

double acute_angle(double direction) {
  double a = std::fmod(direction, std::numbers::pi);
  if (a < 0.0) a += std::numbers::pi;
  return a > std::numbers::pi / 2.0 ? std::numbers::pi - a : a;
}

std::vector<AngleBin> anisotropy_summary(const PosteriorSample& sample, const Dataset& data,
                                         const AnisotropyOptions& options) {
  if (!sample.model.spatial()) throw Error(ErrorKind::InvalidArgument, "anisotropy summary needs a spatial model");
  if (options.n_bins < 1 || options.n_strata < 1) {
    throw Error(ErrorKind::InvalidArgument, "n_bins and n_strata must be positive");
  }
  if (sample.draws.empty()) throw Error(ErrorKind::InvalidArgument, "posterior sample is empty");
  const SpatialLayout layout = make_layout(sample.model, data);

  struct Pair {
    double dist, angle, corr;
  };
  std::vector<Pair> pairs;
  for (size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& blk = layout.blocks[b];
    const auto nb = static_cast<Eigen::Index>(blk.sites.size());
    Eigen::MatrixXd mean_corr = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::MatrixXd r(nb, nb);
    for (const auto& s : sample.draws) {
      blk.kernel.fill(s.corr[b], r);
      mean_corr += r;
    }
    mean_corr /= static_cast<double>(sample.draws.size());
    for (Eigen::Index a = 0; a < nb; ++a) {
      const Vec2 pa = data.locations[static_cast<size_t>(blk.sites[static_cast<size_t>(a)])].coords();
      for (Eigen::Index c = a + 1; c < nb; ++c) {
        const Vec2 pc = data.locations[static_cast<size_t>(blk.sites[static_cast<size_t>(c)])].coords();
        const double dist = euclidean_distance(pa, pc);
        if (dist == 0.0) continue;
        double angle = std::atan2(pc.y - pa.y, pc.x - pa.x);
        angle = options.fold ? equator_angle(pa, pc) : std::fmod(angle + 2.0 * std::numbers::pi, std::numbers::pi);
        pairs.push_back({dist, angle, mean_corr(a, c)});
      }
    }
  }

  const double span = options.fold ? std::numbers::pi / 2.0 : std::numbers::pi;
  const double width = span / options.n_bins;
  std::vector<AngleBin> bins;
  for (int k = 0; k < options.n_bins; ++k) bins.push_back({k * width, (k + 1) * width, kNaN, 0, true});
  if (pairs.empty()) return bins;

  // equal-count distance strata
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return pairs[a].dist < pairs[b].dist; });
  std::vector<int> stratum(pairs.size());
  for (size_t r = 0; r < order.size(); ++r) {
    stratum[order[r]] = static_cast<int>(r * static_cast<size_t>(options.n_strata) / order.size());
  }

  const auto S = static_cast<size_t>(options.n_strata);
  const auto K = static_cast<size_t>(options.n_bins);
  std::vector<double> s_sum(S, 0.0), sk_sum(S * K, 0.0);
  std::vector<int> s_cnt(S, 0), sk_cnt(S * K, 0);
  double grand = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto s = static_cast<size_t>(stratum[i]);
    const auto k = std::min(K - 1, static_cast<size_t>(pairs[i].angle / width));
    s_sum[s] += pairs[i].corr;
    s_cnt[s] += 1;
    sk_sum[s * K + k] += pairs[i].corr;
    sk_cnt[s * K + k] += 1;
    grand += pairs[i].corr;
  }
  grand /= static_cast<double>(pairs.size());

  for (size_t k = 0; k < K; ++k) {
    double dev = 0.0;
    int cnt = 0;
    for (size_t s = 0; s < S; ++s) {
      const int c = sk_cnt[s * K + k];
      if (c == 0) continue;
      dev += c * (sk_sum[s * K + k] / c - s_sum[s] / s_cnt[s]);
      cnt += c;
    }
    bins[k].n_pairs = cnt;
    bins[k].too_few_pairs = cnt < options.min_pairs;
    if (cnt > 0) bins[k].value = grand + dev / cnt;
  }
  return bins;
}

int peak_bin(const std::vector<AngleBin>& bins) {
  int best = -1;
  for (size_t k = 0; k < bins.size(); ++k) {
    if (bins[k].too_few_pairs || !std::isfinite(bins[k].value)) continue;
    if (best < 0 || bins[k].value > bins[static_cast<size_t>(best)].value) best = static_cast<int>(k);
  }
  return best;
}

}  // namespace plnspatial
