#include <algorithm>
#include <cmath>
#include <limits>

#include "plnspatial/error.hpp"
#include "plnspatial/sampler.hpp"

namespace plnspatial {

namespace {

std::string suffixed(const std::string& name, const std::string& label) {
  return label.empty() ? name : name + "_" + label;
}

double mean_of(const Eigen::VectorXd& v, Eigen::Index begin, Eigen::Index len) {
  return v.segment(begin, len).mean();
}

double var_of(const Eigen::VectorXd& v, Eigen::Index begin, Eigen::Index len) {
  const double m = mean_of(v, begin, len);
  return (v.segment(begin, len).array() - m).square().sum() / static_cast<double>(len - 1);
}

}  // namespace

ParameterTable parameter_table(const PosteriorSample& sample, const Dataset& data, bool include_latent) {
  ParameterTable t;
  t.chain_of = sample.chain_of;
  if (sample.draws.empty()) return t;
  const auto& first = sample.draws.front();
  const bool latent = include_latent && sample.model.spatial();

  t.names.push_back("beta0");
  for (Eigen::Index k = 0; k < first.beta_star.size(); ++k) t.names.push_back("beta" + std::to_string(k + 1));
  for (Eigen::Index k = 0; k < first.gamma.size(); ++k) t.names.push_back("gamma_" + std::to_string(k + 1));
  if (latent) {
    for (int i = 0; i < data.n(); ++i) t.names.push_back("Z_" + std::to_string(i + 1));
  }
  for (size_t b = 0; b < first.sigma2.size(); ++b) t.names.push_back(suffixed("sigma2", sample.block_labels[b]));
  t.names.push_back("tau2");
  for (size_t b = 0; b < first.corr.size(); ++b) {
    for (const auto& h : hyperparameters(first.corr[b])) t.names.push_back(suffixed(h.name, sample.block_labels[b]));
  }
  if (first.phi_gamma) t.names.push_back("phi_gamma");

  t.values.resize(static_cast<Eigen::Index>(sample.draws.size()), static_cast<Eigen::Index>(t.names.size()));
  for (size_t d = 0; d < sample.draws.size(); ++d) {
    const auto& s = sample.draws[d];
    auto row = t.values.row(static_cast<Eigen::Index>(d));
    Eigen::Index c = 0;
    row(c++) = s.beta0;
    for (Eigen::Index k = 0; k < s.beta_star.size(); ++k) row(c++) = s.beta_star(k);
    for (Eigen::Index k = 0; k < s.gamma.size(); ++k) row(c++) = s.gamma(k);
    if (latent) {
      const Eigen::VectorXd z = latent_spatial(s, data);
      for (Eigen::Index i = 0; i < z.size(); ++i) row(c++) = z(i);
    }
    for (double v : s.sigma2) row(c++) = v;
    row(c++) = s.tau2;
    for (const auto& spec : s.corr) {
      for (double v : get_hyperparameters(spec)) row(c++) = v;
    }
    if (s.phi_gamma) row(c++) = *s.phi_gamma;
  }
  return t;
}

std::vector<Eigen::VectorXd> chains_of(const ParameterTable& table, int column) {
  int n_chains = 0;
  for (int c : table.chain_of) n_chains = std::max(n_chains, c + 1);
  std::vector<std::vector<double>> buf(static_cast<size_t>(n_chains));
  for (size_t d = 0; d < table.chain_of.size(); ++d) {
    buf[static_cast<size_t>(table.chain_of[d])].push_back(table.values(static_cast<Eigen::Index>(d), column));
  }
  std::vector<Eigen::VectorXd> out;
  for (const auto& b : buf) out.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
  return out;
}

double split_psrf(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) throw Error(ErrorKind::InsufficientChains, "PSRF needs at least two chains");
  Eigen::Index len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  const Eigen::Index half = len / 2;
  if (half < 2) throw Error(ErrorKind::InvalidArgument, "PSRF needs at least four draws per chain");

  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (Eigen::Index start : {Eigen::Index{0}, len - half}) {
      means.push_back(mean_of(c, start, half));
      vars.push_back(var_of(c, start, half));
    }
  }
  const double m = static_cast<double>(means.size());
  const double h = static_cast<double>(half);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double b = 0.0;
  for (double v : means) b += (v - grand) * (v - grand);
  b *= h / (m - 1.0);
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m;
  if (!(w > 0.0)) return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (h - 1.0) / h * w + b / h;
  return std::max(1.0, std::sqrt(var_plus / w));
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw Error(ErrorKind::InvalidArgument, "no chains");
  Eigen::Index len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  const double total = static_cast<double>(len) * static_cast<double>(chains.size());
  if (len < 4) return total;
  const double nd = static_cast<double>(len);

  std::vector<double> means;
  std::vector<Eigen::VectorXd> centred;
  double w = 0.0;
  for (const auto& c : chains) {
    const double mu = c.head(len).mean();
    means.push_back(mu);
    centred.push_back(c.head(len).array() - mu);
    w += centred.back().squaredNorm() / (nd - 1.0);
  }
  const double m = static_cast<double>(chains.size());
  w /= m;
  double b_over_n = 0.0;
  if (chains.size() > 1) {
    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= m;
    for (double v : means) b_over_n += (v - grand) * (v - grand);
    b_over_n /= m - 1.0;
  }
  const double var_plus = (nd - 1.0) / nd * w + b_over_n;
  if (!(var_plus > 0.0) || !std::isfinite(var_plus)) return total;

  auto rho = [&](Eigen::Index lag) {
    double acov = 0.0;
    for (const auto& c : centred) acov += c.head(len - lag).dot(c.tail(len - lag)) / nd;
    acov /= m;
    return 1.0 - (w - acov) / var_plus;
  };

  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; 2 * k + 1 < len; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev);
    prev = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(std::max(total, 10.0)));
  return total / tau;
}

std::vector<ParameterDiagnostics> diagnostics(const ParameterTable& table) {
  std::vector<ParameterDiagnostics> out;
  for (size_t k = 0; k < table.names.size(); ++k) {
    const auto ch = chains_of(table, static_cast<int>(k));
    out.push_back({table.names[k], split_psrf(ch), effective_sample_size(ch)});
  }
  return out;
}

std::vector<ParameterDiagnostics> diagnostics(const PosteriorSample& sample, const Dataset& data) {
  if (sample.n_chains() < 2) throw Error(ErrorKind::InsufficientChains, "diagnostics need at least two chains");
  return diagnostics(parameter_table(sample, data));
}

}  // namespace plnspatial
