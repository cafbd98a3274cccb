#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plnspatial/model.hpp"
#include "plnspatial/rng.hpp"

namespace plnspatial {

struct ChainConfig {
  int n_iter = 70000;
  int burn_in = 10000;
  int thin = 60;
  int n_chains = 2;
  std::uint64_t seed = 1;
  double adapt_target = 0.44;
  int adapt_window = 50;
};

void validate(const ChainConfig& c);

enum class UpdateBlock { BetaStar, W, Beta0, Gamma, Sigma2, Tau2, Corr };

/// beta*, W, beta0, gamma, sigma2, tau2, correlation parameters.
std::vector<UpdateBlock> default_update_order();

/// Blocks held at their initial value (for conditional-target checks).
struct FixedBlocks {
  bool beta_star = false;
  bool W = false;
  bool beta0 = false;
  bool gamma = false;
  bool sigma2 = false;
  bool tau2 = false;
  bool corr = false;
};

struct SamplerOptions {
  Hyperpriors priors;
  std::vector<UpdateBlock> order = default_update_order();
  FixedBlocks fixed;
  /// Start every chain here instead of the overdispersed default.
  std::optional<ParameterState> initial;
};

/// Acceptance fractions of the Metropolis blocks. NaN where a block never ran.
struct AcceptanceRates {
  double beta_star;
  double intercept_temporal;  // joint (beta0, gamma) step of the non-Gaussian-W samplers
  std::vector<double> W;      // per site
  std::vector<std::string> hyper_names;
  std::vector<double> hyper;
};

struct NormalConditional {
  double mean;
  double var;
};

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};

/// One Metropolis-within-Gibbs chain.
///
/// Spatial unrestricted models keep W as the sampled quantity: beta0, gamma
/// and sigma2 have Gaussian/inverse-gamma full conditionals given W. The
/// no-spatial model and restricted spatial regression cannot use those
/// conditionals (W is not Gaussian given the rest); there the latent field is
/// Z and (beta0, gamma) move jointly with a weighted-least-squares proposal.
class MwgSampler {
 public:
  MwgSampler(const ModelConfig& model, const Dataset& data, const ResolvedPriors& priors,
             const ChainConfig& config, int chain, const SamplerOptions& options = {});
  ~MwgSampler();
  MwgSampler(MwgSampler&&) noexcept;
  MwgSampler& operator=(MwgSampler&&) noexcept;

  bool update_beta_star();
  /// Returns the number of accepted site moves.
  int update_W();
  /// Gibbs draw (Gaussian-W models) or the joint (beta0, gamma) MH step.
  bool update_beta0();
  /// Gibbs draw; in the joint-step samplers a no-op unless beta0 is fixed.
  bool update_gamma();
  void update_sigma2();
  void update_tau2();
  /// Returns the number of accepted hyperparameter moves.
  int update_corr();

  /// One full sweep in the configured order, with burn-in adaptation.
  void sweep();
  int iteration() const;

  NormalConditional beta0_conditional() const;
  GaussianConditional gamma_conditional() const;
  InvGammaPrior sigma2_conditional(int block) const;
  InvGammaPrior tau2_conditional() const;

  const ParameterState& state() const;
  void set_state(const ParameterState& s);
  /// Current log lambda.
  const Eigen::VectorXd& eta() const;
  bool gaussian_w() const;
  const SpatialLayout& layout() const;

  /// Per-site multipliers of 1 / sqrt(Q_ii / sigma2 + y_i + 0.5).
  std::vector<double> W_scales() const;
  void set_W_scales(double scale);
  std::vector<double> hyper_scales() const;

  /// Counts since construction or the last reset.
  AcceptanceRates acceptance() const;
  void reset_acceptance();
  int jitter_events() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Folds an angle into [0, pi] by reflection at 0 and pi.
double reflect_half_turn(double x);

/// Overdispersed starting state for `chain`.
ParameterState initial_state(const ModelConfig& model, const Dataset& data, const SpatialLayout& layout,
                             const ResolvedPriors& priors, int chain, Rng& rng);

struct PosteriorSample {
  ModelConfig model;
  ChainConfig config;
  ResolvedPriors priors;
  std::vector<std::string> block_labels;
  std::vector<ParameterState> draws;  // chain-major
  std::vector<int> chain_of;
  std::vector<AcceptanceRates> acceptance;  // per chain, post burn-in
  std::vector<int> jitter_events;            // per chain

  int n_chains() const { return static_cast<int>(acceptance.size()); }
  int draws_per_chain() const;
};

PosteriorSample run_chains(const ChainConfig& config, const ModelConfig& model, const Dataset& data,
                           const SamplerOptions& options = {});

// ---------------------------------------------------------------------------
// Flattened draws and convergence diagnostics.

struct ParameterTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // draws x parameters
  std::vector<int> chain_of;
};

/// Column names: beta0, beta1.., gamma_1.., Z_1.. (spatial models), sigma2[_N|_S],
/// tau2, correlation hyperparameters with block suffix, phi_gamma.
ParameterTable parameter_table(const PosteriorSample& sample, const Dataset& data, bool include_latent = true);

/// Split potential scale reduction factor; 1 when all draws coincide.
double split_psrf(const std::vector<Eigen::VectorXd>& chains);
/// Multi-chain autocorrelation ESS with Geyer's initial monotone sequence.
double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);

struct ParameterDiagnostics {
  std::string name;
  double psrf;
  double ess;
};

std::vector<ParameterDiagnostics> diagnostics(const ParameterTable& table);
std::vector<ParameterDiagnostics> diagnostics(const PosteriorSample& sample, const Dataset& data);

/// Draws of one column split by chain.
std::vector<Eigen::VectorXd> chains_of(const ParameterTable& table, int column);

}  // namespace plnspatial
