#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "plnspatial/design.hpp"
#include "plnspatial/sampler.hpp"

namespace plnspatial {

/// Generating values for `simulate`; decay lengths of 0 are resolved from the
/// locations (phi: a tenth of the largest distance, phi2: half the depth range).
struct TruthSpec {
  double beta0 = 1.6094379124341003;  // log 5
  double sigma2 = 0.5;
  double tau2 = 0.1;
  double phi = 0.0;
  double psi_A = 0.0;
  double psi_R = 1.0;
  double phi2 = 0.0;
  double phi_gamma = 10.0;
  /// Comma-separated covariate coefficients; empty means the default effect sizes.
  std::string coefficients;
};

struct RunConfig {
  ModelId model = ModelId::M0;
  bool circle_arc = false;
  bool restricted = false;
  bool temporal_correlation = false;
  ChainConfig chain;  // carries the seed
  Hyperpriors priors;
  std::filesystem::path data;
  std::filesystem::path out = "out";

  DesignSpec design;
  CovariateSpec covariates;
  TruthSpec truth;

  ModelConfig model_config() const;
};

/// INI text: sections [run], [chain], [priors], [design], [covariates], [truth].
/// Unknown sections or keys raise SchemaError; malformed values ParseError.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

/// The accepted keys, their types and defaults, as INI-style text.
std::string config_schema();

/// The generating state for `model` on `data` (locations and covariates only matter).
ParameterState make_truth(const TruthSpec& spec, const ModelConfig& model, const Dataset& data);

}  // namespace plnspatial
