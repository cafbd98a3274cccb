#include "plnspatial/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "plnspatial/error.hpp"

namespace plnspatial {

namespace {

enum class Type { Int, Real, Bool, Text, IntList };

std::string_view type_name(Type t) {
  switch (t) {
    case Type::Int: return "integer";
    case Type::Real: return "real";
    case Type::Bool: return "boolean";
    case Type::Text: return "string";
    case Type::IntList: return "integer list";
  }
  return "";
}

struct Value {
  std::string text;
  long long i = 0;
  double r = 0.0;
  bool b = false;
  std::vector<int> list;
};

struct Entry {
  std::string section;
  std::string key;
  Type type;
  std::function<void(RunConfig&, const Value&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// shortest text that reads back to the same double
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : "auto"; }

#define INT_FIELD(sec, key, member) \
  Entry{sec, key, Type::Int, [](RunConfig& c, const Value& v) { c.member = static_cast<int>(v.i); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define REAL_FIELD(sec, key, member) \
  Entry{sec, key, Type::Real, [](RunConfig& c, const Value& v) { c.member = v.r; }, \
        [](const RunConfig& c) { return fmt(c.member); }}
#define OPT_FIELD(sec, key, member) \
  Entry{sec, key, Type::Real, [](RunConfig& c, const Value& v) { c.member = v.r; }, \
        [](const RunConfig& c) { return opt(c.member); }}
#define BOOL_FIELD(sec, key, member) \
  Entry{sec, key, Type::Bool, [](RunConfig& c, const Value& v) { c.member = v.b; }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}

const std::vector<Entry>& schema() {
  static const std::vector<Entry> entries = {
      Entry{"run", "model", Type::Text, [](RunConfig& c, const Value& v) { c.model = parse_model_id(v.text); },
            [](const RunConfig& c) { return to_string(c.model); }},
      Entry{"run", "circle_distance", Type::Text,
            [](RunConfig& c, const Value& v) {
              if (v.text != "chord" && v.text != "arc") {
                throw Error(ErrorKind::ParseError, "run.circle_distance must be chord or arc");
              }
              c.circle_arc = v.text == "arc";
            },
            [](const RunConfig& c) { return std::string(c.circle_arc ? "arc" : "chord"); }},
      BOOL_FIELD("run", "restricted", restricted),
      BOOL_FIELD("run", "temporal_correlation", temporal_correlation),
      Entry{"run", "seed", Type::Int,
            [](RunConfig& c, const Value& v) {
              if (v.i < 0) throw Error(ErrorKind::ParseError, "run.seed must be non-negative");
              c.chain.seed = static_cast<std::uint64_t>(v.i);
            },
            [](const RunConfig& c) { return std::to_string(c.chain.seed); }},
      Entry{"run", "data", Type::Text, [](RunConfig& c, const Value& v) { c.data = v.text; },
            [](const RunConfig& c) { return c.data.string(); }},
      Entry{"run", "out", Type::Text, [](RunConfig& c, const Value& v) { c.out = v.text; },
            [](const RunConfig& c) { return c.out.string(); }},

      INT_FIELD("chain", "n_iter", chain.n_iter),
      INT_FIELD("chain", "burn_in", chain.burn_in),
      INT_FIELD("chain", "thin", chain.thin),
      INT_FIELD("chain", "n_chains", chain.n_chains),
      REAL_FIELD("chain", "adapt_target", chain.adapt_target),
      INT_FIELD("chain", "adapt_window", chain.adapt_window),

      REAL_FIELD("priors", "beta_prior_var", priors.beta_prior_var),
      REAL_FIELD("priors", "variance_shape", priors.variance_shape),
      OPT_FIELD("priors", "sigma2_scale", priors.sigma2_scale),
      OPT_FIELD("priors", "tau2_scale", priors.tau2_scale),
      REAL_FIELD("priors", "phi_shape", priors.phi_shape),
      OPT_FIELD("priors", "phi_rate", priors.phi_rate),
      OPT_FIELD("priors", "phi2_rate", priors.phi2_rate),
      OPT_FIELD("priors", "phi_gamma_rate", priors.phi_gamma_rate),
      REAL_FIELD("priors", "psi_R_scale", priors.psi_R.scale),
      REAL_FIELD("priors", "psi_R_shape", priors.psi_R.shape),
      REAL_FIELD("priors", "range_probability", priors.range_probability),

      INT_FIELD("design", "n_locations", design.n_locations),
      INT_FIELD("design", "n_days", design.n_days),
      INT_FIELD("design", "span_days", design.span_days),
      Entry{"design", "cluster_sizes", Type::IntList,
            [](RunConfig& c, const Value& v) { c.design.cluster_sizes = v.list; },
            [](const RunConfig& c) {
              std::string s;
              for (int k : c.design.cluster_sizes) s += (s.empty() ? "" : ",") + std::to_string(k);
              return s.empty() ? std::string("auto") : s;
            }},
      BOOL_FIELD("design", "alternate_shores", design.alternate_shores),
      REAL_FIELD("design", "center_easting", design.center.x),
      REAL_FIELD("design", "center_northing", design.center.y),
      REAL_FIELD("design", "semi_major", design.semi_major),
      REAL_FIELD("design", "semi_minor", design.semi_minor),
      REAL_FIELD("design", "rotation", design.rotation),
      REAL_FIELD("design", "arc_half_angle", design.arc_half_angle),
      REAL_FIELD("design", "band_width", design.band_width),
      REAL_FIELD("design", "jitter", design.jitter),
      REAL_FIELD("design", "min_depth", design.min_depth),
      REAL_FIELD("design", "max_depth", design.max_depth),

      INT_FIELD("covariates", "count", covariates.count),
      BOOL_FIELD("covariates", "depth_first", covariates.depth_first),
      REAL_FIELD("covariates", "cross_correlation", covariates.cross_correlation),
      REAL_FIELD("covariates", "spatial_weight", covariates.spatial_weight),
      REAL_FIELD("covariates", "spatial_range", covariates.spatial_range),
      BOOL_FIELD("covariates", "standardize", covariates.standardize),

      REAL_FIELD("truth", "beta0", truth.beta0),
      REAL_FIELD("truth", "sigma2", truth.sigma2),
      REAL_FIELD("truth", "tau2", truth.tau2),
      REAL_FIELD("truth", "phi", truth.phi),
      REAL_FIELD("truth", "psi_A", truth.psi_A),
      REAL_FIELD("truth", "psi_R", truth.psi_R),
      REAL_FIELD("truth", "phi2", truth.phi2),
      REAL_FIELD("truth", "phi_gamma", truth.phi_gamma),
      Entry{"truth", "coefficients", Type::Text, [](RunConfig& c, const Value& v) { c.truth.coefficients = v.text; },
            [](const RunConfig& c) { return c.truth.coefficients.empty() ? std::string("auto") : c.truth.coefficients; }},
  };
  return entries;
}

#undef INT_FIELD
#undef REAL_FIELD
#undef OPT_FIELD
#undef BOOL_FIELD

Value parse_value(const Entry& e, const std::string& raw) {
  const std::string where = e.section + "." + e.key;
  auto bad = [&] {
    return Error(ErrorKind::ParseError, where + ": '" + raw + "' is not a valid " + std::string(type_name(e.type)));
  };
  Value v;
  v.text = raw;
  const char* end = raw.data() + raw.size();
  switch (e.type) {
    case Type::Int: {
      auto [p, ec] = std::from_chars(raw.data(), end, v.i);
      if (ec != std::errc() || p != end) throw bad();
      break;
    }
    case Type::Real: {
      auto [p, ec] = std::from_chars(raw.data(), end, v.r);
      if (ec != std::errc() || p != end || !std::isfinite(v.r)) throw bad();
      break;
    }
    case Type::Bool:
      if (raw == "true" || raw == "1" || raw == "yes") {
        v.b = true;
      } else if (raw == "false" || raw == "0" || raw == "no") {
        v.b = false;
      } else {
        throw bad();
      }
      break;
    case Type::Text: break;
    case Type::IntList: {
      std::stringstream ss(raw);
      std::string item;
      while (std::getline(ss, item, ',')) {
        int k = 0;
        const auto b = item.find_first_not_of(' ');
        const auto f = item.find_last_not_of(' ');
        if (b == std::string::npos) throw bad();
        item = item.substr(b, f - b + 1);
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), k);
        if (ec != std::errc() || p != item.data() + item.size()) throw bad();
        v.list.push_back(k);
      }
      break;
    }
  }
  return v;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m = plnspatial::model_config(model, circle_arc);
  m.restricted = restricted;
  m.temporal_correlation = temporal_correlation;
  return m;
}

RunConfig parse_run_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, keys] : tree) {
    if (keys.empty()) {
      if (!keys.data().empty()) throw Error(ErrorKind::SchemaError, "key '" + section + "' outside any section");
      continue;
    }
    for (const auto& [key, node] : keys) {
      const auto& entries = schema();
      auto it = std::find_if(entries.begin(), entries.end(),
                             [&](const Entry& e) { return e.section == section && e.key == key; });
      if (it == entries.end()) throw Error(ErrorKind::SchemaError, "unknown key " + section + "." + key);
      const std::string raw = node.get_value<std::string>();
      if (raw == "auto") continue;
      it->set(c, parse_value(*it, raw));
    }
  }
  validate(c.chain);
  if (c.model == ModelId::M0 && c.restricted) {
    throw Error(ErrorKind::SchemaError, "run.restricted needs a spatial model");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  try {
    return parse_run_config(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string config_schema() {
  const RunConfig defaults;
  std::string out, section;
  for (const auto& e : schema()) {
    if (e.section != section) {
      section = e.section;
      out += (out.empty() ? "" : "\n") + std::string("[") + section + "]\n";
    }
    out += e.key + " = " + e.get(defaults) + "    ; " + std::string(type_name(e.type)) + "\n";
  }
  return out;
}

ParameterState make_truth(const TruthSpec& spec, const ModelConfig& model, const Dataset& data) {
  const SpatialLayout layout = make_layout(model, data);
  double dmax = 1.0, qmax = 1.0;
  if (!layout.blocks.empty()) {
    dmax = layout.blocks.front().kernel.max_distance();
    qmax = layout.blocks.front().kernel.max_depth_difference();
  }
  const double phi = spec.phi > 0.0 ? spec.phi : dmax / 10.0;
  const double phi2 = spec.phi2 > 0.0 ? spec.phi2 : (qmax > 0.0 ? qmax / 2.0 : 1.0);
  CorrelationSpec corr = Independence{};
  switch (model.corr) {
    case CorrKind::None:
    case CorrKind::Independence: break;
    case CorrKind::Isotropic: corr = Isotropic{phi}; break;
    case CorrKind::GeomAniso: corr = GeomAniso{phi, {spec.psi_A, spec.psi_R}}; break;
    case CorrKind::CovariateInCorr: corr = CovariateInCorr{phi, phi2}; break;
    case CorrKind::CircleChord: corr = CircleChord{phi}; break;
    case CorrKind::CircleArc: corr = CircleArc{phi}; break;
  }
  ParameterState s = default_truth(model, data, corr);
  s.beta0 = spec.beta0;
  s.tau2 = spec.tau2;
  for (auto& v : s.sigma2) v = spec.sigma2;
  if (model.temporal_correlation) s.phi_gamma = spec.phi_gamma;
  if (!spec.coefficients.empty()) {
    std::vector<double> b;
    std::stringstream ss(spec.coefficients);
    std::string item;
    while (std::getline(ss, item, ',')) {
      double v = 0.0;
      const auto first = item.find_first_not_of(' ');
      if (first == std::string::npos) throw Error(ErrorKind::ParseError, "truth.coefficients: empty entry");
      const char* end = item.data() + item.size();
      auto [p, ec] = std::from_chars(item.data() + first, end, v);
      if (ec != std::errc()) throw Error(ErrorKind::ParseError, "truth.coefficients: '" + item + "'");
      b.push_back(v);
    }
    if (static_cast<int>(b.size()) != data.n_covariates()) {
      throw Error(ErrorKind::SchemaError, "truth.coefficients has " + std::to_string(b.size()) + " values for " +
                                              std::to_string(data.n_covariates()) + " covariates");
    }
    s.beta_star = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  return s;
}

}  // namespace plnspatial
