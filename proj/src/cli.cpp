#include "plnspatial/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <iomanip>
#include <iostream>
#include <optional>

#include "plnspatial/config.hpp"
#include "plnspatial/confounding.hpp"
#include "plnspatial/error.hpp"
#include "plnspatial/evaluation.hpp"
#include "plnspatial/io.hpp"

namespace plnspatial {

namespace fs = std::filesystem;

namespace {

// Flags shared by the commands that build a RunConfig.
struct RunFlags {
  std::string config;
  std::optional<std::string> model;
  std::optional<int> iters, burnin, thin, chains;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, out;
  bool restricted = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "INI run configuration");
    app->add_option("--model", model, "M0..M10");
    app->add_option("--iters", iters, "iterations per chain");
    app->add_option("--burnin", burnin, "burn-in iterations");
    app->add_option("--thin", thin, "thinning interval");
    app->add_option("--chains", chains, "number of chains");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--data", data, "dataset CSV");
    app->add_option("--out", out, "output directory");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
    if (model) c.model = parse_model_id(*model);
    if (iters) c.chain.n_iter = *iters;
    if (burnin) c.chain.burn_in = *burnin;
    if (thin) c.chain.thin = *thin;
    if (chains) c.chain.n_chains = *chains;
    if (seed) c.chain.seed = *seed;
    if (data) c.data = *data;
    if (out) c.out = *out;
    if (restricted) c.restricted = true;
    validate(c.chain);
    return c;
  }
};

Dataset require_data(const RunConfig& c) {
  if (c.data.empty()) throw Error(ErrorKind::InvalidArgument, "no dataset given (--data or run.data)");
  return load_dataset(c.data);
}

ModelConfig model_for_draws(const std::optional<std::string>& model, const fs::path& draws) {
  if (model) return model_config(parse_model_id(*model));
  const fs::path meta = draws.parent_path() / "run.json";
  if (!fs::exists(meta)) {
    throw Error(ErrorKind::InvalidArgument, "no --model given and no run.json next to " + draws.string());
  }
  return model_from_metadata(meta);
}

int cmd_simulate(const RunFlags& flags, std::ostream& out) {
  const RunConfig c = flags.resolve();
  const ModelConfig model = c.model_config();
  Rng rng(c.chain.seed);
  const auto locs = generate_locations(c.design, rng);
  const Eigen::MatrixXd x = generate_covariates(c.covariates, locs, rng);
  const Dataset skeleton = make_dataset(locs, std::vector<int>(locs.size(), 0), x, c.covariates.standardize);
  const ParameterState truth = make_truth(c.truth, model, skeleton);
  const SimulatedData sim = generate_dataset(model, truth, locs, x, rng);

  fs::create_directories(c.out);
  write_dataset(sim.data, c.out / "data.csv");
  PosteriorSample one;
  one.model = model;
  for (const auto& b : make_layout(model, sim.data).blocks) one.block_labels.push_back(b.label);
  one.draws = {sim.truth};
  one.chain_of = {0};
  write_draws(one, sim.data, c.out / "truth.csv");
  write_manifest(c.out, {"data.csv", "truth.csv"});
  out << "simulated " << sim.data.n() << " counts over " << sim.data.n_days << " days from "
      << to_string(model.id) << " into " << c.out.string() << "\n";
  return 0;
}

int cmd_fit(const RunFlags& flags, std::ostream& out) {
  const RunConfig c = flags.resolve();
  const Dataset data = require_data(c);
  const ModelConfig model = c.model_config();
  SamplerOptions opts;
  opts.priors = c.priors;
  const PosteriorSample sample = run_chains(c.chain, model, data, opts);

  std::vector<ParameterDiagnostics> diag;
  if (sample.n_chains() >= 2) diag = diagnostics(sample, data);
  fs::create_directories(c.out);
  write_draws(sample, data, c.out / "draws.csv");
  write_text(c.out / "run.json", run_metadata(sample, diag));
  std::vector<fs::path> files = {"draws.csv", "run.json"};
  if (!diag.empty()) {
    write_diagnostics(diag, c.out / "diagnostics.csv");
    files.push_back("diagnostics.csv");
  }
  write_manifest(c.out, files);
  out << "fitted " << to_string(model.id) << " (" << structure_name(model) << "): " << sample.draws.size()
      << " draws from " << sample.n_chains() << " chains into " << c.out.string() << "\n";
  return 0;
}

int cmd_score(const std::string& data_path, const std::string& draws_path, const std::optional<std::string>& model,
              const std::string& out_dir, std::ostream& out) {
  const Dataset data = load_dataset(data_path);
  const ModelConfig m = model_for_draws(model, draws_path);
  const PosteriorSample sample = sample_from_table(read_draws(fs::path(draws_path)), m, data);
  const ScoreReport r = score_model(sample, data);
  const fs::path dir = out_dir.empty() ? fs::path(draws_path).parent_path() : fs::path(out_dir);
  write_scores({r}, dir / "scores.csv");
  write_manifest(dir, {"scores.csv"});
  out << std::setprecision(6) << r.model << ": DIC " << r.dic << " (Dbar " << r.dbar << ", pD " << r.pd << "), RPS "
      << r.rps << ", LogS " << r.logs << ", DSS " << r.dss << "\n";
  if (!r.capped_sites.empty()) out << r.capped_sites.size() << " sites hit the log-score floor\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& reports, const std::string& out_dir, std::ostream& out) {
  std::vector<ScoreReport> all;
  for (const auto& p : reports) {
    auto r = read_scores(p);
    all.insert(all.end(), r.begin(), r.end());
  }
  if (all.empty()) throw Error(ErrorKind::InvalidArgument, "no score reports given");
  const auto ranked = rank_by_dic(all);
  if (!out_dir.empty()) {
    write_comparison(ranked, fs::path(out_dir) / "comparison.csv");
    write_manifest(out_dir, {"comparison.csv"});
  }
  out << std::left << std::setw(6) << "model" << std::right << std::setw(10) << "Dbar" << std::setw(10) << "pD"
      << std::setw(10) << "DIC" << std::setw(10) << "RPS" << std::setw(10) << "LogS" << std::setw(10) << "DSS\n";
  out << std::fixed;
  for (size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    out << std::left << std::setw(6) << r.model << std::right << std::setprecision(1) << std::setw(10) << r.dbar
        << std::setw(10) << r.pd << std::setw(10) << r.dic << std::setprecision(3) << std::setw(10) << r.rps
        << std::setw(10) << r.logs << std::setw(10) << r.dss << (i == 0 ? "  *best" : "") << "\n";
  }
  return 0;
}

int cmd_confound(const RunFlags& flags, bool study, int reps, const std::string& generator, std::ostream& out) {
  RunConfig c = flags.resolve();
  if (study) {
    StudyConfig s = default_study_config();
    s.n_reps = reps;
    s.seed = c.chain.seed;
    if (flags.model) s.model = c.model;
    if (!flags.config.empty()) {
      s.model = c.model;
      s.design = c.design;
      s.covariates = c.covariates;
      s.chain = c.chain;
      s.sampler.priors = c.priors;
    }
    if (flags.iters) s.chain.n_iter = *flags.iters;
    if (flags.burnin) s.chain.burn_in = *flags.burnin;
    if (flags.thin) s.chain.thin = *flags.thin;
    if (flags.chains) s.chain.n_chains = *flags.chains;
    std::vector<CoverageRow> rows;
    for (Generator g : {Generator::SGLM, Generator::RSR}) {
      if (generator != "both" && generator != to_string(g)) continue;
      auto r = misspecification_study(g, s);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "--generator must be SGLM, RSR or both");
    write_coverage(rows, c.out / "coverage.csv");
    write_manifest(c.out, {"coverage.csv"});
    out << std::fixed << std::setprecision(3);
    for (const auto& r : rows) {
      out << to_string(r.generator) << " -> " << std::left << std::setw(8) << to_string(r.fitter) << std::right
          << r.coefficient << "  coverage " << r.coverage << "  width " << r.mean_width << "\n";
    }
    return 0;
  }

  const Dataset data = require_data(c);
  if (c.model == ModelId::M0) throw Error(ErrorKind::InvalidArgument, "confound needs a spatial model");
  ModelConfig model = c.model_config();
  model.restricted = false;
  SamplerOptions opts;
  opts.priors = c.priors;
  const auto sglm = run_chains(c.chain, model, data, opts);
  const auto rsr = fit_rsr(c.chain, model, data, opts);
  const auto rows = confounding_report(sglm, rsr, data);
  write_confounding(rows, c.out / "confounding.csv");
  write_manifest(c.out, {"confounding.csv"});
  out << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    auto show = [&](const char* name, const IntervalSummary& s) {
      out << "  " << std::left << std::setw(8) << name << std::right << std::setw(9) << s.mean << "  ["
          << s.lower << ", " << s.upper << "]" << (s.overlaps_zero() ? "" : "  *") << "\n";
    };
    out << r.coefficient << "\n";
    show("SGLM", r.sglm);
    show("RSR", r.rsr);
    show("RSR-PPD", r.rsr_ppd);
  }
  return 0;
}

int cmd_aniso(const std::string& data_path, const std::string& draws_path, const std::optional<std::string>& model,
              const AnisotropyOptions& opts, const std::string& out_dir, std::ostream& out) {
  const Dataset data = load_dataset(data_path);
  const ModelConfig m = model_for_draws(model, draws_path);
  const PosteriorSample sample = sample_from_table(read_draws(fs::path(draws_path)), m, data);
  const auto bins = anisotropy_summary(sample, data, opts);
  const fs::path dir = out_dir.empty() ? fs::path(draws_path).parent_path() : fs::path(out_dir);
  write_anisotropy(bins, dir / "anisotropy.csv");
  write_manifest(dir, {"anisotropy.csv"});
  const int peak = peak_bin(bins);
  out << std::fixed << std::setprecision(3);
  for (size_t k = 0; k < bins.size(); ++k) {
    const auto& b = bins[k];
    out << "[" << b.lower << ", " << b.upper << ")  " << b.value << "  n=" << b.n_pairs
        << (b.too_few_pairs ? "  (too few pairs)" : "") << (static_cast<int>(k) == peak ? "  peak" : "") << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Poisson-lognormal spatial count models", "plnspatial"};
  app.require_subcommand(1);

  RunFlags sim_flags, fit_flags, conf_flags;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim_flags.add(simulate);

  auto* fit = app.add_subcommand("fit", "run the MCMC sampler");
  fit_flags.add(fit);
  fit->add_flag("--restricted", fit_flags.restricted, "restricted spatial regression");

  std::string data_path, draws_path, out_dir;
  std::optional<std::string> model;
  auto* score = app.add_subcommand("score", "DIC and scoring rules of a fit");
  score->add_option("--data", data_path, "dataset CSV")->required();
  score->add_option("--draws", draws_path, "posterior draws CSV")->required();
  score->add_option("--model", model, "model id; read from run.json when omitted");
  score->add_option("--out", out_dir, "output directory (default: next to the draws)");

  std::vector<std::string> reports;
  auto* compare = app.add_subcommand("compare", "rank score reports by DIC");
  compare->add_option("reports", reports, "score CSV files")->required();
  compare->add_option("--out", out_dir, "output directory");

  bool study = false;
  int reps = 30;
  std::string generator = "both";
  auto* confound = app.add_subcommand("confound", "SGLM, RSR and RSR-PPD coefficients");
  conf_flags.add(confound);
  confound->add_flag("--study", study, "run the misspecification coverage study");
  confound->add_option("--reps", reps, "replicates for --study");
  confound->add_option("--generator", generator, "SGLM, RSR or both");

  AnisotropyOptions aopts;
  bool no_fold = false;
  auto* aniso = app.add_subcommand("aniso", "binned angle-correlation summary");
  aniso->add_option("--data", data_path, "dataset CSV")->required();
  aniso->add_option("--draws", draws_path, "posterior draws CSV")->required();
  aniso->add_option("--model", model, "model id; read from run.json when omitted");
  aniso->add_option("--bins", aopts.n_bins, "angle bins");
  aniso->add_option("--strata", aopts.n_strata, "distance strata");
  aniso->add_option("--min-pairs", aopts.min_pairs, "pairs needed to report a bin");
  aniso->add_flag("--no-fold", no_fold, "bin orientations over [0, pi) instead of acute angles");
  aniso->add_option("--out", out_dir, "output directory (default: next to the draws)");

  auto* schema = app.add_subcommand("schema", "print the configuration schema with defaults");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_flags, out);
    if (fit->parsed()) return cmd_fit(fit_flags, out);
    if (score->parsed()) return cmd_score(data_path, draws_path, model, out_dir, out);
    if (compare->parsed()) return cmd_compare(reports, out_dir, out);
    if (confound->parsed()) return cmd_confound(conf_flags, study, reps, generator, out);
    if (aniso->parsed()) {
      aopts.fold = !no_fold;
      return cmd_aniso(data_path, draws_path, model, aopts, out_dir, out);
    }
    if (schema->parsed()) {
      out << config_schema();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_numerical() ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace plnspatial
