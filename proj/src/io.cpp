#include "plnspatial/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <json.hpp>
#include <sstream>

#include "plnspatial/error.hpp"

namespace plnspatial {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

double parse_double(const std::string& s, int line, const std::string& column) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) {
    if (s == "nan" || s == "NaN" || s == "NA") return std::numeric_limits<double>::quiet_NaN();
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": column '" + column + "': '" + s +
                                           "' is not a number");
  }
  return v;
}

int parse_int(const std::string& s, int line, const std::string& column) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": column '" + column + "': '" + s +
                                           "' is not an integer");
  }
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  return in;
}

std::string suffixed(const std::string& name, const std::string& label) {
  return label.empty() ? name : name + "_" + label;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error(ErrorKind::IoError, "number formatting failed");
  return {buf, p};
}

// ---------------------------------------------------------------------------

void write_dataset(const Dataset& data, std::ostream& out) {
  out << "id,easting,northing,shore,geodetic_depth,day_index,julian_day,count";
  for (int k = 0; k < data.n_covariates(); ++k) out << ",x" << k + 1;
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    const auto& l = data.locations[static_cast<size_t>(i)];
    out << l.id << ',' << format_number(l.easting) << ',' << format_number(l.northing) << ','
        << (l.shore == Shore::North ? 'N' : 'S') << ',' << format_number(l.geodetic_depth) << ',' << l.day_index
        << ',' << l.julian_day << ',' << data.counts[static_cast<size_t>(i)];
    for (int k = 0; k < data.n_covariates(); ++k) out << ',' << format_number(data.covariates(i, k));
    out << '\n';
  }
}

void write_dataset(const Dataset& data, const fs::path& path) {
  auto out = open_out(path);
  write_dataset(data, out);
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "line 1: empty file");
  const auto header = split(line);
  std::map<std::string, size_t> col;
  for (size_t j = 0; j < header.size(); ++j) col[header[j]] = j;

  const std::vector<std::string> required = {"id",        "easting",    "northing", "shore",
                                             "geodetic_depth", "day_index", "julian_day", "count"};
  std::string missing;
  for (const auto& r : required) {
    if (!col.count(r)) missing += (missing.empty() ? "" : ", ") + r;
  }
  if (!missing.empty()) throw Error(ErrorKind::SchemaError, "missing columns: " + missing);
  std::vector<size_t> xcols;
  for (int k = 1; col.count("x" + std::to_string(k)); ++k) xcols.push_back(col["x" + std::to_string(k)]);

  std::vector<Location> locs;
  std::vector<int> counts;
  std::vector<std::vector<double>> xs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(header.size()) + " fields, found " +
                                             std::to_string(f.size()));
    }
    auto field = [&](const std::string& name) -> const std::string& { return f[col[name]]; };
    Location l;
    l.id = parse_int(field("id"), lineno, "id");
    l.easting = parse_double(field("easting"), lineno, "easting");
    l.northing = parse_double(field("northing"), lineno, "northing");
    const auto& sh = field("shore");
    if (sh == "N" || sh == "north" || sh == "North") {
      l.shore = Shore::North;
    } else if (sh == "S" || sh == "south" || sh == "South") {
      l.shore = Shore::South;
    } else {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": shore must be N or S, got '" + sh + "'");
    }
    l.geodetic_depth = parse_double(field("geodetic_depth"), lineno, "geodetic_depth");
    l.day_index = parse_int(field("day_index"), lineno, "day_index");
    l.julian_day = parse_int(field("julian_day"), lineno, "julian_day");
    const int y = parse_int(field("count"), lineno, "count");
    if (y < 0) throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": negative count");
    std::vector<double> x;
    for (size_t k = 0; k < xcols.size(); ++k) {
      x.push_back(parse_double(f[xcols[k]], lineno, "x" + std::to_string(k + 1)));
    }
    locs.push_back(l);
    counts.push_back(y);
    xs.push_back(std::move(x));
  }
  if (locs.empty()) throw Error(ErrorKind::SchemaError, "no data rows");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(locs.size()), static_cast<Eigen::Index>(xcols.size()));
  for (size_t i = 0; i < xs.size(); ++i) {
    for (size_t k = 0; k < xcols.size(); ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = xs[i][k];
  }
  const bool standardized = looks_standardized(x);
  Dataset d = make_dataset(std::move(locs), std::move(counts), std::move(x), standardized);
  validate(d);
  return d;
}

Dataset load_dataset(const fs::path& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

// ---------------------------------------------------------------------------

void write_draws(const PosteriorSample& sample, const Dataset& data, const fs::path& path) {
  const ParameterTable t = parameter_table(sample, data);
  auto out = open_out(path);
  out << "chain";
  for (const auto& n : t.names) out << ',' << n;
  out << '\n';
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    out << t.chain_of[static_cast<size_t>(r)] + 1;
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) out << ',' << format_number(t.values(r, c));
    out << '\n';
  }
}

ParameterTable read_draws(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "line 1: empty file");
  auto header = split(line);
  if (header.empty() || header.front() != "chain") throw Error(ErrorKind::SchemaError, "missing columns: chain");
  ParameterTable t;
  t.names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(header.size()) + " fields, found " +
                                             std::to_string(f.size()));
    }
    t.chain_of.push_back(parse_int(f[0], lineno, "chain") - 1);
    std::vector<double> v;
    for (size_t j = 1; j < f.size(); ++j) v.push_back(parse_double(f[j], lineno, header[j]));
    rows.push_back(std::move(v));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return t;
}

ParameterTable read_draws(const fs::path& path) {
  auto in = open_in(path);
  return read_draws(in);
}

PosteriorSample sample_from_table(const ParameterTable& table, const ModelConfig& model, const Dataset& data) {
  std::map<std::string, Eigen::Index> col;
  for (size_t j = 0; j < table.names.size(); ++j) col[table.names[j]] = static_cast<Eigen::Index>(j);
  std::vector<std::string> missing;
  auto need = [&](const std::string& n) {
    if (!col.count(n)) missing.push_back(n);
  };

  const SpatialLayout layout = make_layout(model, data);
  const int k = data.n_covariates();
  const int n_days = data.n_days;
  need("beta0");
  for (int j = 1; j <= k; ++j) need("beta" + std::to_string(j));
  for (int t = 1; t <= n_days; ++t) need("gamma_" + std::to_string(t));
  need("tau2");
  std::vector<CorrelationSpec> corr0;
  for (const auto& b : layout.blocks) {
    need(suffixed("sigma2", b.label));
    corr0.push_back(initial_correlation(model, b));
    for (const auto& h : hyperparameters(corr0.back())) need(suffixed(h.name, b.label));
  }
  if (model.spatial()) {
    for (int i = 1; i <= data.n(); ++i) need("Z_" + std::to_string(i));
  }
  if (model.temporal_correlation) need("phi_gamma");
  if (!missing.empty()) {
    std::string msg;
    for (const auto& m : missing) msg += (msg.empty() ? "" : ", ") + m;
    throw Error(ErrorKind::SchemaError, "draws are missing columns: " + msg);
  }

  PosteriorSample s;
  s.model = model;
  for (const auto& b : layout.blocks) s.block_labels.push_back(b.label);
  s.chain_of = table.chain_of;
  int n_chains = 0;
  for (int c : table.chain_of) n_chains = std::max(n_chains, c + 1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.acceptance.assign(static_cast<size_t>(n_chains), AcceptanceRates{nan, nan, {}, {}, {}});
  s.jitter_events.assign(static_cast<size_t>(n_chains), 0);

  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    const auto row = table.values.row(r);
    ParameterState p;
    p.beta0 = row(col["beta0"]);
    p.beta_star.resize(k);
    for (int j = 0; j < k; ++j) p.beta_star(j) = row(col["beta" + std::to_string(j + 1)]);
    p.gamma.resize(n_days);
    for (int t = 0; t < n_days; ++t) p.gamma(t) = row(col["gamma_" + std::to_string(t + 1)]);
    p.tau2 = row(col["tau2"]);
    for (size_t b = 0; b < layout.blocks.size(); ++b) {
      p.sigma2.push_back(row(col[suffixed("sigma2", layout.blocks[b].label)]));
      CorrelationSpec c = corr0[b];
      std::vector<double> v;
      for (const auto& h : hyperparameters(c)) v.push_back(row(col[suffixed(h.name, layout.blocks[b].label)]));
      set_hyperparameters(c, v);
      p.corr.push_back(c);
    }
    if (model.temporal_correlation) p.phi_gamma = row(col["phi_gamma"]);
    p.W.resize(data.n());
    for (int i = 0; i < data.n(); ++i) {
      const double z = model.spatial() ? row(col["Z_" + std::to_string(i + 1)]) : 0.0;
      p.W(i) = p.beta0 + p.gamma(data.locations[static_cast<size_t>(i)].day_index - 1) + z;
    }
    s.draws.push_back(std::move(p));
  }
  return s;
}

// ---------------------------------------------------------------------------

std::string run_metadata(const PosteriorSample& sample, const std::vector<ParameterDiagnostics>& diag) {
  json j;
  j["model"] = to_string(sample.model.id);
  j["domain"] = domain_name(sample.model);
  j["structure"] = structure_name(sample.model);
  j["circle_distance"] = sample.model.corr == CorrKind::CircleArc ? "arc" : "chord";
  j["restricted"] = sample.model.restricted;
  j["temporal_correlation"] = sample.model.temporal_correlation;
  j["chain"] = {{"n_iter", sample.config.n_iter},         {"burn_in", sample.config.burn_in},
                {"thin", sample.config.thin},             {"n_chains", sample.config.n_chains},
                {"seed", sample.config.seed},             {"adapt_target", sample.config.adapt_target},
                {"adapt_window", sample.config.adapt_window}};
  const auto& p = sample.priors;
  json pri;
  pri["beta_prior_var"] = p.beta_prior_var;
  pri["sigma2"] = {{"shape", p.sigma2.shape}, {"scale", p.sigma2.scale}};
  pri["tau2"] = {{"shape", p.tau2.shape}, {"scale", p.tau2.scale}};
  pri["phi"] = json::array();
  for (const auto& g : p.phi) pri["phi"].push_back({{"shape", g.shape}, {"rate", g.rate}});
  pri["phi2"] = json::array();
  for (const auto& g : p.phi2) pri["phi2"].push_back({{"shape", g.shape}, {"rate", g.rate}});
  pri["psi_R"] = {{"scale", p.psi_R.scale}, {"shape", p.psi_R.shape}};
  pri["phi_gamma"] = {{"shape", p.phi_gamma.shape}, {"rate", p.phi_gamma.rate}};
  pri["prelim_residual_variance"] = p.prelim_residual_variance;
  j["priors"] = pri;
  j["block_labels"] = sample.block_labels;
  j["jitter_events"] = sample.jitter_events;
  j["draws_per_chain"] = sample.n_chains() > 0 ? sample.draws_per_chain() : 0;

  json acc = json::array();
  for (const auto& a : sample.acceptance) {
    json c;
    c["beta_star"] = number_or_null(a.beta_star);
    c["intercept_temporal"] = number_or_null(a.intercept_temporal);
    if (!a.W.empty()) {
      double lo = a.W.front(), hi = a.W.front(), sum = 0.0;
      for (double w : a.W) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
        sum += w;
      }
      c["W"] = {{"min", lo}, {"mean", sum / static_cast<double>(a.W.size())}, {"max", hi}};
    }
    json h;
    for (size_t i = 0; i < a.hyper_names.size(); ++i) h[a.hyper_names[i]] = number_or_null(a.hyper[i]);
    c["hyperparameters"] = h;
    acc.push_back(c);
  }
  j["acceptance"] = acc;

  if (!diag.empty()) {
    double worst = 1.0, least = std::numeric_limits<double>::infinity();
    for (const auto& d : diag) {
      if (std::isfinite(d.psrf)) worst = std::max(worst, d.psrf);
      least = std::min(least, d.ess);
    }
    j["diagnostics"] = {{"max_psrf", worst}, {"min_ess", number_or_null(least)}};
  }
  return j.dump(2) + "\n";
}

ModelConfig model_from_metadata(const fs::path& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  if (!j.contains("model")) throw Error(ErrorKind::SchemaError, path.string() + ": missing key model");
  const bool arc = j.value("circle_distance", std::string("chord")) == "arc";
  ModelConfig m = model_config(parse_model_id(j["model"].get<std::string>()), arc);
  m.restricted = j.value("restricted", false);
  m.temporal_correlation = j.value("temporal_correlation", false);
  return m;
}

void write_diagnostics(const std::vector<ParameterDiagnostics>& diag, const fs::path& path) {
  auto out = open_out(path);
  out << "parameter,psrf,ess\n";
  for (const auto& d : diag) out << d.name << ',' << format_number(d.psrf) << ',' << format_number(d.ess) << '\n';
}

void write_scores(const std::vector<ScoreReport>& reports, const fs::path& path) {
  auto out = open_out(path);
  out << "model,dbar,pd,dic,rps,logs,dss,capped_sites\n";
  for (const auto& r : reports) {
    out << r.model << ',' << format_number(r.dbar) << ',' << format_number(r.pd) << ',' << format_number(r.dic) << ','
        << format_number(r.rps) << ',' << format_number(r.logs) << ',' << format_number(r.dss) << ','
        << r.capped_sites.size() << '\n';
  }
}

std::vector<ScoreReport> read_scores(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": line 1: empty file");
  const auto header = split(line);
  std::map<std::string, size_t> col;
  for (size_t j = 0; j < header.size(); ++j) col[header[j]] = j;
  std::string missing;
  for (const char* c : {"model", "dbar", "pd", "dic", "rps", "logs", "dss"}) {
    if (!col.count(c)) missing += (missing.empty() ? "" : ", ") + std::string(c);
  }
  if (!missing.empty()) throw Error(ErrorKind::SchemaError, path.string() + ": missing columns: " + missing);
  std::vector<ScoreReport> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::ParseError, path.string() + ": line " + std::to_string(lineno) + ": wrong field count");
    }
    ScoreReport r;
    r.model = f[col["model"]];
    r.dbar = parse_double(f[col["dbar"]], lineno, "dbar");
    r.pd = parse_double(f[col["pd"]], lineno, "pd");
    r.dic = parse_double(f[col["dic"]], lineno, "dic");
    r.rps = parse_double(f[col["rps"]], lineno, "rps");
    r.logs = parse_double(f[col["logs"]], lineno, "logs");
    r.dss = parse_double(f[col["dss"]], lineno, "dss");
    out.push_back(r);
  }
  return out;
}

void write_comparison(const std::vector<ScoreReport>& ranked, const fs::path& path) {
  auto best = [&](auto get) {
    size_t b = 0;
    for (size_t i = 1; i < ranked.size(); ++i) {
      if (get(ranked[i]) < get(ranked[b])) b = i;
    }
    return b;
  };
  const size_t b_dic = best([](const ScoreReport& r) { return r.dic; });
  const size_t b_rps = best([](const ScoreReport& r) { return r.rps; });
  const size_t b_logs = best([](const ScoreReport& r) { return r.logs; });
  const size_t b_dss = best([](const ScoreReport& r) { return r.dss; });
  auto out = open_out(path);
  out << "rank,model,dbar,pd,dic,rps,logs,dss,best_dic,best_rps,best_logs,best_dss\n";
  for (size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    out << i + 1 << ',' << r.model << ',' << format_number(r.dbar) << ',' << format_number(r.pd) << ','
        << format_number(r.dic) << ',' << format_number(r.rps) << ',' << format_number(r.logs) << ','
        << format_number(r.dss) << ',' << (i == b_dic) << ',' << (i == b_rps) << ',' << (i == b_logs) << ','
        << (i == b_dss) << '\n';
  }
}

void write_coverage(const std::vector<CoverageRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << "generator,fitter,coefficient,coverage,mean_width,n_reps\n";
  for (const auto& r : rows) {
    out << to_string(r.generator) << ',' << to_string(r.fitter) << ',' << r.coefficient << ','
        << format_number(r.coverage) << ',' << format_number(r.mean_width) << ',' << r.n_reps << '\n';
  }
}

void write_confounding(const std::vector<ConfoundingRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << "coefficient,method,mean,lower,upper,width\n";
  for (const auto& r : rows) {
    const std::pair<const char*, const IntervalSummary*> parts[] = {
        {"SGLM", &r.sglm}, {"RSR", &r.rsr}, {"RSR-PPD", &r.rsr_ppd}};
    for (const auto& [name, s] : parts) {
      out << r.coefficient << ',' << name << ',' << format_number(s->mean) << ',' << format_number(s->lower) << ','
          << format_number(s->upper) << ',' << format_number(s->width()) << '\n';
    }
  }
}

void write_anisotropy(const std::vector<AngleBin>& bins, const fs::path& path) {
  const int peak = peak_bin(bins);
  auto out = open_out(path);
  out << "lower,upper,value,n_pairs,too_few_pairs,peak\n";
  for (size_t k = 0; k < bins.size(); ++k) {
    const auto& b = bins[k];
    out << format_number(b.lower) << ',' << format_number(b.upper) << ',' << format_number(b.value) << ','
        << b.n_pairs << ',' << b.too_few_pairs << ',' << (static_cast<int>(k) == peak) << '\n';
  }
}

// ---------------------------------------------------------------------------

std::string sha256_file(const fs::path& path) {
  auto in = open_in(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorKind::IoError, "SHA-256 unavailable");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

void write_manifest(const fs::path& dir, const std::vector<fs::path>& artifacts) {
  // keep artifacts listed by earlier commands writing to the same directory
  std::vector<std::string> paths;
  const fs::path existing = dir / "manifest.json";
  if (fs::exists(existing)) {
    try {
      std::ifstream in(existing);
      const json old = json::parse(in);
      for (const auto& f : old.at("artifacts")) paths.push_back(f.at("path").get<std::string>());
    } catch (const json::exception&) {
      paths.clear();
    }
  }
  for (const auto& a : artifacts) {
    const std::string rel = fs::relative(a.is_absolute() ? a : dir / a, dir).generic_string();
    if (std::find(paths.begin(), paths.end(), rel) == paths.end()) paths.push_back(rel);
  }
  json files = json::array();
  for (const auto& a : paths) {
    const fs::path full = dir / a;
    if (!fs::exists(full)) continue;
    files.push_back({{"path", fs::relative(full, dir).generic_string()},
                     {"bytes", fs::file_size(full)},
                     {"sha256", sha256_file(full)}});
  }
  write_text(dir / "manifest.json", json{{"artifacts", files}}.dump(2) + "\n");
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace plnspatial
