#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "plnspatial/confounding.hpp"
#include "plnspatial/evaluation.hpp"
#include "plnspatial/sampler.hpp"

namespace plnspatial {

/// 17 significant digits, shortest exponent form; stable across platforms.
std::string format_number(double v);

// Dataset files: id,easting,northing,shore,geodetic_depth,day_index,julian_day,count,x1..xK

void write_dataset(const Dataset& data, std::ostream& out);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
/// ParseError with the offending line; SchemaError naming missing columns.
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

// Posterior draws: a leading `chain` column, then parameter_table's columns.

void write_draws(const PosteriorSample& sample, const Dataset& data, const std::filesystem::path& path);
ParameterTable read_draws(std::istream& in);
ParameterTable read_draws(const std::filesystem::path& path);

/// Rebuilds parameter states from a table holding the latent Z columns.
PosteriorSample sample_from_table(const ParameterTable& table, const ModelConfig& model, const Dataset& data);

/// Model, chain settings, priors, acceptance rates and jitter events as JSON.
std::string run_metadata(const PosteriorSample& sample, const std::vector<ParameterDiagnostics>& diag);
ModelConfig model_from_metadata(const std::filesystem::path& path);

void write_diagnostics(const std::vector<ParameterDiagnostics>& diag, const std::filesystem::path& path);

void write_scores(const std::vector<ScoreReport>& reports, const std::filesystem::path& path);
std::vector<ScoreReport> read_scores(const std::filesystem::path& path);

/// Ranked table, criteria as columns; `best_*` flags the minimum of each column.
void write_comparison(const std::vector<ScoreReport>& ranked, const std::filesystem::path& path);

void write_coverage(const std::vector<CoverageRow>& rows, const std::filesystem::path& path);
void write_confounding(const std::vector<ConfoundingRow>& rows, const std::filesystem::path& path);
void write_anisotropy(const std::vector<AngleBin>& bins, const std::filesystem::path& path);

std::string sha256_file(const std::filesystem::path& path);
/// manifest.json in `dir` listing every artifact with its size and SHA-256.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::filesystem::path>& artifacts);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace plnspatial
