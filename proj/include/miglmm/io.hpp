#pragma once

// File formats: CSV datasets, model configuration (TOML or JSON), draw
// tables and diagnostics.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miglmm/model.hpp"
#include "miglmm/sampler.hpp"

namespace miglmm {

/// Header plus numeric cells of a CSV file. Group columns may hold labels,
/// so cells are also kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;  // per row
  std::vector<int> line;                        // file line of each row

  int column(const std::string& name) const;  // -1 when absent
  std::size_t rows() const { return cells.size(); }
  /// Numeric value of one cell; DataError naming the line otherwise.
  double number(std::size_t row, int col) const;
};

/// Comma-separated, header row first, blank lines skipped, surrounding
/// quotes and whitespace stripped. DataError on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

/// A covariate built from CSV columns. Grammar:
///
///   term   := factor ('*' factor)*
///   factor := number | column | 'log(' column [ '/' number ] ')'
///
/// so "1" is an intercept and "log(base/4)*trt" an interaction.
struct Term {
  std::string name;
  std::string expression;
};

/// Column mapping from a CSV file onto a Dataset.
struct DatasetSchema {
  std::string response;
  std::string trials;  // empty unless Binomial
  std::vector<Term> covariates;
  /// Grouping column per random-effect level; "@row" gives every row its
  /// own group.
  std::vector<std::string> group_columns;
  std::vector<std::string> level_names;
};

/// Throws ConfigError for an expression outside the grammar.
void validate_term(const std::string& expression);

/// Evaluates the schema on a table. DataError (with the file line) for a
/// missing column, a non-numeric cell, y > m or a log of a nonpositive
/// value.
Dataset ingest_table(const CsvTable& table, const DatasetSchema& schema, Family family);
Dataset ingest_csv(const std::filesystem::path& path, const DatasetSchema& schema, Family family);

/// Per-level variance assignment: either one shared variance or a stratum
/// column whose (group-constant) value selects the variance.
struct LevelConfig {
  std::string name;
  std::string column;
  std::string variance;                       // shared variance name
  std::string stratum_column;                 // alternative: per-stratum
  std::map<std::string, std::string> strata;  // stratum value -> variance name
};

struct CovariateConfig {
  Term term;
  NormalPrior prior;
};

struct VarianceConfig {
  std::string name;
  NormalPrior log_prior;
};

/// Parsed model configuration file.
struct ModelConfig {
  Family family = Family::Bernoulli;
  Link link = Link::Logit;
  bool marginally_interpretable = true;
  std::string response;
  std::string trials;
  std::vector<CovariateConfig> covariates;
  std::vector<VarianceConfig> variances;
  std::vector<LevelConfig> levels;
  /// Optional sampler defaults from an [mcmc] table.
  std::optional<McmcConfig> mcmc;

  DatasetSchema schema() const;
};

/// Reads TOML (.toml) or JSON (.json); other extensions are tried as TOML
/// then JSON. ConfigError names the offending key.
ModelConfig load_model_config(const std::filesystem::path& path);
ModelConfig parse_model_config_toml(const std::string& text);
ModelConfig parse_model_config_json(const std::string& text);

struct BoundModel {
  ModelSpec spec;
  Dataset data;
};

/// Ingests the data and resolves stratum maps into a validated ModelSpec.
BoundModel bind_model(const ModelConfig& config, const CsvTable& table);
BoundModel bind_model(const ModelConfig& config, const std::filesystem::path& data_path);

/// Draw table: one column per parameter, one row per retained draw.
struct DrawTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  /// Column by name; DataError when absent.
  const std::vector<double>& column(const std::string& name) const;
};

/// Prefix of log-variance columns in draw files.
inline constexpr const char* kLogVariancePrefix = "log_variance.";

/// Beta columns named after spec.beta_names, then "log_variance.<name>".
DrawTable draw_table(const ModelSpec& spec, const ChainOutput& chain);

/// Shortest round-trip formatting, so rereading gives the same doubles and
/// reruns give identical bytes.
void write_draws_csv(const std::filesystem::path& path, const DrawTable& table);
DrawTable read_draws_csv(const std::filesystem::path& path);

/// Acceptance rates per block, IACT per column, wall time, final scales and
/// warnings, as a JSON document.
std::string diagnostics_json(const ModelSpec& spec, const std::vector<ChainOutput>& chains);

/// Writes text to path through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace miglmm
