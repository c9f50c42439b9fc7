#pragma once

// Bundled case studies: rat teratology (binomial, logit link, stratified
// litter variances) and epilepsy (Poisson, log link, subject and visit
// intercepts), with their published posterior summaries as targets.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "miglmm/io.hpp"
#include "miglmm/parallel.hpp"
#include "miglmm/sampler.hpp"

namespace miglmm {

enum class CaseName { Rats, Epilepsy };
enum class Variant { Mi, Conventional };
enum class Scale { Desk, Full };

std::string_view case_name(CaseName c);
std::string_view variant_name(Variant v);
std::string_view scale_name(Scale s);
/// ConfigError for an unknown name.
CaseName parse_case(std::string_view name);
Variant parse_variant(std::string_view name);
Scale parse_scale(std::string_view name);

/// Bundled data and config directories; MIGLMM_DATA_DIR and
/// MIGLMM_CONFIG_DIR in the environment take precedence.
std::filesystem::path bundled_data_dir();
std::filesystem::path bundled_config_dir();
std::filesystem::path case_config_path(CaseName c, Variant v);
std::filesystem::path case_data_path(CaseName c);

BoundModel load_case(CaseName c, Variant v);

/// Desk: rats 110,000 steps / 10,000 burn-in / thin 10, epilepsy
/// 210,000 / 10,000 / thin 20. Full: ten times the post-burn-in length
/// with ten times the thinning (epilepsy burn-in 100,000). Epilepsy runs
/// with consistent proposals.
McmcConfig case_mcmc(CaseName c, Scale s, std::uint64_t seed);

/// One compared quantity. Gating checks decide pass/fail; the others are
/// reported for context.
struct Check {
  std::string name;
  double value = 0.0;
  double reference = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool gating = true;

  bool pass() const { return value >= lower && value <= upper; }
};

struct SeedRun {
  std::uint64_t seed = 0;
  ChainOutput chain;
};

struct VariantReport {
  Variant variant = Variant::Mi;
  std::vector<SeedRun> runs;
  ModelSpec spec;
  /// Posterior over the pooled retained draws of every seed.
  PosteriorSummary pooled;
  std::vector<Check> checks;
};

/// Paired runs with and without consistent beta proposals, identical fixed
/// beta scales and no thinning.
struct MixingComparison {
  double beta_accept_standard = 0.0;
  double beta_accept_consistent = 0.0;
  double iact_standard = 0.0;  // of the tracked coefficient
  double iact_consistent = 0.0;
  std::string coefficient;
  Eigen::VectorXd beta_scale;

  double accept_ratio() const { return beta_accept_consistent / beta_accept_standard; }
  double iact_ratio() const { return iact_standard / iact_consistent; }
};

struct CaseReport {
  CaseName name = CaseName::Rats;
  Scale scale = Scale::Desk;
  std::vector<VariantReport> variants;
  std::vector<Check> cross_checks;  // MI against conventional
  std::vector<Check> mixing_checks;
  std::optional<MixingComparison> mixing;

  bool passed() const;
  /// Human-readable comparison table, one line per check.
  std::string table() const;
  /// Every check as CSV: scope,name,value,reference,lower,upper,gating,pass.
  std::string checks_csv() const;
};

using ProgressLog = std::function<void(const std::string&)>;

/// Pooled rat checks: posterior means of beta, sigma1, sigma2, the
/// Savage-Dickey Bayes factor for trt = 0 (with 0.75x and 1.25x bandwidth
/// sensitivity) and the tail area of the treated-minus-control contrast.
std::vector<Check> rats_checks(Variant v, const ModelSpec& spec, const std::vector<SeedRun>& runs);

/// Pooled epilepsy checks on the slopes and both standard deviations, plus
/// acceptance and IACT context rows.
std::vector<Check> epilepsy_checks(Variant v, const ModelSpec& spec,
                                   const std::vector<SeedRun>& runs);

/// Slopes agree between variants; intercept ordering and magnitudes.
std::vector<Check> epilepsy_cross_checks(const VariantReport& mi, const VariantReport& conventional);

/// Beta scales come from an adaptive pilot of pilot_steps under consistent
/// proposals; both runs then keep them fixed while the other blocks still adapt.
MixingComparison compare_mixing(const BoundModel& model, std::uint64_t seed, long steps,
                                long burn_in, long pilot_steps, int tracked_coefficient);

/// Runs every (variant, seed) fit of a case and compares against the
/// published summaries. Seeds within a variant may run in parallel.
CaseReport reproduce(CaseName c, const std::vector<Variant>& variants, Scale s,
                     const std::vector<std::uint64_t>& seeds, Execution exec = Execution::Parallel,
                     const ProgressLog& log = {}, bool with_mixing = true);

}  // namespace miglmm
