#pragma once

// Block Metropolis-Hastings over theta = (beta, log variances, u): one
// iteration updates beta, then the log variances, then u group by group.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "miglmm/model.hpp"
#include "miglmm/rng.hpp"

namespace miglmm {

enum class BlockKind { Beta, Alpha, Group };

struct BlockRef {
  BlockKind kind = BlockKind::Beta;
  int level = -1;
  int group = -1;
};

/// A posterior over ParamState, evaluated block by block. log_density(s, b)
/// may drop terms that do not depend on block b; differences between two
/// states that differ only in b must equal differences of the full log
/// posterior.
class BlockTarget {
 public:
  virtual ~BlockTarget() = default;

  virtual ParamState initial_state() const = 0;
  virtual double log_density(const ParamState& state, const BlockRef& block) = 0;

  /// Joint (beta, u) move that leaves every linear predictor unchanged.
  virtual bool supports_consistent_proposals() const { return false; }
  virtual void shift_random_effects(ParamState& candidate, const Eigen::VectorXd& beta_from,
                                    const Eigen::VectorXd& beta_to) const;
};

struct McmcConfig {
  long steps = 110'000;
  long burn_in = 10'000;
  long thin = 10;
  std::uint64_t seed = 1;
  std::vector<double> beta_scale{0.1};   // p entries or one broadcast value
  std::vector<double> alpha_scale{0.3};  // per variance parameter or one value
  std::vector<double> u_scale{0.5};      // per level or one value
  bool adapt = true;       // burn-in-only Robbins-Monro on all blocks
  bool adapt_beta = true;  // lets callers freeze the beta scale alone
  double target_accept = 0.35;
  bool consistent_proposals = false;
  bool keep_u = false;
  long progress_every = 0;  // 0: silent

  /// Throws ConfigError unless burn_in < steps, thin >= 1, scales > 0.
  void validate() const;
  long retained() const { return (steps - burn_in) / thin; }
};

struct BlockCounts {
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct ChainOutput {
  std::vector<Eigen::VectorXd> beta;
  std::vector<Eigen::VectorXd> log_variance;
  std::vector<std::vector<Eigen::VectorXd>> u;  // filled when keep_u
  // post-burn-in acceptance
  BlockCounts beta_counts;
  BlockCounts alpha_counts;
  std::vector<BlockCounts> u_counts;  // per level
  // scales in force after burn-in
  Eigen::VectorXd beta_scale;
  Eigen::VectorXd alpha_scale;
  Eigen::VectorXd u_scale;
  double wall_seconds = 0.0;
  McmcConfig config;
  std::vector<std::string> warnings;

  std::size_t draws() const { return beta.size(); }
  /// Retained values of beta[j].
  std::vector<double> beta_series(int j) const;
  /// Retained values of sqrt(exp(log_variance[k])).
  std::vector<double> sd_series(int k) const;
};

/// Proposal scales for every block, expanded from a McmcConfig.
struct ProposalScales {
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
  Eigen::VectorXd u;

  static ProposalScales from(const McmcConfig& config, int p, int variances, int levels);
};

/// One Metropolis decision on `block`: symmetric normal random walk (log
/// scale for variances), accept with probability min(1, exp(delta)). A
/// non-finite proposal density is a rejection. `consistent` shifts u along
/// with beta. Returns whether the move was accepted; state is unchanged on
/// rejection.
bool mh_block_step(BlockTarget& target, ParamState& state, const BlockRef& block,
                   const ProposalScales& scales, Rng& rng, bool consistent = false);

/// Generic block sampler. Deterministic given config.seed.
ChainOutput run_chain(BlockTarget& target, const McmcConfig& config);

/// GLMM posterior with incremental per-group evaluation and a memo of
/// adjustments on (kappa, tau2).
class GlmmTarget : public BlockTarget {
 public:
  GlmmTarget(ModelSpec spec, Dataset data, Adjuster adjuster = default_adjuster());

  /// ParamState::initial with beta at fixed_effect_mode.
  ParamState initial_state() const override;
  double log_density(const ParamState& state, const BlockRef& block) override;

  bool supports_consistent_proposals() const override;
  void shift_random_effects(ParamState& candidate, const Eigen::VectorXd& beta_from,
                            const Eigen::VectorXd& beta_to) const override;
  /// Throws ConfigError naming the reason consistent proposals do not apply.
  void require_consistent_structure() const;

  double log_likelihood(const ParamState& state);
  const ModelSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }

 private:
  double adjustment(double kappa, double tau2);
  double observation_term(const ParamState& state, int i);

  ModelSpec spec_;
  Dataset data_;
  Adjuster adjuster_;
  std::vector<std::vector<std::vector<int>>> members_;  // level -> group -> rows
  std::vector<int> first_row_;                          // first row of each level-0 group
  std::unordered_map<std::uint64_t, std::unordered_map<std::uint64_t, double>> memo_;
  std::size_t memo_size_ = 0;
};

/// Builds a GlmmTarget and runs one chain. Consistent proposals on an
/// unsupported structure raise ConfigError before the first step.
ChainOutput run_chain(const ModelSpec& spec, const Dataset& data, const McmcConfig& config);

/// Joint candidate for a consistent beta move (see GlmmTarget).
ParamState propose_beta_consistent(const ParamState& state, const Eigen::VectorXd& beta_star,
                                   const ModelSpec& spec, const Dataset& data);

/// Integrated autocorrelation time 1 + 2 sum rho_k, truncated at the first
/// nonpositive sum of an adjacent pair (initial positive sequence). A
/// constant series returns 1 and sets *degenerate. Requires >= 100 values.
double iact(const std::vector<double>& series, bool* degenerate = nullptr);

}  // namespace miglmm
