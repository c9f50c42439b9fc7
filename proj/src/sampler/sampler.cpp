#include "miglmm/sampler.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "miglmm/errors.hpp"

namespace miglmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr long kRejectWindow = 10'000;
constexpr std::size_t kMemoCapacity = 1 << 15;

Eigen::VectorXd expand(const std::vector<double>& values, int n, const char* what) {
  if (n == 0) return Eigen::VectorXd();
  if (values.size() == 1) return Eigen::VectorXd::Constant(n, values[0]);
  if (static_cast<int>(values.size()) != n) {
    throw ConfigError(std::string(what) + " scale needs 1 or " + std::to_string(n) +
                      " entries, got " + std::to_string(values.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), n);
}

double adaptation_gain(long t) { return 1.0 / std::pow(1.0 + static_cast<double>(t) / 20.0, 0.6); }

}  // namespace

void BlockTarget::shift_random_effects(ParamState&, const Eigen::VectorXd&,
                                       const Eigen::VectorXd&) const {
  throw ConfigError("this target does not support consistent proposals");
}

void McmcConfig::validate() const {
  if (steps <= 0) throw ConfigError("steps must be positive");
  if (burn_in < 0 || burn_in >= steps) {
    throw ConfigError("burn-in must satisfy 0 <= burn_in < steps (burn_in = " +
                      std::to_string(burn_in) + ", steps = " + std::to_string(steps) + ")");
  }
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ConfigError("target acceptance must lie in (0, 1)");
  }
  for (const auto* scales : {&beta_scale, &alpha_scale, &u_scale}) {
    if (scales->empty()) throw ConfigError("proposal scale list is empty");
    for (double s : *scales) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("proposal scales must be > 0");
    }
  }
}

std::vector<double> ChainOutput::beta_series(int j) const {
  std::vector<double> out;
  out.reserve(beta.size());
  for (const auto& b : beta) out.push_back(b[j]);
  return out;
}

std::vector<double> ChainOutput::sd_series(int k) const {
  std::vector<double> out;
  out.reserve(log_variance.size());
  for (const auto& v : log_variance) out.push_back(std::exp(0.5 * v[k]));
  return out;
}

ProposalScales ProposalScales::from(const McmcConfig& config, int p, int variances, int levels) {
  return {expand(config.beta_scale, p, "beta"), expand(config.alpha_scale, variances, "alpha"),
          expand(config.u_scale, levels, "u")};
}

bool mh_block_step(BlockTarget& target, ParamState& state, const BlockRef& block,
                   const ProposalScales& scales, Rng& rng, bool consistent) {
  ParamState candidate = state;
  switch (block.kind) {
    case BlockKind::Beta:
      for (int j = 0; j < candidate.beta.size(); ++j) candidate.beta[j] += scales.beta[j] * rng.normal();
      if (consistent) target.shift_random_effects(candidate, state.beta, candidate.beta);
      break;
    case BlockKind::Alpha:
      for (int k = 0; k < candidate.log_variance.size(); ++k) {
        candidate.log_variance[k] += scales.alpha[k] * rng.normal();
      }
      break;
    case BlockKind::Group:
      candidate.u[block.level][block.group] += scales.u[block.level] * rng.normal();
      break;
  }
  const double current = target.log_density(state, block);
  const double proposed = target.log_density(candidate, block);
  const double log_u = std::log(rng.uniform());
  if (!std::isfinite(proposed)) return false;
  if (proposed - current >= 0.0 || log_u < proposed - current) {
    state = std::move(candidate);
    return true;
  }
  return false;
}

ChainOutput run_chain(BlockTarget& target, const McmcConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  ParamState state = target.initial_state();
  const int p = static_cast<int>(state.beta.size());
  const int variances = static_cast<int>(state.log_variance.size());
  const int levels = static_cast<int>(state.u.size());
  ProposalScales scales = ProposalScales::from(config, p, variances, levels);

  if (config.consistent_proposals && !target.supports_consistent_proposals()) {
    throw ConfigError("consistent proposals requested for an unsupported model structure");
  }
  if (!std::isfinite(target.log_density(state, {BlockKind::Beta}))) {
    throw NumericError("initial state has a non-finite log density");
  }

  const Rng root(config.seed);
  Rng beta_rng = root.split(1);
  Rng alpha_rng = root.split(2);
  Rng u_rng = root.split(3);

  ChainOutput out;
  out.config = config;
  out.u_counts.assign(levels, {});
  const long retained = config.retained();
  out.beta.reserve(retained);
  out.log_variance.reserve(retained);
  if (config.keep_u) out.u.reserve(retained);

  long beta_reject_run = 0;
  bool warned_rejects = false;

  for (long t = 0; t < config.steps; ++t) {
    const bool burning = t < config.burn_in;
    const double gain = adaptation_gain(t);

    const bool beta_ok = mh_block_step(target, state, {BlockKind::Beta}, scales, beta_rng,
                                       config.consistent_proposals);
    beta_reject_run = beta_ok ? 0 : beta_reject_run + 1;
    if (beta_reject_run >= kRejectWindow && !warned_rejects) {
      out.warnings.push_back("beta block rejected every proposal over " +
                             std::to_string(kRejectWindow) + " steps ending at step " +
                             std::to_string(t + 1));
      warned_rejects = true;
    }

    bool alpha_ok = false;
    if (variances > 0) alpha_ok = mh_block_step(target, state, {BlockKind::Alpha}, scales, alpha_rng);

    std::vector<long> level_accepts(levels, 0);
    for (int l = 0; l < levels; ++l) {
      const int groups = static_cast<int>(state.u[l].size());
      for (int g = 0; g < groups; ++g) {
        if (mh_block_step(target, state, {BlockKind::Group, l, g}, scales, u_rng)) ++level_accepts[l];
      }
    }

    if (burning && config.adapt) {
      if (config.adapt_beta) scales.beta *= std::exp(gain * ((beta_ok ? 1.0 : 0.0) - config.target_accept));
      if (variances > 0) {
        scales.alpha *= std::exp(gain * ((alpha_ok ? 1.0 : 0.0) - config.target_accept));
      }
      for (int l = 0; l < levels; ++l) {
        const double frac = static_cast<double>(level_accepts[l]) / std::max<Eigen::Index>(1, state.u[l].size());
        scales.u[l] *= std::exp(gain * (frac - config.target_accept));
      }
    }
    if (!burning) {
      ++out.beta_counts.proposed;
      out.beta_counts.accepted += beta_ok;
      if (variances > 0) {
        ++out.alpha_counts.proposed;
        out.alpha_counts.accepted += alpha_ok;
      }
      for (int l = 0; l < levels; ++l) {
        out.u_counts[l].proposed += state.u[l].size();
        out.u_counts[l].accepted += level_accepts[l];
      }
      if ((t - config.burn_in + 1) % config.thin == 0) {
        out.beta.push_back(state.beta);
        out.log_variance.push_back(state.log_variance);
        if (config.keep_u) out.u.push_back(state.u);
      }
    }
    if (config.progress_every > 0 && (t + 1) % config.progress_every == 0) {
      std::fprintf(stderr, "  step %ld/%ld  beta accept %.3f\n", t + 1, config.steps,
                   out.beta_counts.rate());
    }
  }

  out.beta_scale = scales.beta;
  out.alpha_scale = scales.alpha;
  out.u_scale = scales.u;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

GlmmTarget::GlmmTarget(ModelSpec spec, Dataset data, Adjuster adjuster)
    : spec_(std::move(spec)), data_(std::move(data)), adjuster_(std::move(adjuster)) {
  spec_.validate(data_);
  for (const auto& level : spec_.levels) {
    std::vector<std::vector<int>> rows(data_.group_count(level.data_level));
    for (int i = 0; i < data_.n(); ++i) rows[data_.groups[level.data_level][i]].push_back(i);
    members_.push_back(std::move(rows));
  }
  if (!members_.empty()) {
    for (const auto& rows : members_[0]) first_row_.push_back(rows.empty() ? -1 : rows.front());
  }
}

ParamState GlmmTarget::initial_state() const {
  ParamState s = ParamState::initial(spec_, data_);
  s.beta = fixed_effect_mode(spec_, data_);
  return s;
}

double GlmmTarget::adjustment(double kappa, double tau2) {
  auto& inner = memo_[std::bit_cast<std::uint64_t>(tau2)];
  const auto key = std::bit_cast<std::uint64_t>(kappa);
  auto it = inner.find(key);
  if (it != inner.end()) return it->second;
  const double value = adjuster_(spec_.link, kappa, tau2);
  if (memo_size_ >= kMemoCapacity) {
    memo_.clear();
    memo_size_ = 0;
    memo_[std::bit_cast<std::uint64_t>(tau2)].emplace(key, value);
  } else {
    inner.emplace(key, value);
  }
  ++memo_size_;
  return value;
}

double GlmmTarget::observation_term(const ParamState& state, int i) {
  const double kappa = data_.x.row(i).dot(state.beta);
  double eta = kappa;
  double tau2 = 0.0;
  for (std::size_t l = 0; l < spec_.levels.size(); ++l) {
    const auto& level = spec_.levels[l];
    const int g = data_.groups[level.data_level][i];
    eta += state.u[l][g];
    tau2 += state.variance(level.variance_of_group[g]);
  }
  if (spec_.marginally_interpretable) {
    try {
      eta += adjustment(kappa, tau2);
    } catch (const ModelUndefined&) {
      return kNegInf;
    }
  }
  if (!std::isfinite(eta)) return kNegInf;
  const double trials = data_.trials.empty() ? 1.0 : data_.trials[i];
  return observation_loglik(spec_.family, spec_.link, data_.y[i], trials, eta);
}

double GlmmTarget::log_likelihood(const ParamState& state) {
  double total = 0.0;
  for (int i = 0; i < data_.n(); ++i) {
    total += observation_term(state, i);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double GlmmTarget::log_density(const ParamState& state, const BlockRef& block) {
  if (block.kind == BlockKind::Group) {
    const auto& level = spec_.levels[block.level];
    const double sigma2 = state.variance(level.variance_of_group[block.group]);
    double total = NormalPrior{0.0, sigma2}.log_density(state.u[block.level][block.group]);
    for (int i : members_[block.level][block.group]) total += observation_term(state, i);
    return total;
  }
  for (int k = 0; k < state.log_variance.size(); ++k) {
    if (!std::isfinite(state.log_variance[k])) return kNegInf;
  }
  const double prior = log_prior(spec_, state);
  if (!std::isfinite(prior)) return kNegInf;
  return prior + log_likelihood(state);
}

bool GlmmTarget::supports_consistent_proposals() const {
  try {
    require_consistent_structure();
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

void GlmmTarget::require_consistent_structure() const {
  if (spec_.marginally_interpretable && spec_.link != Link::Log) {
    throw ConfigError("consistent proposals need an adjustment free of x'beta (log link), got " +
                      std::string(link_name(spec_.link)));
  }
  if (spec_.levels.empty() || spec_.levels.size() > 2) {
    throw ConfigError("consistent proposals need one grouping level or a subject level plus a "
                      "per-observation level");
  }
  if (spec_.levels.size() == 2) {
    for (const auto& rows : members_[1]) {
      if (rows.size() != 1) {
        throw ConfigError("second random-effect level must hold one observation per group");
      }
    }
  }
}

void GlmmTarget::shift_random_effects(ParamState& candidate, const Eigen::VectorXd& beta_from,
                                      const Eigen::VectorXd& beta_to) const {
  const Eigen::VectorXd delta = beta_from - beta_to;
  const auto& subject_rows = members_[0];
  for (std::size_t j = 0; j < subject_rows.size(); ++j) {
    const int first = first_row_[j];
    if (first < 0) continue;
    const double first_shift = data_.x.row(first).dot(delta);
    candidate.u[0][j] += first_shift;
    if (spec_.levels.size() == 2) {
      const int obs_level = spec_.levels[1].data_level;
      for (int i : subject_rows[j]) {
        candidate.u[1][data_.groups[obs_level][i]] += data_.x.row(i).dot(delta) - first_shift;
      }
    }
  }
}

ChainOutput run_chain(const ModelSpec& spec, const Dataset& data, const McmcConfig& config) {
  config.validate();
  GlmmTarget target(spec, data);
  if (config.consistent_proposals) target.require_consistent_structure();
  return run_chain(target, config);
}

ParamState propose_beta_consistent(const ParamState& state, const Eigen::VectorXd& beta_star,
                                   const ModelSpec& spec, const Dataset& data) {
  GlmmTarget target(spec, data);
  target.require_consistent_structure();
  ParamState candidate = state;
  candidate.beta = beta_star;
  target.shift_random_effects(candidate, state.beta, beta_star);
  return candidate;
}

}  // namespace miglmm
