#include "miglmm/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "miglmm/errors.hpp"

namespace miglmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log h(eta)
double log_lower(Link link, double eta) {
  switch (link) {
    case Link::Logit: return eta >= 0.0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
    case Link::Probit: return log_normal_cdf(eta);
    case Link::CLogLog: return std::log(-std::expm1(-std::exp(eta)));
    default: return std::log(inverse_link(link, eta));
  }
}

// log (1 - h(eta))
double log_upper(Link link, double eta) {
  switch (link) {
    case Link::Logit: return log_lower(Link::Logit, -eta);
    case Link::Probit: return log_normal_cdf(-eta);
    case Link::CLogLog: return -std::exp(eta);
    default: return std::log1p(-inverse_link(link, eta));
  }
}

double binomial_term(double y, double trials, double log_mu, double log_one_minus) {
  double acc = 0.0;
  if (y > 0.0) acc += y * log_mu;
  if (trials - y > 0.0) acc += (trials - y) * log_one_minus;
  return std::isnan(acc) ? kNegInf : acc;
}

// dh/deta
double inverse_link_slope(Link link, double eta) {
  switch (link) {
    case Link::Identity: return 1.0;
    case Link::Log: return std::exp(eta);
    case Link::Probit: return normal_pdf(eta);
    case Link::Logit: {
      const double mu = logistic(eta);
      return mu * (1.0 - mu);
    }
    case Link::CLogLog: return std::exp(eta - std::exp(eta));
    case Link::Sqrt: return 2.0 * eta;
    case Link::Reciprocal: return -1.0 / (eta * eta);
  }
  return 0.0;
}

void require_finite(double v, const char* what, int index) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + what + " at index " + std::to_string(index));
  }
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::Bernoulli: return "bernoulli";
    case Family::Binomial: return "binomial";
    case Family::Poisson: return "poisson";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "bernoulli") return Family::Bernoulli;
  if (name == "binomial") return Family::Binomial;
  if (name == "poisson") return Family::Poisson;
  throw ConfigError("unknown family '" + std::string(name) +
                    "' (expected bernoulli, binomial or poisson)");
}

bool is_supported(Family family, Link link) {
  if (family == Family::Poisson) {
    return link == Link::Log || link == Link::Sqrt || link == Link::Identity;
  }
  return link == Link::Logit || link == Link::Probit || link == Link::CLogLog;
}

int Dataset::group_count(int level) const {
  int top = -1;
  for (int g : groups.at(level)) top = std::max(top, g);
  return top + 1;
}

void Dataset::validate(Family family) const {
  const int rows = n();
  if (x.rows() != rows) {
    throw DataError("design has " + std::to_string(x.rows()) + " rows, expected " +
                    std::to_string(rows));
  }
  if (family == Family::Binomial && static_cast<int>(trials.size()) != rows) {
    throw DataError("binomial data needs one trial count per row");
  }
  for (std::size_t l = 0; l < groups.size(); ++l) {
    if (static_cast<int>(groups[l].size()) != rows) {
      throw DataError("grouping level " + std::to_string(l) + " has " +
                      std::to_string(groups[l].size()) + " entries, expected " +
                      std::to_string(rows));
    }
    for (int i = 0; i < rows; ++i) {
      if (groups[l][i] < 0) throw DataError("negative group index at row " + std::to_string(i + 1));
    }
  }
  for (int i = 0; i < rows; ++i) {
    const double yi = y[i];
    const std::string row = " at row " + std::to_string(i + 1);
    if (!std::isfinite(yi) || yi < 0.0 || yi != std::floor(yi)) {
      throw DataError("response must be a nonnegative integer" + row);
    }
    if (family == Family::Bernoulli && yi > 1.0) throw DataError("bernoulli response above 1" + row);
    if (family == Family::Binomial && yi > trials[i]) {
      throw DataError("response " + std::to_string(yi) + " exceeds trials " +
                      std::to_string(trials[i]) + row);
    }
    for (int j = 0; j < x.cols(); ++j) {
      if (!std::isfinite(x(i, j))) throw DataError("non-finite covariate" + row);
    }
  }
}

bool Dataset::rank_deficient() const {
  if (x.cols() == 0) return false;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  return qr.rank() < x.cols();
}

Dataset slice(const Dataset& data, int begin, int end) {
  Dataset out;
  out.covariate_names = data.covariate_names;
  out.level_names = data.level_names;
  out.y.assign(data.y.begin() + begin, data.y.begin() + end);
  if (!data.trials.empty()) out.trials.assign(data.trials.begin() + begin, data.trials.begin() + end);
  out.x = data.x.middleRows(begin, end - begin);
  for (const auto& level : data.groups) out.groups.emplace_back(level.begin() + begin, level.begin() + end);
  return out;
}

Dataset concatenate(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  out.trials.insert(out.trials.end(), b.trials.begin(), b.trials.end());
  out.x.resize(a.x.rows() + b.x.rows(), a.x.cols());
  out.x << a.x, b.x;
  for (std::size_t l = 0; l < out.groups.size(); ++l) {
    const int offset = a.group_count(static_cast<int>(l));
    for (int g : b.groups[l]) out.groups[l].push_back(g + offset);
  }
  return out;
}

double NormalPrior::log_density(double v) const {
  const double z = v - mean;
  return -0.5 * (std::log(2.0 * M_PI * variance) + z * z / variance);
}

void ModelSpec::validate() const {
  if (!is_supported(family, link)) {
    throw ConfigError("unsupported family/link pair: " + std::string(family_name(family)) + "/" +
                      std::string(link_name(link)));
  }
  if (!beta_names.empty() && beta_names.size() != beta_priors.size()) {
    throw ConfigError("beta names and priors differ in length");
  }
  for (std::size_t j = 0; j < beta_priors.size(); ++j) {
    if (!(beta_priors[j].variance > 0.0)) {
      throw ConfigError("prior variance for beta[" + std::to_string(j) + "] must be > 0");
    }
  }
  for (std::size_t k = 0; k < log_variance_priors.size(); ++k) {
    if (!(log_variance_priors[k].variance > 0.0)) {
      throw ConfigError("prior variance for log variance " + std::to_string(k) + " must be > 0");
    }
  }
  for (const auto& level : levels) {
    for (int k : level.variance_of_group) {
      if (k < 0 || k >= variance_count()) {
        throw ConfigError("level '" + level.name + "' maps a group to variance " +
                          std::to_string(k) + " of " + std::to_string(variance_count()));
      }
    }
  }
}

void ModelSpec::validate(const Dataset& data) const {
  validate();
  data.validate(family);
  if (data.p() != p()) {
    throw ConfigError("model has " + std::to_string(p()) + " coefficients, design has " +
                      std::to_string(data.p()) + " columns");
  }
  for (const auto& level : levels) {
    if (level.data_level < 0 || level.data_level >= static_cast<int>(data.groups.size())) {
      throw ConfigError("level '" + level.name + "' refers to a missing grouping column");
    }
    if (static_cast<int>(level.variance_of_group.size()) != data.group_count(level.data_level)) {
      throw ConfigError("level '" + level.name + "' stratum map has " +
                        std::to_string(level.variance_of_group.size()) + " groups, data has " +
                        std::to_string(data.group_count(level.data_level)));
    }
  }
}

double ParamState::variance(int k) const { return std::exp(log_variance[k]); }

ParamState ParamState::initial(const ModelSpec& spec, const Dataset& data) {
  ParamState s;
  s.beta = Eigen::VectorXd::Zero(spec.p());
  s.log_variance.resize(spec.variance_count());
  for (int k = 0; k < spec.variance_count(); ++k) s.log_variance[k] = spec.log_variance_priors[k].mean;
  for (const auto& level : spec.levels) {
    s.u.push_back(Eigen::VectorXd::Zero(data.group_count(level.data_level)));
  }
  return s;
}

Adjuster default_adjuster() {
  return [](Link link, double kappa, double tau2) { return adjustment_shift(link, kappa, tau2); };
}

double observation_variance(const ModelSpec& spec, const Dataset& data, const ParamState& state,
                            int i) {
  double tau2 = 0.0;
  for (const auto& level : spec.levels) {
    const int g = data.groups[level.data_level][i];
    tau2 += state.variance(level.variance_of_group[g]);
  }
  return tau2;
}

double linear_predictor(const ModelSpec& spec, const Dataset& data, const ParamState& state,
                        int i, const Adjuster& adjuster) {
  const double kappa = data.x.row(i).dot(state.beta);
  double eta = kappa;
  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    eta += state.u[l][data.groups[spec.levels[l].data_level][i]];
  }
  if (spec.marginally_interpretable) {
    eta += adjuster(spec.link, kappa, observation_variance(spec, data, state, i));
  }
  return eta;
}

double conditional_mean(const ModelSpec& spec, const Dataset& data, const ParamState& state,
                        int i, const Adjuster& adjuster) {
  return inverse_link(spec.link, linear_predictor(spec, data, state, i, adjuster));
}

double observation_loglik(Family family, Link link, double y, double trials, double eta) {
  switch (family) {
    case Family::Bernoulli:
      return y > 0.5 ? log_lower(link, eta) : log_upper(link, eta);
    case Family::Binomial:
      return std::lgamma(trials + 1.0) - std::lgamma(y + 1.0) - std::lgamma(trials - y + 1.0) +
             binomial_term(y, trials, log_lower(link, eta), log_upper(link, eta));
    case Family::Poisson: {
      double mu = 0.0;
      double log_mu = 0.0;
      if (link == Link::Log) {
        mu = std::exp(eta);
        log_mu = eta;
      } else if (link == Link::Sqrt) {
        if (eta < 0.0) return kNegInf;
        mu = eta * eta;
        log_mu = 2.0 * std::log(eta);
      } else {
        if (eta < 0.0) return kNegInf;
        mu = eta;
        log_mu = std::log(eta);
      }
      if (mu == 0.0) return y == 0.0 ? 0.0 : kNegInf;
      const double v = y * log_mu - mu - std::lgamma(y + 1.0);
      return std::isnan(v) ? kNegInf : v;
    }
  }
  return kNegInf;
}

double log_likelihood(const ModelSpec& spec, const ParamState& state, const Dataset& data,
                      const Adjuster& adjuster) {
  for (int j = 0; j < state.beta.size(); ++j) require_finite(state.beta[j], "beta", j);
  for (int k = 0; k < state.log_variance.size(); ++k) {
    require_finite(state.log_variance[k], "log variance", k);
  }
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    double eta = 0.0;
    try {
      eta = linear_predictor(spec, data, state, i, adjuster);
    } catch (const ModelUndefined&) {
      return kNegInf;
    }
    require_finite(eta, "linear predictor", i);
    const double trials = data.trials.empty() ? 1.0 : data.trials[i];
    total += observation_loglik(spec.family, spec.link, data.y[i], trials, eta);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double log_prior(const ModelSpec& spec, const ParamState& state) {
  double total = 0.0;
  for (int j = 0; j < spec.p(); ++j) total += spec.beta_priors[j].log_density(state.beta[j]);
  for (int k = 0; k < spec.variance_count(); ++k) {
    total += spec.log_variance_priors[k].log_density(state.log_variance[k]);
  }
  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    const auto& map = spec.levels[l].variance_of_group;
    for (int g = 0; g < state.u[l].size(); ++g) {
      total += NormalPrior{0.0, state.variance(map[g])}.log_density(state.u[l][g]);
    }
  }
  return total;
}

Eigen::VectorXd fixed_effect_mode(const ModelSpec& spec, const Dataset& data) {
  const int p = spec.p();
  const int n = data.n();
  const bool binomial = spec.family != Family::Poisson;
  auto trials = [&](int i) { return data.trials.empty() ? 1.0 : data.trials[i]; };

  Eigen::VectorXd prior_mean(p);
  Eigen::VectorXd prior_precision(p);
  for (int j = 0; j < p; ++j) {
    prior_mean[j] = spec.beta_priors[j].mean;
    prior_precision[j] = 1.0 / spec.beta_priors[j].variance;
  }
  auto objective = [&](const Eigen::VectorXd& beta) {
    double total = 0.0;
    for (int j = 0; j < p; ++j) total += spec.beta_priors[j].log_density(beta[j]);
    for (int i = 0; i < n; ++i) {
      total += observation_loglik(spec.family, spec.link, data.y[i], trials(i), data.x.row(i).dot(beta));
    }
    return std::isnan(total) ? kNegInf : total;
  };

  // start from a ridge regression of the linked, smoothed responses
  Eigen::VectorXd z(n);
  try {
    for (int i = 0; i < n; ++i) {
      const double mu = binomial ? (data.y[i] + 0.5) / (trials(i) + 1.0) : data.y[i] + 0.5;
      z[i] = apply_link(spec.link, mu);
    }
  } catch (const InvalidArgument&) {
    return Eigen::VectorXd::Zero(p);
  }
  Eigen::MatrixXd gram = data.x.transpose() * data.x;
  gram.diagonal() += prior_precision;
  Eigen::VectorXd beta = gram.ldlt().solve(data.x.transpose() * z + prior_precision.cwiseProduct(prior_mean));
  double current = objective(beta);
  if (!std::isfinite(current)) return Eigen::VectorXd::Zero(p);

  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd score = -prior_precision.cwiseProduct(beta - prior_mean);
    Eigen::MatrixXd info = prior_precision.asDiagonal();
    for (int i = 0; i < n; ++i) {
      const double eta = data.x.row(i).dot(beta);
      const double mu = inverse_link(spec.link, eta);
      const double slope = inverse_link_slope(spec.link, eta);
      const double var = std::max(binomial ? mu * (1.0 - mu) : mu, 1e-300);
      const double m = trials(i);
      score += data.x.row(i).transpose() * ((data.y[i] - m * mu) * slope / var);
      info += (m * slope * slope / var) * data.x.row(i).transpose() * data.x.row(i);
    }
    Eigen::VectorXd step = info.ldlt().solve(score);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half, t *= 0.5) {
      const Eigen::VectorXd trial = beta + t * step;
      const double value = objective(trial);
      if (std::isfinite(value) && value >= current) {
        beta = trial;
        current = value;
        improved = true;
        break;
      }
    }
    if (!improved || (t * step).norm() < 1e-10) break;
  }
  return beta.allFinite() ? beta : Eigen::VectorXd::Zero(p);
}

double marginal_mean(const ModelSpec& spec, const Eigen::VectorXd& beta, const Eigen::VectorXd& x) {
  return inverse_link(spec.link, x.dot(beta));
}

}  // namespace miglmm
