#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "miglmm/adjust.hpp"
#include "miglmm/cases.hpp"
#include "miglmm/cli.hpp"
#include "miglmm/errors.hpp"
#include "miglmm/inference.hpp"
#include "miglmm/io.hpp"
#include "miglmm/lni.hpp"
#include "miglmm/manifest.hpp"
#include "miglmm/oracle.hpp"
#include "miglmm/parallel.hpp"

namespace miglmm {

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string out;
  bool quiet = false;
};

class Context {
 public:
  Context(const Globals& g, std::ostream& out, std::ostream& err) : g_(g), out_(out), err_(err) {}

  void note(const std::string& msg) const {
    if (!g_.quiet) err_ << msg << "\n";
  }
  void warn(const std::string& msg) const { err_ << "warning: " << msg << "\n"; }

  /// Writes text to --out (or the given override) if set, else to stdout.
  void emit(const std::string& text, const std::string& path) const {
    if (path.empty()) {
      out_ << text;
      return;
    }
    write_file_atomic(path, text);
    note("wrote " + path);
  }

  const Globals& g() const { return g_; }
  std::ostream& out() const { return out_; }

 private:
  const Globals& g_;
  std::ostream& out_;
  std::ostream& err_;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
}

std::vector<double> number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& p : split(text, ',')) out.push_back(to_double(p, what));
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

/// "lo:hi:step" (inclusive, step > 0) or a comma list.
std::vector<double> step_grid(const std::string& text, const std::string& what) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) return number_list(text, what);
  const double lo = to_double(parts[0], what);
  const double hi = to_double(parts[1], what);
  const double step = to_double(parts[2], what);
  if (!(step > 0.0) || hi < lo) throw ConfigError(what + ": need lo <= hi and step > 0");
  std::vector<double> out;
  const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

/// "lo:hi:count" with count >= 2 points, endpoints included.
std::vector<double> count_grid(const std::string& text, const std::string& what) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ConfigError(what + " must be lo:hi:count");
  const double lo = to_double(parts[0], what);
  const double hi = to_double(parts[1], what);
  const double count = to_double(parts[2], what);
  if (count < 2 || count != std::floor(count) || hi < lo) {
    throw ConfigError(what + ": need lo <= hi and an integer count >= 2");
  }
  std::vector<double> out;
  const long n = static_cast<long>(count);
  for (long i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
  return out;
}

std::string g17(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string g6(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string model;
  std::string data;
  long steps = -1;
  long burn_in = -1;
  long thin = -1;
  int chains = 1;
  bool consistent = false;
  bool serial = false;
};

int cmd_fit(const Context& ctx, const FitArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest;
  manifest.command = "fit";
  manifest.arguments = argv;
  manifest.started = utc_timestamp();
  manifest.version = tool_version();

  const ModelConfig config = load_model_config(a.model);
  if (!std::filesystem::exists(a.data)) throw DataError("data file not found: " + a.data);
  const BoundModel model = bind_model(config, std::filesystem::path(a.data));
  if (model.data.rank_deficient()) ctx.warn("design matrix is rank deficient");

  McmcConfig mc = config.mcmc.value_or(McmcConfig{});
  if (a.steps >= 0) mc.steps = a.steps;
  if (a.burn_in >= 0) mc.burn_in = a.burn_in;
  if (a.thin >= 0) mc.thin = a.thin;
  if (a.consistent) mc.consistent_proposals = true;
  mc.seed = ctx.g().seed;
  mc.validate();

  const std::filesystem::path dir = ctx.g().out.empty() ? "fit-output" : ctx.g().out;
  std::filesystem::create_directories(dir);
  ctx.note("fitting " + std::to_string(a.chains) + " chain(s) of " + std::to_string(mc.steps) +
           " steps, seed " + std::to_string(mc.seed));
  const auto chains = run_chains(model.spec, model.data, mc, a.chains,
                                 a.serial ? Execution::Serial : Execution::Parallel);

  for (int c = 0; c < a.chains; ++c) {
    const std::string name = "chain_" + std::to_string(c + 1) + ".csv";
    write_draws_csv(dir / name, draw_table(model.spec, chains[c]));
    manifest.outputs.push_back(name);
    manifest.seeds.push_back(chains[c].config.seed);
    for (const auto& w : chains[c].warnings) ctx.warn("chain " + std::to_string(c + 1) + ": " + w);
  }
  write_file_atomic(dir / "diagnostics.json", diagnostics_json(model.spec, chains));
  manifest.outputs.push_back("diagnostics.json");

  std::ostringstream summary;
  summary << "parameter,mean,sd,tail_above_0\n";
  ChainOutput pooled;
  for (const auto& c : chains) {
    pooled.beta.insert(pooled.beta.end(), c.beta.begin(), c.beta.end());
    pooled.log_variance.insert(pooled.log_variance.end(), c.log_variance.begin(),
                               c.log_variance.end());
  }
  for (const auto& p : summarize_chain(model.spec, pooled).parameters) {
    summary << p.name << "," << g17(p.mean) << "," << g17(p.sd) << "," << g17(p.tail_above[0])
            << "\n";
  }
  write_file_atomic(dir / "summary.csv", summary.str());
  manifest.outputs.push_back("summary.csv");

  manifest.config_hash = sha256_file(a.model);
  manifest.data_hash = sha256_file(a.data);
  write_manifest(dir, manifest);
  ctx.out() << summary.str();
  ctx.note("outputs in " + dir.string());
  return kExitOk;
}

// ---- adjust ----------------------------------------------------------------

struct AdjustArgs {
  std::string link;
  std::vector<double> kappa;
  std::string kappa_grid;
  double tau2 = -1.0;
  std::vector<double> sigma;
  std::string mixture;
  double shape = -1.0;
};

NormalMixtureLaw parse_mixture(const std::string& text) {
  NormalMixtureLaw law;
  for (const auto& comp : split(text, ',')) {
    const auto f = split(comp, ':');
    if (f.size() != 3) throw ConfigError("--mixture components are weight:mean:variance");
    law.weights.push_back(to_double(f[0], "--mixture weight"));
    law.means.push_back(to_double(f[1], "--mixture mean"));
    law.variances.push_back(to_double(f[2], "--mixture variance"));
  }
  try {
    validate_zero_mean(law);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("--mixture: ") + e.what());
  }
  return law;
}

int cmd_adjust(const Context& ctx, const AdjustArgs& a) {
  const Link link = parse_link(a.link);
  std::vector<double> kappas = a.kappa;
  if (!a.kappa_grid.empty()) {
    const auto grid = count_grid(a.kappa_grid, "--kappa-grid");
    kappas.insert(kappas.end(), grid.begin(), grid.end());
  }
  if (kappas.empty()) throw ConfigError("give --kappa or --kappa-grid");

  const int sources = (a.tau2 >= 0.0) + !a.sigma.empty() + !a.mixture.empty() + (a.shape > 0.0);
  if (sources != 1) {
    throw ConfigError("give exactly one of --tau2, --sigma, --mixture or --shape");
  }
  RandomEffectSpec re;
  if (!a.mixture.empty()) {
    re = RandomEffectSpec::mixture(parse_mixture(a.mixture));
  } else if (a.shape > 0.0) {
    if (link != Link::Reciprocal) throw ConfigError("--shape applies to the reciprocal link only");
    re = RandomEffectSpec::gamma_shape(a.shape);
  } else {
    double tau2 = a.tau2;
    if (!a.sigma.empty()) {
      tau2 = 0.0;
      for (double s : a.sigma) tau2 += s * s;
    }
    if (link == Link::Reciprocal) throw ConfigError("the reciprocal link takes --shape");
    re = RandomEffectSpec::scalar_normal(tau2);
  }

  std::ostringstream csv;
  csv << "link,kappa,tau2,adjustment,marginal_mean,target,residual\n";
  for (double kappa : kappas) {
    const Adjustment adj = compute_adjustment(link, kappa, re);
    const double mean = marginal_mean_check(link, kappa, re, adj);
    const double target = inverse_link(link, kappa);
    csv << link_name(link) << "," << g17(kappa) << "," << g17(adj.tau2) << "," << g17(adj.value)
        << "," << g17(mean) << "," << g17(target) << "," << g17(mean - target) << "\n";
  }
  ctx.emit(csv.str(), ctx.g().out);
  return kExitOk;
}

// ---- integrate-bench -------------------------------------------------------

struct BenchArgs {
  std::string sigma_grid = "0.05:4.00:0.05";
  int intervals = 4;
  int points = 1000;
  std::string methods = "hybrid,ms,gh30,gh100";
  bool serial = false;
};

int cmd_integrate_bench(const Context& ctx, const BenchArgs& a) {
  if (a.intervals < 1 || a.points < 2) throw ConfigError("need --intervals >= 1 and --points >= 2");
  const auto sigmas = step_grid(a.sigma_grid, "--sigma-grid");
  for (double s : sigmas) {
    if (!(s > 0.0)) throw ConfigError("--sigma-grid values must be > 0");
  }
  const auto methods = split(a.methods, ',');
  if (methods.empty()) throw ConfigError("--methods is empty");
  for (const auto& m : methods) {
    if (m == "hybrid" || m == "ms" || m == "gold") continue;
    if (m.rfind("gh", 0) == 0) {
      const double order = to_double(m.substr(2), "--methods gh order");
      if (order < 1 || order > 1000 || order != std::floor(order)) {
        throw ConfigError("--methods: gh order must be an integer in [1, 1000]");
      }
      continue;
    }
    throw ConfigError("--methods: unknown method '" + m + "' (hybrid, ms, gold, gh<order>)");
  }
  const Execution exec = a.serial ? Execution::Serial : Execution::Parallel;

  std::ostringstream csv;
  csv << "sigma,interval,method,max_error,seconds\n";
  for (double s : sigmas) {
    const double s2 = s * s;
    for (int k = 0; k < a.intervals; ++k) {
      std::vector<double> mu(a.points);
      for (int i = 0; i < a.points; ++i) {
        mu[i] = s2 * (k + static_cast<double>(i) / (a.points - 1));
      }
      std::vector<double> gold(a.points);
      for_each_index(a.points, [&](long i) { gold[i] = oracle::phi_gold(mu[i], s2); }, exec);
      for (const auto& m : methods) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<double> v;
        if (m == "hybrid") {
          v = phi_hybrid_batch(mu, s2, exec);
        } else if (m == "ms") {
          v.resize(a.points);
          for_each_index(a.points, [&](long i) { v[i] = phi_ms(mu[i], s2); }, exec);
        } else if (m == "gold") {
          v.resize(a.points);
          for_each_index(a.points, [&](long i) { v[i] = oracle::phi_gold(mu[i], s2); }, exec);
        } else {
          v = phi_gh_batch(mu, s2, std::stoi(m.substr(2)), exec);
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double worst = 0.0;
        for (int i = 0; i < a.points; ++i) worst = std::max(worst, std::abs(v[i] - gold[i]));
        csv << g6(s) << ",[" << k << "s2;" << k + 1 << "s2]," << m << "," << g6(worst) << ","
            << g6(secs) << "\n";
      }
    }
  }
  ctx.emit(csv.str(), ctx.g().out);
  return kExitOk;
}

// ---- summarize / bf --------------------------------------------------------

DrawTable load_draws(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("give at least one --draws file");
  DrawTable pooled;
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) throw DataError("draws file not found: " + p);
    DrawTable t = read_draws_csv(p);
    if (pooled.names.empty()) {
      pooled = std::move(t);
      continue;
    }
    if (t.names != pooled.names) throw DataError("draw files disagree on columns: " + p);
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      pooled.columns[j].insert(pooled.columns[j].end(), t.columns[j].begin(), t.columns[j].end());
    }
  }
  if (pooled.rows() == 0) throw DataError("draw files hold no rows");
  // standard-deviation views of the log-variance columns
  const std::string prefix = kLogVariancePrefix;
  const std::size_t cols = pooled.names.size();
  for (std::size_t j = 0; j < cols; ++j) {
    if (pooled.names[j].rfind(prefix, 0) != 0) continue;
    std::vector<double> sd;
    for (double lv : pooled.columns[j]) sd.push_back(std::exp(0.5 * lv));
    pooled.names.push_back("sd." + pooled.names[j].substr(prefix.size()));
    pooled.columns.push_back(std::move(sd));
  }
  return pooled;
}

std::string density_csv(const DrawTable& t, const std::vector<std::string>& names, int points,
                        double scale) {
  std::ostringstream csv;
  csv << "parameter,x,density\n";
  for (const auto& name : names) {
    const auto& col = t.column(name);
    const double h = scale * silverman_bandwidth(col);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
      grid[i] = (*lo - 3 * h) + (*hi - *lo + 6 * h) * i / (points - 1);
    }
    const auto d = kde_curve(col, grid, scale);
    for (int i = 0; i < points; ++i) csv << name << "," << g17(grid[i]) << "," << g17(d[i]) << "\n";
  }
  return csv.str();
}

struct SummarizeArgs {
  std::vector<std::string> draws;
  std::string thresholds = "0";
  std::string density_out;
  int grid_points = 200;
};

int cmd_summarize(const Context& ctx, const SummarizeArgs& a) {
  const DrawTable t = load_draws(a.draws);
  const auto thresholds = number_list(a.thresholds, "--thresholds");
  std::ostringstream csv;
  csv << "parameter,mean,sd";
  for (double th : thresholds) csv << ",tail_above_" << g6(th);
  csv << ",iact\n";
  for (std::size_t j = 0; j < t.names.size(); ++j) {
    const auto s = summarize(t.names[j], t.columns[j], thresholds);
    csv << s.name << "," << g17(s.mean) << "," << g17(s.sd);
    for (double v : s.tail_above) csv << "," << g17(v);
    // IACT is only meaningful along one chain
    if (a.draws.size() == 1 && t.rows() >= 100) {
      csv << "," << g17(iact(t.columns[j]));
    } else {
      csv << ",";
    }
    csv << "\n";
  }
  ctx.emit(csv.str(), ctx.g().out);
  if (!a.density_out.empty()) {
    if (a.grid_points < 2) throw ConfigError("--grid-points must be >= 2");
    write_file_atomic(a.density_out, density_csv(t, t.names, a.grid_points, 1.0));
    ctx.note("wrote " + a.density_out);
  }
  return kExitOk;
}

struct BfArgs {
  std::vector<std::string> draws;
  std::string parameter;
  std::string model;
  double prior_mean = 0.0;
  double prior_variance = -1.0;
  double at = 0.0;
  std::string scales = "0.75,1,1.25";
  std::string density_out;
  int grid_points = 200;
};

int cmd_bf(const Context& ctx, const BfArgs& a) {
  NormalPrior prior{a.prior_mean, a.prior_variance};
  if (!a.model.empty()) {
    const ModelConfig config = load_model_config(a.model);
    bool found = false;
    for (const auto& c : config.covariates) {
      if (c.term.name == a.parameter) {
        prior = c.prior;
        found = true;
      }
    }
    if (!found) throw ConfigError("model has no coefficient '" + a.parameter + "'");
  }
  if (!(prior.variance > 0.0)) throw ConfigError("give --prior-variance > 0 or --model");
  const DrawTable t = load_draws(a.draws);
  const auto& col = t.column(a.parameter);
  std::ostringstream csv;
  csv << "parameter,at,bandwidth_scale,bayes_factor\n";
  for (double s : number_list(a.scales, "--scales")) {
    if (!(s > 0.0)) throw ConfigError("--scales must be > 0");
    csv << a.parameter << "," << g17(a.at) << "," << g6(s) << ","
        << g17(savage_dickey_bf(col, prior, a.at, s)) << "\n";
  }
  ctx.emit(csv.str(), ctx.g().out);
  if (!a.density_out.empty()) {
    if (a.grid_points < 2) throw ConfigError("--grid-points must be >= 2");
    std::string text = density_csv(t, {a.parameter}, a.grid_points, 1.0);
    // prior curve on the same span, for the ratio at a glance
    const double sd = std::sqrt(prior.variance);
    std::ostringstream prior_rows;
    for (int i = 0; i < a.grid_points; ++i) {
      const double x = prior.mean - 4 * sd + 8 * sd * i / (a.grid_points - 1);
      prior_rows << "prior," << g17(x) << "," << g17(std::exp(prior.log_density(x))) << "\n";
    }
    write_file_atomic(a.density_out, text + prior_rows.str());
    ctx.note("wrote " + a.density_out);
  }
  return kExitOk;
}

// ---- reproduce -------------------------------------------------------------

struct ReproduceArgs {
  std::string case_name;
  std::string variant = "both";
  std::string scale = "desk";
  std::string seeds;
  bool no_mixing = false;
  bool serial = false;
};

int cmd_reproduce(const Context& ctx, const ReproduceArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest;
  manifest.command = "reproduce";
  manifest.arguments = argv;
  manifest.started = utc_timestamp();
  manifest.version = tool_version();

  const CaseName c = parse_case(a.case_name);
  const Scale s = parse_scale(a.scale);
  std::vector<Variant> variants;
  if (a.variant == "both") {
    variants = {Variant::Mi, Variant::Conventional};
  } else {
    variants = {parse_variant(a.variant)};
  }
  std::vector<std::uint64_t> seeds;
  if (a.seeds.empty()) {
    seeds = {ctx.g().seed};
  } else {
    for (const auto& p : split(a.seeds, ',')) {
      const double v = to_double(p, "--seeds");
      if (v < 0 || v != std::floor(v)) throw ConfigError("--seeds must be nonnegative integers");
      seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }

  const std::filesystem::path base = ctx.g().out.empty() ? "runs" : ctx.g().out;
  const auto dir = create_run_directory(
      base, std::string(case_name(c)) + "-" + a.variant + "-" + std::string(scale_name(s)));
  ctx.note("run directory " + dir.string());

  const CaseReport report =
      reproduce(c, variants, s, seeds, a.serial ? Execution::Serial : Execution::Parallel,
                [&](const std::string& m) { ctx.note(m); }, !a.no_mixing);

  std::string config_bytes;
  for (const auto& v : report.variants) {
    for (const auto& r : v.runs) {
      const std::string name = "draws_" + std::string(variant_name(v.variant)) + "_seed" +
                               std::to_string(r.seed) + ".csv";
      write_draws_csv(dir / name, draw_table(v.spec, r.chain));
      manifest.outputs.push_back(name);
    }
    std::vector<ChainOutput> chains;
    for (const auto& r : v.runs) chains.push_back(r.chain);
    const std::string diag = "diagnostics_" + std::string(variant_name(v.variant)) + ".json";
    write_file_atomic(dir / diag, diagnostics_json(v.spec, chains));
    manifest.outputs.push_back(diag);
    config_bytes += sha256_file(case_config_path(c, v.variant));
  }
  write_file_atomic(dir / "checks.csv", report.checks_csv());
  write_file_atomic(dir / "report.txt", report.table());
  manifest.outputs.push_back("checks.csv");
  manifest.outputs.push_back("report.txt");
  manifest.seeds = seeds;
  manifest.config_hash = sha256_hex(config_bytes);
  manifest.data_hash = sha256_file(case_data_path(c));
  write_manifest(dir, manifest);

  ctx.out() << report.table();
  return report.passed() ? kExitOk : kExitAcceptance;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Globals g;
  CLI::App app{"Marginally interpretable generalized linear mixed models", "miglmm"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Random seed (default 1)")->capture_default_str();
  app.add_option("--out", g.out, "Output file or directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Sample the posterior of a configured model");
  fit_cmd->fallthrough();
  fit_cmd->add_option("--model", fit.model, "Model configuration (TOML or JSON)")->required();
  fit_cmd->add_option("--data", fit.data, "CSV dataset")->required();
  fit_cmd->add_option("--steps", fit.steps, "Total iterations");
  fit_cmd->add_option("--burn-in", fit.burn_in, "Discarded prefix");
  fit_cmd->add_option("--thin", fit.thin, "Retention stride");
  fit_cmd->add_option("--chains", fit.chains, "Independent chains (seeds seed..seed+k-1)")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_flag("--consistent", fit.consistent, "Joint beta and random-effect proposals");
  fit_cmd->add_flag("--serial", fit.serial, "Run chains one after another");

  AdjustArgs adj;
  auto* adj_cmd = app.add_subcommand("adjust", "Print the adjustment and its defining residual");
  adj_cmd->fallthrough();
  adj_cmd->add_option("--link", adj.link, "identity, log, probit, logit, cloglog, sqrt, reciprocal")
      ->required();
  adj_cmd->add_option("--kappa", adj.kappa, "Linear predictor value(s)");
  adj_cmd->add_option("--kappa-grid", adj.kappa_grid, "lo:hi:count");
  adj_cmd->add_option("--tau2", adj.tau2, "Random-effect variance");
  adj_cmd->add_option("--sigma", adj.sigma, "Per-component standard deviations");
  adj_cmd->add_option("--mixture", adj.mixture, "w:mean:variance,... (zero-mean mixture)");
  adj_cmd->add_option("--shape", adj.shape, "Gamma shape for the reciprocal link");

  BenchArgs bench;
  auto* bench_cmd =
      app.add_subcommand("integrate-bench", "Logistic-normal integral error and timing table");
  bench_cmd->fallthrough();
  bench_cmd->add_option("--sigma-grid", bench.sigma_grid, "lo:hi:step or a comma list")
      ->capture_default_str();
  bench_cmd->add_option("--intervals", bench.intervals, "sigma^2-wide intervals from 0")
      ->capture_default_str();
  bench_cmd->add_option("--points", bench.points, "mu points per interval")->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods, "hybrid, ms, gold, gh<order>")
      ->capture_default_str();
  bench_cmd->add_flag("--serial", bench.serial, "Single-threaded evaluation");

  SummarizeArgs sum;
  auto* sum_cmd = app.add_subcommand("summarize", "Posterior summaries from draw files");
  sum_cmd->fallthrough();
  sum_cmd->add_option("--draws", sum.draws, "Draw CSV file(s), pooled")->required();
  sum_cmd->add_option("--thresholds", sum.thresholds, "Tail-area thresholds, comma separated")
      ->capture_default_str();
  sum_cmd->add_option("--density-out", sum.density_out, "Write density curves to this CSV");
  sum_cmd->add_option("--grid-points", sum.grid_points, "Density grid size")->capture_default_str();

  BfArgs bf;
  auto* bf_cmd = app.add_subcommand("bf", "Savage-Dickey Bayes factor for a point null");
  bf_cmd->fallthrough();
  bf_cmd->add_option("--draws", bf.draws, "Draw CSV file(s), pooled")->required();
  bf_cmd->add_option("--parameter", bf.parameter, "Column tested")->required();
  bf_cmd->add_option("--model", bf.model, "Read the prior from this configuration");
  bf_cmd->add_option("--prior-mean", bf.prior_mean, "Normal prior mean");
  bf_cmd->add_option("--prior-variance", bf.prior_variance, "Normal prior variance");
  bf_cmd->add_option("--at", bf.at, "Null value")->capture_default_str();
  bf_cmd->add_option("--scales", bf.scales, "Bandwidth multipliers")->capture_default_str();
  bf_cmd->add_option("--density-out", bf.density_out, "Write posterior and prior curves here");
  bf_cmd->add_option("--grid-points", bf.grid_points, "Density grid size")->capture_default_str();

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce", "Refit a bundled case study and check it");
  rep_cmd->fallthrough();
  rep_cmd->add_option("--case", rep.case_name, "rats or epilepsy")->required();
  rep_cmd->add_option("--variant", rep.variant, "mi, conventional or both")->capture_default_str();
  rep_cmd->add_option("--scale", rep.scale, "desk or full")->capture_default_str();
  rep_cmd->add_option("--seeds", rep.seeds, "Comma-separated seeds (default --seed)");
  rep_cmd->add_flag("--no-mixing", rep.no_mixing, "Skip the proposal-mixing comparison");
  rep_cmd->add_flag("--serial", rep.serial, "Run seeds one after another");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const Context ctx(g, out, err);
  try {
    if (*fit_cmd) return cmd_fit(ctx, fit, args);
    if (*adj_cmd) return cmd_adjust(ctx, adj);
    if (*bench_cmd) return cmd_integrate_bench(ctx, bench);
    if (*sum_cmd) return cmd_summarize(ctx, sum);
    if (*bf_cmd) return cmd_bf(ctx, bf);
    if (*rep_cmd) return cmd_reproduce(ctx, rep, args);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kExitData;
  } catch (const ModelUndefined& e) {
    err << "model undefined: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConvergenceError& e) {
    err << "convergence failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace miglmm
