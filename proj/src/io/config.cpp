#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "miglmm/errors.hpp"
#include "miglmm/io.hpp"

namespace miglmm {

namespace {

using json = nlohmann::json;

json toml_to_json(const toml::node& node) {
  if (const auto* table = node.as_table()) {
    json out = json::object();
    for (const auto& [key, value] : *table) out[std::string(key.str())] = toml_to_json(value);
    return out;
  }
  if (const auto* array = node.as_array()) {
    json out = json::array();
    for (const auto& value : *array) out.push_back(toml_to_json(value));
    return out;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  throw ConfigError("unsupported TOML value (dates and times are not model settings)");
}

void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(where + ": missing key '" + key + "'");
  }
  return obj.at(key);
}

std::string get_string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + " must be a number");
  return v.get<double>();
}

long get_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
  return v.get<long>();
}

bool get_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where + " must be true or false");
  return v.get<bool>();
}

std::vector<double> get_scales(const json& v, const std::string& where) {
  std::vector<double> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(get_number(v[i], where + "[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(get_number(v, where));
  }
  return out;
}

NormalPrior get_prior(const json& obj, const std::string& where) {
  const json& prior = require(obj, "prior", where);
  const std::string w = where + ".prior";
  if (!prior.is_object()) throw ConfigError(w + " must be a table");
  reject_unknown(prior, w, {"mean", "variance"});
  return {get_number(require(prior, "mean", w), w + ".mean"),
          get_number(require(prior, "variance", w), w + ".variance")};
}

template <class F>
void for_each_entry(const json& root, const std::string& key, F&& f) {
  const json& list = require(root, key, "model");
  if (!list.is_array()) throw ConfigError("model." + key + " must be an array of tables");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = key + "[" + std::to_string(i) + "]";
    if (!list[i].is_object()) throw ConfigError(where + " must be a table");
    f(list[i], where);
  }
}

McmcConfig parse_mcmc(const json& obj) {
  const std::string w = "mcmc";
  if (!obj.is_object()) throw ConfigError("mcmc must be a table");
  reject_unknown(obj, w,
                 {"steps", "burn_in", "thin", "beta_scale", "alpha_scale", "u_scale", "adapt",
                  "target_accept", "consistent_proposals"});
  McmcConfig c;
  if (obj.contains("steps")) c.steps = get_integer(obj["steps"], w + ".steps");
  if (obj.contains("burn_in")) c.burn_in = get_integer(obj["burn_in"], w + ".burn_in");
  if (obj.contains("thin")) c.thin = get_integer(obj["thin"], w + ".thin");
  if (obj.contains("beta_scale")) c.beta_scale = get_scales(obj["beta_scale"], w + ".beta_scale");
  if (obj.contains("alpha_scale")) c.alpha_scale = get_scales(obj["alpha_scale"], w + ".alpha_scale");
  if (obj.contains("u_scale")) c.u_scale = get_scales(obj["u_scale"], w + ".u_scale");
  if (obj.contains("adapt")) c.adapt = get_bool(obj["adapt"], w + ".adapt");
  if (obj.contains("target_accept")) {
    c.target_accept = get_number(obj["target_accept"], w + ".target_accept");
  }
  if (obj.contains("consistent_proposals")) {
    c.consistent_proposals = get_bool(obj["consistent_proposals"], w + ".consistent_proposals");
  }
  c.validate();
  return c;
}

ModelConfig from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("model configuration must be a table");
  reject_unknown(root, "model",
                 {"family", "link", "marginally_interpretable", "response", "trials", "covariates",
                  "variances", "levels", "mcmc"});
  ModelConfig c;
  c.family = parse_family(get_string(root, "family", "model"));
  c.link = parse_link(get_string(root, "link", "model"));
  if (root.contains("marginally_interpretable")) {
    c.marginally_interpretable =
        get_bool(root["marginally_interpretable"], "model.marginally_interpretable");
  }
  c.response = get_string(root, "response", "model");
  if (root.contains("trials")) c.trials = get_string(root, "trials", "model");

  for_each_entry(root, "covariates", [&](const json& e, const std::string& w) {
    reject_unknown(e, w, {"name", "term", "prior"});
    CovariateConfig cov{{get_string(e, "name", w), get_string(e, "term", w)}, get_prior(e, w)};
    validate_term(cov.term.expression);
    c.covariates.push_back(std::move(cov));
  });
  if (root.contains("variances")) {
    for_each_entry(root, "variances", [&](const json& e, const std::string& w) {
      reject_unknown(e, w, {"name", "prior"});
      c.variances.push_back({get_string(e, "name", w), get_prior(e, w)});
    });
  }
  if (root.contains("levels")) {
    for_each_entry(root, "levels", [&](const json& e, const std::string& w) {
      reject_unknown(e, w, {"name", "column", "variance", "stratum_column", "strata"});
      LevelConfig level;
      level.name = get_string(e, "name", w);
      level.column = get_string(e, "column", w);
      const bool shared = e.contains("variance");
      const bool stratified = e.contains("stratum_column") || e.contains("strata");
      if (shared == stratified) {
        throw ConfigError(w + ": give either 'variance' or 'stratum_column' with 'strata'");
      }
      if (shared) {
        level.variance = get_string(e, "variance", w);
      } else {
        level.stratum_column = get_string(e, "stratum_column", w);
        const json& strata = require(e, "strata", w);
        if (!strata.is_object() || strata.empty()) {
          throw ConfigError(w + ".strata must be a nonempty table of value = variance name");
        }
        for (const auto& [value, name] : strata.items()) {
          if (!name.is_string()) throw ConfigError(w + ".strata." + value + " must be a string");
          level.strata[value] = name.get<std::string>();
        }
      }
      c.levels.push_back(std::move(level));
    });
  }
  if (root.contains("mcmc")) c.mcmc = parse_mcmc(root["mcmc"]);

  std::set<std::string> names;
  for (const auto& v : c.variances) {
    if (!names.insert(v.name).second) throw ConfigError("variance '" + v.name + "' defined twice");
  }
  auto known = [&](const std::string& name, const std::string& where) {
    if (!names.count(name)) throw ConfigError(where + ": unknown variance '" + name + "'");
  };
  for (const auto& level : c.levels) {
    if (!level.variance.empty()) known(level.variance, "level " + level.name);
    for (const auto& [value, name] : level.strata) known(name, "level " + level.name);
  }
  return c;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model configuration " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

bool same_label(const std::string& a, const std::string& b) {
  if (a == b) return true;
  double x = 0.0;
  double y = 0.0;
  const auto rx = std::from_chars(a.data(), a.data() + a.size(), x);
  const auto ry = std::from_chars(b.data(), b.data() + b.size(), y);
  return rx.ec == std::errc() && rx.ptr == a.data() + a.size() && ry.ec == std::errc() &&
         ry.ptr == b.data() + b.size() && x == y;
}

}  // namespace

DatasetSchema ModelConfig::schema() const {
  DatasetSchema s;
  s.response = response;
  s.trials = trials;
  for (const auto& c : covariates) s.covariates.push_back(c.term);
  for (const auto& l : levels) {
    s.group_columns.push_back(l.column);
    s.level_names.push_back(l.name);
  }
  return s;
}

ModelConfig parse_model_config_toml(const std::string& text) {
  try {
    return from_json(toml_to_json(toml::parse(text)));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML syntax error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

ModelConfig parse_model_config_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("JSON syntax error: ") + e.what());
  }
  return from_json(root);
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  const std::string ext = path.extension().string();
  if (ext == ".toml") return parse_model_config_toml(text);
  if (ext == ".json") return parse_model_config_json(text);
  try {
    return parse_model_config_toml(text);
  } catch (const ConfigError&) {
    return parse_model_config_json(text);
  }
}

BoundModel bind_model(const ModelConfig& config, const CsvTable& table) {
  BoundModel out;
  out.data = ingest_table(table, config.schema(), config.family);
  ModelSpec& spec = out.spec;
  spec.family = config.family;
  spec.link = config.link;
  spec.marginally_interpretable = config.marginally_interpretable;
  for (const auto& c : config.covariates) {
    spec.beta_names.push_back(c.term.name);
    spec.beta_priors.push_back(c.prior);
  }
  for (const auto& v : config.variances) {
    spec.variance_names.push_back(v.name);
    spec.log_variance_priors.push_back(v.log_prior);
  }
  auto variance_index = [&](const std::string& name) {
    for (std::size_t k = 0; k < config.variances.size(); ++k) {
      if (config.variances[k].name == name) return static_cast<int>(k);
    }
    throw ConfigError("unknown variance '" + name + "'");
  };
  for (std::size_t l = 0; l < config.levels.size(); ++l) {
    const LevelConfig& lc = config.levels[l];
    const int groups = out.data.group_count(static_cast<int>(l));
    RandomEffectLevel level{lc.name, static_cast<int>(l), std::vector<int>(groups, -1)};
    if (!lc.variance.empty()) {
      std::fill(level.variance_of_group.begin(), level.variance_of_group.end(),
                variance_index(lc.variance));
    } else {
      const int col = table.column(lc.stratum_column);
      if (col < 0) throw DataError("missing column '" + lc.stratum_column + "' (stratum)");
      for (std::size_t i = 0; i < table.rows(); ++i) {
        const std::string& label = table.cells[i][col];
        int k = -1;
        for (const auto& [value, name] : lc.strata) {
          if (same_label(label, value)) k = variance_index(name);
        }
        if (k < 0) {
          throw DataError("line " + std::to_string(table.line[i]) + ": stratum value '" + label +
                          "' of '" + lc.stratum_column + "' has no variance in level " + lc.name);
        }
        int& slot = level.variance_of_group[out.data.groups[l][i]];
        if (slot >= 0 && slot != k) {
          throw DataError("line " + std::to_string(table.line[i]) + ": stratum '" +
                          lc.stratum_column + "' varies within a group of level " + lc.name);
        }
        slot = k;
      }
    }
    spec.levels.push_back(std::move(level));
  }
  spec.validate(out.data);
  return out;
}

BoundModel bind_model(const ModelConfig& config, const std::filesystem::path& data_path) {
  return bind_model(config, read_csv(data_path));
}

}  // namespace miglmm
