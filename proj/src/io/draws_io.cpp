#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>

#include "miglmm/errors.hpp"
#include "miglmm/io.hpp"
#include "miglmm/manifest.hpp"

namespace miglmm {

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

nlohmann::json to_array(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(x);
  return out;
}

}  // namespace

const std::vector<double>& DrawTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return columns[j];
  }
  throw DataError("draw table has no column '" + name + "'");
}

DrawTable draw_table(const ModelSpec& spec, const ChainOutput& chain) {
  DrawTable t;
  for (int j = 0; j < spec.p(); ++j) {
    t.names.push_back(j < static_cast<int>(spec.beta_names.size()) ? spec.beta_names[j]
                                                                    : "beta" + std::to_string(j));
    t.columns.push_back(chain.beta_series(j));
  }
  for (int k = 0; k < spec.variance_count(); ++k) {
    const std::string name = k < static_cast<int>(spec.variance_names.size())
                                 ? spec.variance_names[k]
                                 : "sigma" + std::to_string(k);
    t.names.push_back(kLogVariancePrefix + name);
    std::vector<double> col;
    col.reserve(chain.draws());
    for (const auto& lv : chain.log_variance) col.push_back(lv[k]);
    t.columns.push_back(std::move(col));
  }
  return t;
}

void write_draws_csv(const std::filesystem::path& path, const DrawTable& table) {
  std::string out;
  for (std::size_t j = 0; j < table.names.size(); ++j) {
    out += (j ? "," : "") + table.names[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      if (j) out += ',';
      out += format_double(table.columns[j][i]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

DrawTable read_draws_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  DrawTable t;
  t.names = csv.header;
  t.columns.assign(csv.header.size(), {});
  for (std::size_t i = 0; i < csv.rows(); ++i) {
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
      t.columns[j].push_back(csv.number(i, static_cast<int>(j)));
    }
  }
  return t;
}

std::string diagnostics_json(const ModelSpec& spec, const std::vector<ChainOutput>& chains) {
  nlohmann::json out;
  out["chains"] = nlohmann::json::array();
  for (const ChainOutput& c : chains) {
    nlohmann::json j;
    j["seed"] = c.config.seed;
    j["steps"] = c.config.steps;
    j["burn_in"] = c.config.burn_in;
    j["thin"] = c.config.thin;
    j["consistent_proposals"] = c.config.consistent_proposals;
    j["retained"] = c.draws();
    j["wall_seconds"] = c.wall_seconds;
    j["acceptance"]["beta"] = c.beta_counts.rate();
    j["acceptance"]["alpha"] = c.alpha_counts.rate();
    j["acceptance"]["u"] = nlohmann::json::array();
    for (const auto& u : c.u_counts) j["acceptance"]["u"].push_back(u.rate());
    j["scales"]["beta"] = to_array(c.beta_scale);
    j["scales"]["alpha"] = to_array(c.alpha_scale);
    j["scales"]["u"] = to_array(c.u_scale);
    const DrawTable t = draw_table(spec, c);
    for (std::size_t k = 0; k < t.names.size(); ++k) {
      if (t.rows() < 100) {
        j["iact"][t.names[k]] = nullptr;
        continue;
      }
      bool degenerate = false;
      const double tau = iact(t.columns[k], &degenerate);
      j["iact"][t.names[k]] = tau;
      if (degenerate) j["warnings"].push_back("constant series: " + t.names[k]);
    }
    for (const auto& w : c.warnings) j["warnings"].push_back(w);
    if (!j.contains("warnings")) j["warnings"] = nlohmann::json::array();
    out["chains"].push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

}  // namespace miglmm
