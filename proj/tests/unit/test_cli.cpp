#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "miglmm/cases.hpp"
#include "miglmm/cli.hpp"
#include "miglmm/io.hpp"

using namespace miglmm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("miglmm_cli_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> short_fit(const fs::path& out, const std::string& seed) {
  return {"fit",   "--model",   (bundled_config_dir() / "rats_mi.toml").string(),
          "--data", case_data_path(CaseName::Rats).string(), "--steps", "3000",
          "--burn-in", "1000", "--thin", "2", "--seed", seed, "--out", out.string(), "--quiet"};
}

}  // namespace

TEST_CASE("adjust prints the adjustment and its residual") {
  const Result r = run({"adjust", "--link", "logit", "--kappa", "1.5", "--tau2", "2"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("link,kappa,tau2,adjustment,marginal_mean,target,residual\n", 0) == 0);
  CHECK(r.out.find("logit,1.5,2,") != std::string::npos);
  const Result grid = run({"adjust", "--link", "probit", "--kappa-grid", "-1:1:5", "--sigma", "1"});
  CHECK(grid.code == kExitOk);
  CHECK(std::count(grid.out.begin(), grid.out.end(), '\n') == 6);
  const Result recip = run({"adjust", "--link", "reciprocal", "--kappa", "2", "--shape", "4"});
  CHECK(recip.code == kExitOk);
}

TEST_CASE("configuration errors exit 2") {
  CHECK(run({"adjust", "--link", "logistic", "--kappa", "1", "--tau2", "1"}).code == kExitConfig);
  CHECK(run({"adjust", "--link", "logit", "--kappa", "1"}).code == kExitConfig);
  CHECK(run({"adjust", "--link", "logit", "--kappa", "1", "--tau2", "1", "--sigma", "1"}).code ==
        kExitConfig);
  CHECK(run({"adjust", "--link", "logit", "--kappa", "1", "--mixture", "0.5:1:1,0.5:0:1"}).code ==
        kExitConfig);
  CHECK(run({"frobnicate"}).code == kExitConfig);
  CHECK(run({"fit", "--model", "x.toml"}).code == kExitConfig);
  CHECK(run({"reproduce", "--case", "mice"}).code == kExitConfig);
  CHECK(run({"integrate-bench", "--methods", "simpson"}).code == kExitConfig);
  const fs::path bad = scratch("bad.toml");
  std::ofstream(bad) << "family = \"gamma\"\n";
  CHECK(run({"fit", "--model", bad.string(), "--data", case_data_path(CaseName::Rats).string()})
            .code == kExitConfig);
}

TEST_CASE("data errors exit 3") {
  const std::string model = (bundled_config_dir() / "rats_mi.toml").string();
  CHECK(run({"fit", "--model", model, "--data", "/nonexistent/rats.csv"}).code == kExitData);
  const fs::path broken = scratch("broken.csv");
  std::ofstream(broken) << "litter,trt,m,y\n1,1,12,13\n";
  const Result r = run({"fit", "--model", model, "--data", broken.string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(run({"summarize", "--draws", "/nonexistent/draws.csv"}).code == kExitData);
}

TEST_CASE("numeric failures exit 4") {
  // square-root link cannot absorb the variance at this kappa
  const Result r = run({"adjust", "--link", "sqrt", "--kappa", "0.5", "--tau2", "1"});
  CHECK(r.code == kExitNumeric);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("help exits 0") { CHECK(run({"--help"}).code == kExitOk); }

TEST_CASE("fit is reproducible and feeds summarize and bf") {
  const fs::path a = scratch("fit_a");
  const fs::path b = scratch("fit_b");
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run(short_fit(a, "11")).code == kExitOk);
  REQUIRE(run(short_fit(b, "11")).code == kExitOk);
  for (const char* f : {"chain_1.csv", "summary.csv", "diagnostics.json", "manifest.json"}) {
    CHECK(fs::exists(a / f));
  }
  CHECK(slurp(a / "chain_1.csv") == slurp(b / "chain_1.csv"));
  const DrawTable draws = read_draws_csv(a / "chain_1.csv");
  CHECK(draws.rows() == 1000);

  const Result sum = run({"summarize", "--draws", (a / "chain_1.csv").string()});
  CHECK(sum.code == kExitOk);
  CHECK(sum.out.find("sd.sigma1") != std::string::npos);

  const Result bf = run({"bf", "--draws", (a / "chain_1.csv").string(), "--parameter", "trt",
                         "--prior-mean", "0", "--prior-variance", "10"});
  CHECK(bf.code == kExitOk);
  const Result bf_model = run({"bf", "--draws", (a / "chain_1.csv").string(), "--parameter",
                               "trt", "--model", (bundled_config_dir() / "rats_mi.toml").string()});
  CHECK(bf_model.code == kExitOk);
  CHECK(bf_model.out == bf.out);
  CHECK(run({"bf", "--draws", (a / "chain_1.csv").string(), "--parameter", "nope",
             "--prior-mean", "0", "--prior-variance", "1"})
            .code == kExitData);
}

TEST_CASE("integrate-bench writes its table") {
  const Result r = run({"integrate-bench", "--sigma-grid", "0.5,1", "--intervals", "2", "--points",
                        "50", "--methods", "hybrid,gh20"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("sigma,interval,method,max_error,seconds\n", 0) == 0);
  // 2 sigmas x 2 intervals x 2 methods
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 9);
}
