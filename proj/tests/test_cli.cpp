#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "granular/cli.hpp"
#include "granular/config.hpp"
#include "granular/errors.hpp"

using namespace granular;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result invoke(const std::vector<std::string>& args) {
  std::vector<std::string> storage{"granular"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("granular_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::string> kQuick{"--set", "hmc.n_warmup=150", "--set", "hmc.n_draws=100", "--set", "hmc.n_chains=2",
                                      "--set", "simulate.n=40", "--set", "simulate.K=60"};

Result granular_cli(std::initializer_list<std::string> args) { return invoke(args); }

Result with_quick(std::vector<std::string> args) {
  args.insert(args.end(), kQuick.begin(), kQuick.end());
  return invoke(args);
}

}  // namespace

TEST_CASE("configuration") {
  const auto dir = scratch("config");
  const auto shown = granular_cli({"show-config"});
  REQUIRE(shown.code == cli::kOk);
  const auto cfg = config_from_json(shown.out);
  CHECK(cfg.hmc.target_accept == 0.8);
  CHECK(cfg.hmc.max_leapfrog == 512);
  CHECK(config_to_json(cfg) == shown.out);

  put(dir / "bad.json", R"({"hmc": {"n_draws": 10, "stepsize": 0.1}})");
  const auto bad = granular_cli({"show-config", "--config", (dir / "bad.json").string()});
  CHECK(bad.code == cli::kValidationFailure);
  CHECK(bad.err.find("stepsize") != std::string::npos);

  CHECK(granular_cli({"show-config", "--set", "hmc.bogus=1"}).code == cli::kValidationFailure);
  CHECK(granular_cli({"show-config", "--set", "hmc.n_chains=0"}).code == cli::kValidationFailure);
  CHECK(granular_cli({"show-config", "--set", "hmc.target_accept=1.5"}).code == cli::kValidationFailure);
  CHECK(granular_cli({"show-config", "--set", "model=car3"}).code == cli::kValidationFailure);

  const auto over = granular_cli({"show-config", "--set", "hmc.n_draws=77", "--set", "model=car2"});
  REQUIRE(over.code == cli::kOk);
  const auto o = config_from_json(over.out);
  CHECK(o.hmc.n_draws == 77);
  CHECK(o.model == ModelKind::Car2);

  CHECK_THROWS_AS(config_from_json(R"({"priors": {"nope": 1}})"), ValidationError);
  CHECK(granular_cli({"no-such-command"}).code == cli::kValidationFailure);
}

TEST_CASE("count") {
  const auto dir = scratch("count");
  put(dir / "crisp.csv", "r1,r2\n1,0\n0,1\n1,0\n");
  auto r = granular_cli({"count", "-i", (dir / "crisp.csv").string(), "-o", (dir / "crisp_counts.csv").string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(slurp(dir / "crisp_counts.csv") == "id,K,y0,y1,y2,y3\nr1,3,0,0,1,0\nr2,3,0,1,0,0\n");
  CHECK(r.err.find("stage=count") != std::string::npos);

  // Two referents with partial degrees: the fast count must agree with exhaustive enumeration.
  put(dir / "toy.csv", "a,b\n1,0.5\n0.25,1\n0.5,0.5\n1,0\n0.75,0.25\n");
  REQUIRE(granular_cli({"count", "-i", (dir / "toy.csv").string(), "-o", (dir / "fast.csv").string()}).code == 0);
  REQUIRE(granular_cli({"count", "-i", (dir / "toy.csv").string(), "-o", (dir / "brute.csv").string(), "--bruteforce"})
              .code == 0);
  CHECK(slurp(dir / "fast.csv") == slurp(dir / "brute.csv"));

  put(dir / "bad.csv", "a,b\n1,0\n0.5,x\n");
  r = granular_cli({"count", "-i", (dir / "bad.csv").string(), "-o", (dir / "o.csv").string()});
  CHECK(r.code == cli::kValidationFailure);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(r.err.find("column 2") != std::string::npos);

  put(dir / "range.csv", "a,b\n1,0\n1.5,0\n");
  r = granular_cli({"count", "-i", (dir / "range.csv").string(), "-o", (dir / "o.csv").string()});
  CHECK(r.code == cli::kValidationFailure);
  CHECK(r.err.find("line 3, column 1") != std::string::npos);

  put(dir / "empty.csv", "a,b\n");
  CHECK(granular_cli({"count", "-i", (dir / "empty.csv").string(), "-o", (dir / "o.csv").string()}).code ==
        cli::kValidationFailure);

  // Several files: one row per file for the named referent.
  r = granular_cli({"count", "-i", (dir / "crisp.csv").string(), "-i", (dir / "toy.csv").string(), "-o",
                    (dir / "multi.csv").string()});
  CHECK(r.code == cli::kValidationFailure);
  put(dir / "toy2.csv", "r1,r2\n0.5,1\n1,0\n");
  r = granular_cli({"count", "-i", (dir / "crisp.csv").string(), "-i", (dir / "toy2.csv").string(), "-r", "r1", "-o",
                    (dir / "multi.csv").string()});
  REQUIRE(r.code == cli::kOk);
  const auto multi = slurp(dir / "multi.csv");
  CHECK(multi.find("\ncrisp,3,") != std::string::npos);
  CHECK(multi.find("\ntoy2,2,") != std::string::npos);
}

TEST_CASE("fit") {
  const auto dir = scratch("fit");
  put(dir / "counts.csv",
      "id,K,y0,y1,y2,y3,y4\n"
      "crisp,4,0,0,1,0,0\n"
      "zero,4,0,0,0,0,0\n"
      "soft,4,0.1,0.6,1,0.6,0.1\n");
  auto r = granular_cli({"fit", "-i", (dir / "counts.csv").string(), "-o", (dir / "stats.csv").string()});
  REQUIRE(r.code == cli::kOk);
  const auto stats = slurp(dir / "stats.csv");
  CHECK(stats.rfind("sample_id,c,h,K,sse,converged\n", 0) == 0);
  CHECK(stats.find("\ncrisp,2,") != std::string::npos);
  CHECK(stats.find("\nsoft,2,") != std::string::npos);
  CHECK(stats.find("zero") == std::string::npos);
  CHECK(r.err.find("zero") != std::string::npos);
  CHECK(r.err.find("dropped") != std::string::npos);

  put(dir / "none.csv", "id,K,y0,y1\nz,1,0,0\n");
  CHECK(granular_cli({"fit", "-i", (dir / "none.csv").string(), "-o", (dir / "s.csv").string()}).code ==
        cli::kValidationFailure);
}

TEST_CASE("simulate, infer and ppc") {
  const auto dir = scratch("pipeline");
  const auto data = (dir / "data.csv").string(), cov = (dir / "cov.csv").string();
  auto r = with_quick({"simulate", "-o", data, "--covariates-out", cov, "--set", "seed=5"});
  REQUIRE(r.code == cli::kOk);
  CHECK(fs::exists(data + ".json"));
  const auto first = slurp(data);
  REQUIRE(with_quick({"simulate", "-o", data, "--covariates-out", cov, "--set", "seed=5"}).code == 0);
  CHECK(slurp(data) == first);
  CHECK(slurp(data + ".json").find("\"kappa\"") != std::string::npos);

  SUBCASE("overflowing generator is a numerical failure") {
    r = with_quick({"simulate", "-o", (dir / "x.csv").string(), "--covariates-out", (dir / "xc.csv").string(), "--set",
                    "simulate.beta=[800, 0]"});
    CHECK(r.code == cli::kNumericalFailure);
  }

  SUBCASE("infer twice gives identical files") {
    const auto out1 = dir / "run1", out2 = dir / "run2";
    REQUIRE(with_quick({"infer", "-s", data, "-c", cov, "-o", out1.string()}).code == cli::kOk);
    REQUIRE(with_quick({"infer", "-s", data, "-c", cov, "-o", out2.string()}).code == cli::kOk);
    for (const char* f : {"draws_cnar.csv", "summary_cnar.csv", "diagnostics_cnar.json"}) {
      CHECK(slurp(out1 / f) == slurp(out2 / f));
    }
    const auto summary = slurp(out1 / "summary_cnar.csv");
    CHECK(summary.rfind("parameter,mean,sd,q05,q50,q95,rhat,ess_bulk\n", 0) == 0);

    REQUIRE(with_quick({"infer", "-s", data, "-c", cov, "-o", out1.string(), "--set", "model=car1"}).code == 0);
    r = with_quick({"ppc", "-d", (out1 / "draws_cnar.csv").string(), "-d", (out1 / "draws_car1.csv").string(), "-s", data,
                    "-c", cov, "-o", (dir / "ppc").string(), "--set", "ppc.n_reps=1"});
    REQUIRE(r.code == cli::kOk);
    CHECK(fs::exists(dir / "ppc" / "ppc_cnar.csv"));
    CHECK(fs::exists(dir / "ppc" / "ppc_car1.csv"));
    CHECK(slurp(dir / "ppc" / "ppc_summary.json").find("u_obs") != std::string::npos);

    const auto again = dir / "ppc2";
    REQUIRE(with_quick({"ppc", "-d", (out1 / "draws_cnar.csv").string(), "-d", (out1 / "draws_car1.csv").string(), "-s",
                        data, "-c", cov, "-o", again.string(), "--set", "ppc.n_reps=1"})
                .code == 0);
    CHECK(slurp(again / "ppc_summary.json") == slurp(dir / "ppc" / "ppc_summary.json"));

    CHECK(with_quick({"ppc", "-d", (dir / "missing.csv").string(), "-s", data, "-c", cov, "-o", again.string()}).code ==
          cli::kValidationFailure);

    // Same ids, one K altered.
    std::string altered = slurp(data);
    const auto pos = altered.find(",60", altered.find('\n'));
    REQUIRE(pos != std::string::npos);
    altered.replace(pos, 3, ",61");
    put(dir / "altered.csv", altered);
    CHECK(with_quick({"ppc", "-d", (out1 / "draws_cnar.csv").string(), "-s", (dir / "altered.csv").string(), "-c", cov,
                      "-o", again.string()})
              .code == cli::kValidationFailure);
  }

  SUBCASE("intercept-only covariates") {
    std::string ids = "sample_id\n";
    std::istringstream in(slurp(data));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) ids += line.substr(0, line.find(',')) + "\n";
    put(dir / "ids.csv", ids);
    r = with_quick({"infer", "-s", data, "-c", (dir / "ids.csv").string(), "-o", (dir / "icpt").string()});
    CHECK(r.code == cli::kOk);
    const auto summary = slurp(dir / "icpt" / "summary_cnar.csv");
    CHECK(summary.find("\nbeta[intercept],") != std::string::npos);
    CHECK(summary.find("\nbeta[", summary.find("\nbeta[") + 1) == std::string::npos);
  }

  SUBCASE("orphan ids are listed") {
    std::string c = slurp(cov);
    c += "ghost_sample,0.5,1\n";
    put(dir / "cov_orphan.csv", c);
    r = with_quick({"infer", "-s", data, "-c", (dir / "cov_orphan.csv").string(), "-o", (dir / "o").string()});
    CHECK(r.code == cli::kValidationFailure);
    CHECK(r.err.find("ghost_sample") != std::string::npos);
  }
}

TEST_CASE("kernel audit") {
  const auto dir = scratch("audit");
  put(dir / "k.json", R"({"outcomes": [[1, 0.5, 0.5, 0.25], [0.25, 0.5, 1, 1]], "nu": [0.5, 0.5]})");
  const auto r = granular_cli({"kernel-audit", "-k", (dir / "k.json").string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("CAR") != std::string::npos);
  CHECK(granular_cli({"kernel-audit", "-k", (dir / "absent.json").string()}).code == cli::kValidationFailure);
}
