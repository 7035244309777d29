#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "censreg/glm.hpp"
#include "censreg/weights.hpp"
#include "cli.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace censreg;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "censreg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("censreg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = path / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

std::string random_csv(std::uint64_t seed, int n, double censor_p) {
  oracle::Gen g(seed);
  std::ostringstream os;
  os.precision(17);
  os << "x,delta,z1,y\n";
  for (int i = 0; i < n; ++i) {
    const double x = g.unif(0.1, 3.0), z = g.coin();
    os << x << ',' << g.coin(1.0 - censor_p) << ',' << z << ',' << 1 + 0.5 * x - 0.2 * z + g.norm(0, 0.3) << '\n';
  }
  return os.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("without censoring every method prints the same table") {
  TempDir dir;
  const std::string in = dir.write("d.csv", random_csv(1, 80, 0.0));
  const Result cc = run({"fit", "-i", in, "--z", "z1", "-m", "cc"});
  REQUIRE(cc.code == 0);
  for (const char* m : {"ipcw", "ipcw-km", "ipcw-cox"}) {
    const Result r = run({"fit", "-i", in, "--z", "z1", "-m", m});
    REQUIRE(r.code == 0);
    // Only the header line names the method.
    CHECK(r.out.substr(r.out.find('\n')) == cc.out.substr(cc.out.find('\n')));
  }
}

TEST_CASE("noiseless line is printed exactly") {
  TempDir dir;
  const std::string in = dir.write("d.csv", "x,delta,y\n0,1,2\n1,1,5\n2,1,8\n3,1,11\n4,1,14\n");
  const Result r = run({"fit", "-i", in});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Variable") != std::string::npos);
  std::istringstream lines(r.out);
  std::string line;
  bool saw_intercept = false, saw_x = false;
  while (std::getline(lines, line)) {
    std::istringstream ws(line);
    std::string name, est, se;
    ws >> name >> est >> se;
    if (name == "(Intercept)") {
      saw_intercept = true;
      CHECK(est == "2.0000");
      CHECK(se == "0.0000");
    } else if (name == "x") {
      saw_x = true;
      CHECK(est == "3.0000");
      CHECK(se == "0.0000");
    }
  }
  CHECK(saw_intercept);
  CHECK(saw_x);
}

TEST_CASE("JSON estimates equal the library fit") {
  TempDir dir;
  const std::string text = random_csv(2, 120, 0.3);
  const std::string in = dir.write("d.csv", text);
  const Result r = run({"fit", "-i", in, "--z", "z1", "-m", "ipcw-km", "--format", "json"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);

  ColumnSchema s;
  s.v = "x";
  s.delta = "delta";
  s.y = "y";
  s.z = {"z1"};
  std::istringstream is(text);
  const Dataset d = read_csv(is, s);
  WeightSpec spec;
  spec.scheme = Scheme::IpcwKm;
  const GlmFit fit = fit_glm(d, build_weights(d, spec), LinkFamily::identity());
  REQUIRE(j["coefficients"].size() == 3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(j["coefficients"][static_cast<std::size_t>(k)]["estimate"].get<double>() == fit.beta[k]);
    CHECK(j["coefficients"][static_cast<std::size_t>(k)]["se"].get<double>() == std::sqrt(fit.covariance(k, k)));
  }
  CHECK(j["n_used"] == d.n_uncensored());
}

TEST_CASE("weights subcommand") {
  TempDir dir;
  const std::string in = dir.write("d.csv", random_csv(3, 50, 0.4));
  const Result cc = run({"weights", "-i", in, "--z", "z1", "-m", "cc"});
  REQUIRE(cc.code == 0);
  std::istringstream lines(cc.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "row_id,v,delta,pi,w,stabilized_w,floored");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() == 7);
    CHECK(std::stod(f[4]) == std::stod(f[2]));
  }
  CHECK(rows == 50);

  const std::string toy = dir.write("toy.csv", "x,delta,y\n1,1,1\n2,0,2\n3,1,3\n4,1,4\n");
  const Result km = run({"weights", "-i", toy, "-m", "ipcw-km", "--format", "json"});
  REQUIRE(km.code == 0);
  const auto j = nlohmann::json::parse(km.out);
  const double expect[] = {1.0, 0.0, 1.5, 1.5};
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(j["weights"][i]["w"].get<double>() - expect[i]) < 1e-12);

  const std::string dead = dir.write("dead.csv", "x,delta,y\n1,0,1\n2,0,2\n");
  const Result none = run({"weights", "-i", dead, "-m", "ipcw-km"});
  CHECK(none.code == cli::kData);
  CHECK_FALSE(none.err.empty());
}

TEST_CASE("simulate is reproducible and validates its config") {
  TempDir dir;
  const std::string cfg = dir.write(
      "s.json", R"({"family": "independent", "n": 120, "censor_level": "light", "n_reps": 20, "seed": 5})");
  const Result a = run({"simulate", cfg, "--format", "csv"});
  REQUIRE(a.code == 0);
  const Result b = run({"simulate", "--config", cfg, "--format", "csv", "--threads", "4"});
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  const Result t = run({"simulate", cfg});
  CHECK(t.code == 0);
  CHECK(t.out.find("IPCW-Cox") != std::string::npos);

  const std::string bad = dir.write("bad.json", R"({"family": "independent", "n": 3, "n_reps": -2, "extra": true})");
  const Result e = run({"simulate", bad});
  CHECK(e.code == cli::kSchema);
  CHECK(e.err.find("n_reps") != std::string::npos);
  CHECK(e.err.find("extra") != std::string::npos);
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"fit"}).code == cli::kUsage);
  CHECK(run({"fit", "-i", dir.write("p.csv", "x,delta,y\n1,7,2\n")}).code == cli::kParse);
  CHECK(run({"fit", "-i", dir.write("s.csv", "v,delta,y\n1,1,2\n")}).code == cli::kSchema);
  CHECK(run({"fit", "-i", dir.write("m.csv", "x,delta,y\n1,1,2\n2,1,3\n"), "-m", "nope"}).code == cli::kSchema);
  CHECK(run({"fit", "-i", (dir.path / "missing.csv").string()}).code != 0);
  CHECK(run({"fit", "-i", dir.write("k.csv", "x,delta,z1,y\n1,1,1,2\n2,1,1,3\n3,1,1,4\n"), "--z", "z1"}).code ==
        cli::kEstimation);
  const Result sep = run({"fit", "-i", dir.write("sep.csv", "x,delta,y\n1,1,0\n2,1,0\n3,1,1\n4,1,1\n"), "-l", "logit"});
  CHECK(sep.code == cli::kConvergence);
  CHECK(sep.err.find("separation") != std::string::npos);
}

}  // TEST_SUITE
