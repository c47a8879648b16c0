#include <doctest.h>

#include "sddekit/cli.hpp"
#include "sddekit/core.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sddekit;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "sddekit");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const char* base = std::getenv("SDDEKIT_TEST_TMP");
  fs::path dir = fs::path(base != nullptr ? base : fs::temp_directory_path().string()) / ("cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& text, char prefix_excluded) {
  std::size_t n = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != prefix_excluded) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("stepsize syntax") {
  CHECK(cli::parse_stepsizes("0.25") == std::vector<double>{0.25});
  CHECK(cli::parse_stepsizes("2^-3") == std::vector<double>{0.125});
  CHECK(cli::parse_stepsizes("2^-3..2^-5") == std::vector<double>{0.125, 0.0625, 0.03125});
  CHECK(cli::parse_stepsizes("2^-5..2^-3") == std::vector<double>{0.03125, 0.0625, 0.125});
  CHECK(cli::parse_stepsizes("1, 2^-1") == std::vector<double>{1.0, 0.5});
  CHECK_THROWS_AS(cli::parse_stepsizes("3^-2"), ConfigError);
  CHECK_THROWS_AS(cli::parse_stepsizes("0.5..0.25"), ConfigError);
  CHECK_THROWS_AS(cli::parse_stepsizes("-1"), ConfigError);
  CHECK_THROWS_AS(cli::parse_stepsizes(""), ConfigError);
  CHECK_THROWS_AS(cli::parse_stepsizes("abc"), ConfigError);
}

TEST_CASE("config documents") {
  cli::RunConfig c;
  cli::apply_json(c, nlohmann::json{{"problem", "example2"}, {"M", 12}, {"T", 3.0}, {"h", "2^-2"}});
  CHECK(c.problem == "example2");
  CHECK(c.samples == 12);
  CHECK(c.horizon == 3.0);
  CHECK(c.h == "2^-2");
  CHECK_THROWS_WITH_AS(cli::apply_json(c, nlohmann::json{{"samples", 3}}), doctest::Contains("samples"), ConfigError);
  CHECK_THROWS_WITH_AS(cli::apply_json(c, nlohmann::json{{"M", "many"}}), doctest::Contains("M"), ConfigError);

  cli::RunConfig round;
  cli::apply_json(round, cli::to_json(c));
  CHECK(cli::to_json(round) == cli::to_json(c));
}

TEST_CASE("malformed config files report a line and column") {
  const fs::path dir = scratch("badjson");
  const fs::path file = dir / "bad.json";
  std::ofstream(file) << "{\n  \"problem\": \"example1\",\n  \"M\": ,\n}\n";
  const Result r = invoke({"simulate", "--config", file.string()});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("bad.json:3:") != std::string::npos);
}

TEST_CASE("simulate writes a trajectory CSV") {
  const fs::path dir = scratch("simulate");
  const Result r = invoke({"simulate", "--problem", "example1", "--scheme", "ssbe", "--h", "0.25", "--T", "1",
                           "--seed", "42", "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  const std::string csv = slurp(dir / "trajectory.csv");
  CHECK(csv.rfind("t,y0\n", 0) == 0);
  CHECK(count_lines(csv, '#') == 6);  // header plus t = 0 .. 1
  CHECK(csv.find("# status=ok") != std::string::npos);
  const auto side = nlohmann::json::parse(slurp(dir / "trajectory.json"));
  CHECK(side["tool"] == "sddekit");
  CHECK(side["master_seed"] == 42);
  CHECK(side["config"]["h"] == "0.25");
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(invoke({}).code == cli::kUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kUsage);
  CHECK(invoke({"simulate", "--problem", "nope"}).code == cli::kUsage);
  CHECK(invoke({"simulate", "--h", "0.3", "--T", "1"}).code == cli::kUsage);
  CHECK(invoke({"simulate", "--problem", "nonlinear", "--scheme", "ssbe-legacy", "--h", "0.5"}).code ==
        cli::kUsage);
  CHECK(invoke({"simulate", "--scheme", "rk4"}).code == cli::kUsage);
  CHECK(invoke({"analyze", "--problem", "linear", "--a", "1", "--b", "0", "--c", "0", "--d", "0"}).code ==
        cli::kOk);
  CHECK(invoke({"simulate", "--help"}).code == cli::kOk);
}

TEST_CASE("numerical failures exit with code 1") {
  const fs::path dir = scratch("blowup");
  const Result r = invoke({"simulate", "--problem", "example2", "--scheme", "em", "--h", "1", "--T", "40",
                           "--out", dir.string()});
  CHECK(r.code == cli::kNumericalFailure);
  CHECK(slurp(dir / "trajectory.csv").find("# status=blow-up") != std::string::npos);
}

TEST_CASE("analyze prints the stability profile") {
  const Result r = invoke({"analyze", "--problem", "example2", "--h", "1", "--json"});
  REQUIRE(r.code == cli::kOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["beta"].get<double>() == -2.0);
  CHECK(j["beta_h"].get<double>() == doctest::Approx(0.8));
  CHECK(j["nu_h_plus"].get<double>() == doctest::Approx(0.0557858878));
  CHECK(j["linear_ms_stable"] == true);

  const Result text = invoke({"analyze", "--problem", "example2", "--h", "1"});
  CHECK(text.out.find("linear-MS           stable") != std::string::npos);

  const Result panto = invoke({"analyze", "--problem", "pantograph", "--json"});
  REQUIRE(panto.code == cli::kOk);
  CHECK(nlohmann::json::parse(panto.out)["nu_plus"].is_null());
}

TEST_CASE("converge output is reproducible from its sidecar and independent of workers") {
  const fs::path a = scratch("converge_a"), b = scratch("converge_b"), c = scratch("converge_c");
  const Result r1 = invoke({"converge", "--problem", "example1", "--h", "2^-3..2^-5", "--ref-h", "2^-7",
                            "--M", "50", "--T", "1", "--seed", "5", "--workers", "1", "--out", a.string()});
  REQUIRE(r1.code == cli::kOk);
  CHECK(r1.out.find("fitted order ssbe") != std::string::npos);
  const std::string csv = slurp(a / "converge.csv");
  CHECK(csv.rfind("problem,scheme,h,eps,std_error,blowups,failures,samples,order\n", 0) == 0);
  CHECK(count_lines(csv, '#') == 4);

  const Result r2 = invoke({"converge", "--config", (a / "converge.json").string(), "--workers", "3", "--out",
                            b.string()});
  REQUIRE(r2.code == cli::kOk);
  CHECK(slurp(b / "converge.csv") == csv);

  std::ofstream(c / "cfg.json") << R"({"problem": "example1", "h": "2^-3..2^-5", "ref-h": "2^-7", "M": 50,
    "T": 1.0, "seed": 5})";
  const Result r3 = invoke({"converge", "--config", (c / "cfg.json").string(), "--out", c.string()});
  REQUIRE(r3.code == cli::kOk);
  CHECK(slurp(c / "converge.csv") == csv);
}

TEST_CASE("stability and table1 commands write their CSVs") {
  const fs::path dir = scratch("stab");
  const Result s = invoke({"stability", "--problem", "example2", "--scheme", "ssbe,ssbe-legacy", "--h", "1",
                           "--T", "10", "--M", "20", "--out", dir.string()});
  REQUIRE(s.code == cli::kOk);
  const std::string trace = slurp(dir / "stability.csv");
  CHECK(trace.rfind("scheme,h,t,mean_sq,divergent\n", 0) == 0);
  CHECK(count_lines(trace, '#') == 1 + 2 * 11);

  const Result t = invoke({"table1", "--h", "2^-2..2^-3", "--ref-h", "2^-5", "--tN", "1", "--M", "10", "--out",
                           dir.string()});
  REQUIRE(t.code == cli::kOk);
  const std::string table = slurp(dir / "table1.csv");
  CHECK(table.rfind("h,example2:em,example2:ssbe-legacy,example2:ssbe,example3:em,", 0) == 0);
  CHECK(count_lines(table, '#') == 3);
}

TEST_CASE("output directory falls back to the environment") {
  const fs::path dir = scratch("envout");
  ::setenv("SDDEKIT_OUTPUT_DIR", dir.string().c_str(), 1);
  const Result r = invoke({"simulate", "--h", "0.5", "--T", "1"});
  ::unsetenv("SDDEKIT_OUTPUT_DIR");
  CHECK(r.code == cli::kOk);
  CHECK(fs::exists(dir / "trajectory.csv"));
}
