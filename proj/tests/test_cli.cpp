#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "maser/cli.hpp"
#include "maser/inference.hpp"
#include "maser/trajectory.hpp"

using namespace maser;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "maser");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> data_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("maser_cli_test_" + name);
}

}  // namespace

TEST_CASE("stationary at phi = 0 is the thermal law") {
  const Result r = invoke({"stationary", "--phi", "0", "--nu", "0.15"});
  REQUIRE(r.code == kExitOk);
  const auto rows = data_rows(r.out);
  REQUIRE(rows.size() > 10);
  for (std::size_t n = 0; n < 10; ++n) {
    const double expect = std::pow(0.15 / 1.15, static_cast<double>(n)) / 1.15;
    CHECK(std::stod(rows[n][2]) == static_cast<double>(n));
    CHECK(std::stod(rows[n][3]) == doctest::Approx(expect).epsilon(1e-13));
  }
  CHECK(r.out.find("# nu=") != std::string::npos);
}

TEST_CASE("configuration errors exit with code 2 and a JSON line") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"stationary", "--bogus", "1"},
           {"stationary", "--nu", "abc"},
           {"fisher-sweep", "--steps", "0"},
           {"stationary", "--phi", "0", "--format", "xml"},
           {"estimate"},
       }) {
    const Result r = invoke(args);
    CAPTURE(r.err);
    CHECK(r.code == kExitConfig);
    const auto j = nlohmann::json::parse(r.err);
    CHECK(j.contains("error"));
    CHECK(j.contains("message"));
  }
}

TEST_CASE("numerical refusals exit with code 3") {
  const Result r = invoke({"ensemble", "--phi", "0.16", "--horizon", "1", "--n-traj", "2",
                           "--method", "moment-ground"});
  CHECK(r.code == kExitNumerical);
  CHECK(nlohmann::json::parse(r.err)["error"] == "insensitive-design-point");
}

TEST_CASE("flags override the config file") {
  const auto path = scratch("config.ini");
  std::ofstream(path) << "nu=0.2\nphi=0\n";
  const Result a = invoke({"stationary", "--config", path.string()});
  const Result b = invoke({"stationary", "--config", path.string(), "--nu", "0.3"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(std::stod(data_rows(a.out)[0][3]) == doctest::Approx(1.0 / 1.2));
  CHECK(std::stod(data_rows(b.out)[0][3]) == doctest::Approx(1.0 / 1.3));
  std::filesystem::remove(path);
}

TEST_CASE("JSON output parses and matches CSV") {
  const Result csv = invoke({"fisher-sweep", "--alpha-min", "1", "--alpha-max", "2", "--steps", "3"});
  const Result js = invoke({"fisher-sweep", "--alpha-min", "1", "--alpha-max", "2", "--steps", "3",
                            "--format", "json"});
  REQUIRE(csv.code == kExitOk);
  REQUIRE(js.code == kExitOk);
  const auto j = nlohmann::json::parse(js.out);
  const auto rows = data_rows(csv.out);
  REQUIRE(j["rows"].size() == rows.size());
  const auto& cols = j["columns"];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      CHECK(j["rows"][i][c].get<double>() == std::stod(rows[i][c]));
    }
  }
  CHECK(j["config"]["subcommand"] == "fisher-sweep");
}

TEST_CASE("simulation is reproducible and round-trips through estimate") {
  const auto path = scratch("traj.csv");
  const std::vector<std::string> args{"simulate", "--phi", "0.15", "--horizon", "0.5", "--seed", "9",
                                      "--out", path.string()};
  REQUIRE(invoke(args).code == kExitOk);
  std::string first;
  {
    std::ifstream in(path);
    first.assign(std::istreambuf_iterator<char>(in), {});
  }
  REQUIRE(invoke(args).code == kExitOk);
  std::string second;
  {
    std::ifstream in(path);
    second.assign(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(first == second);

  std::ifstream in(path);
  const Trajectory t = read_trajectory_csv(in);
  const Result est = invoke({"estimate", "--in", path.string()});
  REQUIRE(est.code == kExitOk);
  const auto rows = data_rows(est.out);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][0] == "mle-full");
  CHECK(std::stod(rows[0][2]) == doctest::Approx(mle(t).phi_hat).epsilon(1e-12));
  std::filesystem::remove(path);
}

TEST_CASE("ensemble output does not depend on the worker count") {
  const std::vector<std::string> base{"ensemble", "--alpha-min", "1.5", "--horizon", "2",
                                      "--n-traj", "12", "--seed", "5"};
  auto with = [&](const char* w) {
    auto a = base;
    a.insert(a.end(), {"--phi", "0.15", "--workers", w});
    return invoke(a);
  };
  const Result one = with("1"), four = with("4");
  REQUIRE(one.code == kExitOk);
  CHECK(data_rows(one.out) == data_rows(four.out));
}
