#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "dtn/cli.hpp"
#include "dtn/error.hpp"

using namespace dtn;
using cli::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dtnctl_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

int dtnctl(const std::string& args) {
  const std::string cmd = std::string(DTNCTL_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  return json::parse(f);
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json fig1a_config() { return {{"schema_version", 1}, {"preset", "fig1a"}}; }

}  // namespace

TEST_CASE("strict configuration parsing") {
  CHECK_NOTHROW(cli::parse_config(fig1a_config()));
  auto j = fig1a_config();
  j["bogus"] = 1;
  CHECK_THROWS_AS(cli::parse_config(j), ConfigError);
  j = fig1a_config();
  j["model"] = {{"beta", 3.0}, {"gamma", 1.0}};
  CHECK_THROWS_AS(cli::parse_config(j), ConfigError);
  j = fig1a_config();
  j["model"] = {{"beta", "fast"}};
  CHECK_THROWS_AS(cli::parse_config(j), ConfigError);
  j = fig1a_config();
  j.erase("schema_version");
  CHECK_THROWS_AS(cli::parse_config(j), ConfigError);
  j = fig1a_config();
  j["schema_version"] = 2;
  CHECK_THROWS_AS(cli::parse_config(j), ConfigError);
  j = fig1a_config();
  j["init"] = {{"S", {0.5, 0.5}}, {"I", {0.0, 0.0}}};
  CHECK_THROWS_AS(cli::parse_config(j), ConfigError);
  j = fig1a_config();
  j["policy"] = {{"type", "threshold"}, {"times", {1.0, 2.0}}};
  CHECK_THROWS_AS(cli::parse_config(j), ConfigError);
  CHECK_THROWS_AS(cli::parse_config(json{{"schema_version", 1}, {"preset", "nope"}}), ConfigError);

  j = fig1a_config();
  j["model"] = {{"beta", 3.0}, {"penalty_alpha", 1.0}};
  j["seed"] = 9;
  j["montecarlo"] = {{"N", 41}, {"contact", {{"type", "power_law"}}}};
  const auto cfg = cli::parse_config(j);
  CHECK(cfg.params.beta == 3.0);
  CHECK(cfg.params.penalties[0] == doctest::Approx(5.0));
  CHECK(cfg.mc.seed == 9);
  const auto& law = std::get<mc::TruncatedPowerLaw>(cfg.mc.contact);
  CHECK(mc::truncated_pareto_mean(law.alpha, law.t_min, law.t_max) ==
        doctest::Approx(41 / 3.0).epsilon(1e-12));
  CHECK(cfg.config_hash.size() == 16);
  CHECK(cli::parse_config(j).config_hash == cfg.config_hash);
}

TEST_CASE("policy serialization round trip") {
  const std::vector<ForwardingPolicy> all{
      policy::Threshold{{0.5, 1.0, 1.5, 2.0}}, policy::StaticEnergy{2.0, 0.5},
      policy::StaticTime{{0.1, 0.2, 0.3, 0.4}}, policy::ProbabilityThreshold{0.4},
      policy::InfectionThreshold{0.2}, policy::One{}, policy::Zero{},
      policy::PiecewiseConstant{{{{1.0}, {1.0, 0.0}}}}};
  for (const auto& p : all) {
    const auto j = cli::policy_to_json(p);
    CHECK(cli::policy_to_json(cli::policy_from_json(j)) == j);
  }
  CHECK_THROWS_AS(cli::policy_from_json(json{{"type", "one"}, {"x", 1}}), ConfigError);
  CHECK_THROWS_AS(cli::policy_from_json(json{{"type", "sometimes"}}), ConfigError);
}

TEST_CASE("numbers round trip through CSV") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> U(-1e3, 1e3);
  for (int k = 0; k < 1000; ++k) {
    const double x = U(g) * std::pow(10.0, static_cast<int>(g() % 30) - 15);
    CHECK(std::stod(cli::format_number(x)) == x);
  }
  CHECK_THROWS_AS(cli::format_number(std::nan("")), NumericalError);
  const auto dir = scratch("csv");
  cli::write_csv(dir / "t.csv", {"a", "b"}, {{1.0, std::nullopt}, {0.1, 2.5}});
  const auto [cols, rows] = cli::read_csv(dir / "t.csv");
  CHECK(cols == std::vector<std::string>{"a", "b"});
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0][1].has_value());
  CHECK(*rows[1][0] == 0.1);
}

TEST_CASE("simulate: zero policy keeps S and I constant") {
  const auto dir = scratch("zero");
  auto j = fig1a_config();
  j["policy"] = {{"type", "zero"}};
  j["report_points"] = 11;
  REQUIRE(dtnctl("simulate --config " + write_config(dir, j).string() + " --out " + dir.string()) == 0);
  const auto [cols, rows] = cli::read_csv(dir / "trajectory.csv");
  REQUIRE(rows.size() == 11);
  CHECK(cols.front() == "t");
  CHECK(cols.back() == "u5");
  for (const auto& r : rows)
    for (std::size_t c = 1; c <= 12; ++c) CHECK(*r[c] == *rows.front()[c]);
  const auto s = read_json(dir / "summary.json");
  CHECK(s["meets_target"] == false);
  CHECK(s["unbiased_cost"] == 0.0);
}

TEST_CASE("optimize, verify and re-simulate the fig1a preset") {
  const auto dir = scratch("fig1a");
  const auto cfg = write_config(dir, fig1a_config());
  REQUIRE(dtnctl("optimize --verify --config " + cfg.string() + " --out " + dir.string()) == 0);
  const auto s = read_json(dir / "summary.json");
  CHECK(s["feasible"] == true);
  CHECK(s["delivery"].get<double>() >= 0.9 - 1e-6);
  CHECK(s["verification"]["status"] == "pass");

  // Feed the optimizer output back through simulate and recompute metrics from the CSV.
  auto j = fig1a_config();
  j["policy"] = s["policy"];
  const auto dir2 = scratch("fig1a_sim");
  REQUIRE(dtnctl("simulate --config " + write_config(dir2, j).string() + " --out " + dir2.string()) == 0);
  const auto s2 = read_json(dir2 / "summary.json");
  const auto [cols, rows] = cli::read_csv(dir2 / "trajectory.csv");
  const auto cfgv = cli::parse_config(j);
  const auto& p = cfgv.params;
  const auto& first = rows.front();
  const auto& last = rows.back();
  double c0 = 0.0, c1 = 0.0;
  for (int i = 0; i <= p.B; ++i) {
    c0 += p.penalties[i] * (*first[1 + i] + *first[1 + p.levels() + i]);
    c1 += p.penalties[i] * (*last[1 + i] + *last[1 + p.levels() + i]);
  }
  const double E = *last[1 + 2 * p.levels()];
  CHECK(std::abs(delivery_from_exposure(E, p.beta0) - s2["delivery"].get<double>()) <= 1e-9);
  CHECK(std::abs((c1 - c0) - s2["unbiased_cost"].get<double>()) <= 1e-9);
  CHECK(std::abs(s2["unbiased_cost"].get<double>() - s["unbiased_cost"].get<double>()) <= 1e-9);

  REQUIRE(dtnctl("verify --config " + write_config(dir2, j).string() + " --out " + dir2.string()) == 0);
  CHECK(read_json(dir2 / "summary.json")["verification"]["status"] == "pass");
}

TEST_CASE("heuristic one echoes the constant policy") {
  const auto dir = scratch("one");
  const auto cfg = write_config(dir, fig1a_config());
  REQUIRE(dtnctl("heuristic one --config " + cfg.string() + " --out " + dir.string()) == 0);
  const auto s = read_json(dir / "summary.json");
  CHECK(s["policy"]["type"] == "one");
  CHECK(s["class"] == "one");
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  auto j = fig1a_config();
  j["bogus"] = true;
  CHECK(dtnctl("simulate --config " + write_config(dir, j).string() + " --out " + dir.string()) == 2);
  CHECK(dtnctl("simulate --config " + (dir / "missing.json").string()) == 2);
  CHECK(dtnctl("frobnicate --config x") == 2);
  // fig1a with a horizon too short to reach 99%.
  j = fig1a_config();
  j["model"] = {{"p", 0.99}, {"horizon", 0.5}};
  CHECK(dtnctl("optimize --config " + write_config(dir, j).string() + " --out " + dir.string()) == 3);
  CHECK(read_json(dir / "summary.json")["feasible"] == false);
  j = fig1a_config();
  j["experiment"] = {{"p_values", json::array()}};
  CHECK(dtnctl("experiment validation --config " + write_config(dir, j).string() + " --out " +
               dir.string()) == 2);
  CHECK(dtnctl("experiment unknown --config " + write_config(dir, fig1a_config()).string() +
               " --out " + dir.string()) == 2);
  CHECK(dtnctl("--help") == 0);
}

TEST_CASE("identical config and seed give byte-identical output") {
  json j{{"schema_version", 1},
         {"preset", "validation_exponential"},
         {"policy", {{"type", "threshold"}, {"times", {0.5, 1.0, 1.5, 2.0}}}},
         {"montecarlo", {{"runs", 20}, {"theta_star", 0.2}, {"report_points", 11}}}};
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  const auto cfg = write_config(a, j);
  REQUIRE(dtnctl("montecarlo --seed 5 --config " + cfg.string() + " --out " + a.string()) == 0);
  REQUIRE(dtnctl("montecarlo --seed 5 --threads 2 --config " + cfg.string() + " --out " + b.string()) == 0);
  REQUIRE(dtnctl("montecarlo --seed 6 --config " + cfg.string() + " --out " + c.string()) == 0);
  CHECK(slurp(a / "montecarlo.csv") == slurp(b / "montecarlo.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  CHECK(slurp(a / "montecarlo.csv") != slurp(c / "montecarlo.csv"));
  const auto s = read_json(a / "summary.json");
  CHECK(s["seed"] == 5);
  CHECK(s["runs"] == 20);
}
