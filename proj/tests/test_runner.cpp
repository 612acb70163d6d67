#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "difflim/errors.hpp"
#include "difflim/runner.hpp"

using namespace difflim;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DIFFLIM_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing and field-level errors") {
  const ExperimentConfig cfg = parse_config(json{{"scenario", "besq(2)"},
                                                 {"t_ladder", {10, 100}},
                                                 {"n_paths", 50},
                                                 {"seed", 7},
                                                 {"step", {{"h_max", 5e-4}}},
                                                 {"thresholds", {{"ks", 0.1}}}});
  CHECK(cfg.scenario == "besq(2)");
  CHECK(cfg.t_ladder == std::vector<double>{10, 100});
  CHECK(cfg.n_paths == 50);
  CHECK(cfg.seed_or_default() == 7);
  CHECK(cfg.step.h_max == 5e-4);
  CHECK(cfg.thresholds.ks == 0.1);
  CHECK(cfg.probes() == std::vector<double>{1.0});

  CHECK(config_error({{"scenario", "besq(1)"}, {"probe_times", {0.5, 2.0}}}).find("probe_times[1]") != std::string::npos);
  CHECK(config_error({{"scenario", "besq(1)"}, {"t_ladder", {100, 10}}}).find("t_ladder[1]") != std::string::npos);
  CHECK(config_error({{"scenario", "besq(1)"}, {"n_paths", "many"}}).find("n_paths") != std::string::npos);
  CHECK(config_error({{"scenario", "besq(1)"}, {"colour", 1}}).find("colour") != std::string::npos);
  CHECK(config_error({{"scenario", "besq(1)"}, {"step", {{"hmax", 1}}}}).find("step.hmax") != std::string::npos);
  CHECK(config_error({{"scenario", "nope"}}).find("scenario") != std::string::npos);
  CHECK(config_error({{"scenario", "besq(1)"}, {"statistics", {"zeta", "bogus"}}}).find("statistics[1]") !=
        std::string::npos);
  CHECK(config_error(json::object()).find("scenario") != std::string::npos);
  CHECK(config_error({{"scenario", "besq(1)"}, {"integrator", "rk4"}}).find("integrator") != std::string::npos);
}

TEST_CASE("config survives a JSON round trip") {
  ExperimentConfig cfg;
  cfg.scenario = "periodic_k1(0.5)";
  cfg.seed = 99;
  cfg.statistics = {"zeta", "i_t"};
  const ExperimentConfig back = parse_config(config_to_json(cfg));
  CHECK(back.scenario == cfg.scenario);
  CHECK(back.seed_or_default() == 99);
  CHECK(back.statistics == cfg.statistics);
  CHECK(back.t_ladder == cfg.t_ladder);
}

TEST_CASE("empty report is header-only CSV") {
  const Report r;
  CHECK(report_to_string(r, "csv") == "scenario,theorem,T,t,statistic,metric,value,stderr,verdict\n");
  CHECK(r.passed());
}

TEST_CASE("report CSV round trip is byte-identical") {
  Report r;
  r.records.push_back({"besq(1)", "Thm2", 100.0, 1.0, "zeta", "ks", 0.0123456789012345, std::nan(""), "info"});
  r.records.push_back({"besq(1)", "Thm2", 1e4, 1.0, "zeta", "mean_finite", 3.99, 0.031, "info"});
  r.records.push_back({"odd,\"id\"", "Thm7", 0.1, 0.0, "sup_abs(zeta)", "trend_ks", -0.5, 1e-300, "fail"});
  r.sort();
  const std::string csv = report_to_string(r, "csv");
  std::istringstream in(csv);
  const Report back = parse_report_csv(in);
  CHECK(back.records.size() == 3);
  CHECK(report_to_string(back, "csv") == csv);
  CHECK(std::isnan(back.records[0].stderr_));
  CHECK_FALSE(back.passed());

  std::istringstream bad("scenario,theorem\n");
  CHECK_THROWS_AS(parse_report_csv(bad), std::invalid_argument);
}

TEST_CASE("JSON mirrors the CSV records") {
  Report r;
  r.records.push_back({"zero_drift", "Thm2", 10.0, 1.0, "zeta", "ks", 0.01, std::nan(""), "info"});
  r.records.push_back({"zero_drift", "Thm2", 10.0, 1.0, "zeta", "trend_ks", 0.0, std::nan(""), "pass"});
  const json j = json::parse(report_to_string(r, "json"));
  REQUIRE(j["records"].size() == 2);
  CHECK(j["records"][0]["metric"] == "ks");
  CHECK(j["records"][0]["value"] == 0.01);
  CHECK(j["records"][0]["stderr"].is_null());
  CHECK(j["records"][1]["verdict"] == "pass");
  CHECK(j["passed"] == true);
  CHECK_THROWS_AS(report_to_string(r, "xml"), ConfigError);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345678.9, -2.5, 0.0}) {
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("zero drift experiment matches its exact limit") {
  ExperimentConfig cfg;
  cfg.scenario = "zero_drift";
  cfg.t_ladder = {100.0};
  cfg.n_paths = 10000;
  cfg.seed = 3;
  const Report r = run_experiment(cfg);
  const auto ks = r.find("zeta", "ks");
  REQUIRE(ks.size() == 1);
  CHECK(ks[0]->value < 0.03);
  CHECK(r.passed());
  for (const auto& rec : r.records) {
    CHECK((rec.verdict == "pass" || rec.verdict == "fail" || rec.verdict == "info"));
  }
}

TEST_CASE("report is identical across thread counts") {
  ExperimentConfig cfg;
  cfg.scenario = "besq(1)";
  cfg.t_ladder = {10.0, 100.0};
  cfg.n_paths = 300;
  cfg.seed = 11;
  cfg.statistics = {"zeta", "beta2", "i_t", "sup_abs(eta)"};
  cfg.threads = 1;
  const std::string a = report_to_string(run_experiment(cfg), "csv");
  cfg.threads = 3;
  const Report rb = run_experiment(cfg);
  CHECK(report_to_string(rb, "csv") == a);
  CHECK(report_to_string(rb, "json") == report_to_string(run_experiment(cfg), "json"));
}

TEST_CASE("condition report along the ladder") {
  ExperimentConfig cfg;
  cfg.scenario = "oscillatory_beta1";
  cfg.t_ladder = {100.0, 400.0};
  const Report r = check_conditions(cfg);
  const auto a4 = r.find("A4", "condition");
  REQUIRE(a4.size() == 2);
  CHECK(a4[0]->value == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(a4[1]->value == doctest::Approx(0.1).epsilon(1e-6));
  const auto trend = r.find("A4", "trend");
  REQUIRE(trend.size() == 1);
  CHECK(trend[0]->verdict == "pass");
}

TEST_CASE("CLI exit codes") {
  CHECK(run_cli("list-scenarios") == 0);
  CHECK(run_cli("compare --scenario zero_drift --t-ladder 10 --paths 500 --seed 1") == 0);
  CHECK(run_cli("compare --scenario zero_drift --t-ladder 10 --paths 500 --horizon -1") == 2);
  CHECK(run_cli("report --scenario nope") == 2);
  CHECK(run_cli("report --scenario zero_drift --seed abc") == 2);
  CHECK(run_cli("report --config /nonexistent.json") == 2);
  CHECK(run_cli("frobnicate") == 2);

  const std::string path = "test_runner_bad_config.json";
  {
    std::ofstream out(path);
    out << R"j({"scenario": "besq(1)", "horizon": 1, "probe_times": [2.0]})j";
  }
  CHECK(run_cli("report --config " + path) == 2);
  // Forcing an impossible KS threshold turns the verdict into a failure.
  {
    std::ofstream out(path);
    out << R"j({"scenario": "besq(1)", "t_ladder": [10], "n_paths": 200, "thresholds": {"ks": 1e-6}})j";
  }
  CHECK(run_cli("compare --config " + path) == 1);
  std::remove(path.c_str());
}
