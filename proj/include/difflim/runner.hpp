#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "difflim/drift_models.hpp"
#include "difflim/sde_engine.hpp"

namespace difflim {

struct Thresholds {
  double ks = 0.05;
  double wasserstein1 = 0.05;
  double mean = 0.05;          // additive allowance on top of 3 combined stderrs
  double trend_slack = 0.1;
  // A limit sample with stdev below this (times max(1, |mean|)) is treated as
  // degenerate and judged by Wasserstein-1 instead of KS.
  double degenerate_stdev = 0.1;
};

struct ExperimentConfig {
  std::string scenario;
  std::vector<double> t_ladder = {1e2, 1e3, 1e4};
  double horizon = 1.0;
  std::vector<double> probe_times;  // empty: {horizon}
  std::size_t n_paths = 10000;
  std::optional<std::uint64_t> seed;
  double quad_tol = 1e-10;
  unsigned threads = 0;
  std::string integrator = "euler";  // euler | transformed
  std::vector<std::string> statistics;  // empty: chosen from the theorem tags
  StepPolicy step;
  // Dyadic steps and one Brownian path per seed shared by every rung, so the
  // distances along the ladder differ by the effect of T, not by sampling noise.
  bool coupled_ladder = true;
  double limit_step = 1e-3;
  double domain_half_width = 0.0;
  double condition_radius = 2.0;
  Thresholds thresholds;

  std::uint64_t seed_or_default() const { return seed.value_or(1); }
  std::vector<double> probes() const { return probe_times.empty() ? std::vector<double>{horizon} : probe_times; }
};

// Field-level ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void validate_config(const ExperimentConfig& cfg);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct ReportRecord {
  std::string scenario;
  std::string theorem;
  double T = 0.0;
  double t = 0.0;
  std::string statistic;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;  // NaN when not applicable
  std::string verdict;   // pass | fail | info
};

struct Report {
  std::vector<ReportRecord> records;

  void sort();
  bool passed() const;
  std::vector<const ReportRecord*> find(const std::string& statistic, const std::string& metric) const;
};

Report run_experiment(const ExperimentConfig& cfg);
// Condition checker rows only (no simulation).
Report check_conditions(const ExperimentConfig& cfg);

void write_report_csv(const Report& r, std::ostream& os);
void write_report_json(const Report& r, std::ostream& os);
std::string report_to_string(const Report& r, const std::string& format);
void emit_report(const Report& r, const std::string& format, const std::string& path);
Report parse_report_csv(std::istream& is);

// Shortest representation that round-trips; "nan" and "inf" spelled out.
std::string format_number(double v);

}  // namespace difflim
