// difflim command-line interface.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "difflim/drift_models.hpp"
#include "difflim/errors.hpp"
#include "difflim/rng.hpp"
#include "difflim/runner.hpp"
#include "difflim/scale.hpp"
#include "difflim/sde_engine.hpp"

using namespace difflim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::string scenario;
  std::vector<double> t_ladder;
  long long paths = -1;
  double horizon = 0.0;
  std::string seed;
  double quad_tol = 0.0;
  int threads = -1;
  std::string out = "-";
  std::string format = "csv";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--scenario", c.scenario, "scenario id, e.g. besq(1)");
  cmd->add_option("--t-ladder", c.t_ladder, "comma-separated T values")->delimiter(',');
  cmd->add_option("--paths", c.paths, "number of paths");
  cmd->add_option("--horizon", c.horizon, "time horizon L");
  cmd->add_option("--seed", c.seed, "master seed (falls back to $DIFFLIM_SEED, then 1)");
  cmd->add_option("--quad-tol", c.quad_tol, "quadrature tolerance");
  cmd->add_option("--threads", c.threads, "worker threads (0: all cores)");
  cmd->add_option("--out", c.out, "output path ('-' for stdout)");
  cmd->add_option("--format", c.format, "report format")->check(CLI::IsMember({"csv", "json"}));
}

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(text, &pos);
    if (pos != text.size() || text.front() == '-') throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(source + ": expected a nonnegative integer seed, got '" + text + "'");
  }
}

ExperimentConfig build_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) cfg = load_config(c.config);
  if (!c.scenario.empty()) cfg.scenario = c.scenario;
  if (!c.t_ladder.empty()) cfg.t_ladder = c.t_ladder;
  if (c.paths >= 0) cfg.n_paths = static_cast<std::size_t>(c.paths);
  if (c.horizon != 0.0) cfg.horizon = c.horizon;
  if (c.quad_tol != 0.0) cfg.quad_tol = c.quad_tol;
  if (c.threads >= 0) cfg.threads = static_cast<unsigned>(c.threads);
  if (!c.seed.empty()) {
    cfg.seed = parse_seed(c.seed, "--seed");
  } else if (!cfg.seed) {
    if (const char* env = std::getenv("DIFFLIM_SEED"); env && *env) cfg.seed = parse_seed(env, "DIFFLIM_SEED");
  }
  validate_config(cfg);
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
}

int list_scenarios() {
  std::cout << std::left << std::setw(28) << "id" << std::setw(34) << "parameters" << std::setw(22) << "theorems"
            << "description\n";
  for (const auto& info : registry_list()) {
    std::cout << std::setw(28) << info.pattern << std::setw(34) << info.parameters << std::setw(22) << info.tags
              << info.description << '\n';
  }
  return kExitOk;
}

int simulate(const Common& c, double T_override, bool trace, long long path_index, const std::string& integrator) {
  ExperimentConfig cfg = build_config(c);
  if (!integrator.empty()) cfg.integrator = integrator;
  validate_config(cfg);
  const Scenario s = registry_get(cfg.scenario);
  const double T = T_override > 0.0 ? T_override : cfg.t_ladder.front();
  const std::uint64_t seed = cfg.seed_or_default();
  std::optional<ScaleTable> tab;
  if (cfg.integrator == "transformed") {
    const double X = cfg.domain_half_width > 0.0 ? cfg.domain_half_width : default_domain(s, cfg.horizon);
    tab = build_scale(s.drift, T, X, cfg.quad_tol);
  }
  std::ostringstream os;
  if (trace) {
    const auto idx = static_cast<std::size_t>(std::max(0LL, path_index));
    const PathSample p = tab ? simulate_path_transformed(s, *tab, T, cfg.horizon, cfg.step, mix(seed, idx))
                             : simulate_path_em(s, T, cfg.horizon, cfg.step, mix(seed, idx), cfg.domain_half_width);
    write_trace_csv(p, os);
  } else {
    std::vector<Statistic> stats;
    for (const auto& n : cfg.statistics) stats.push_back(parse_statistic(n));
    if (stats.empty()) {
      for (auto acc : {Accumulator::xi, Accumulator::zeta, Accumulator::eta, Accumulator::beta1, Accumulator::beta2,
                       Accumulator::i_t}) {
        stats.push_back({acc, Reduction::value});
      }
    }
    EnsembleOptions opts;
    opts.step = cfg.step;
    opts.threads = cfg.threads;
    opts.domain_half_width = cfg.domain_half_width;
    if (tab) opts.table = &*tab;
    const auto probes = cfg.probes();
    const EnsembleResult r = run_ensemble(s, T, cfg.horizon, cfg.n_paths, seed, probes, stats, opts);
    os << "path,t";
    for (const auto& st : stats) os << ',' << st.name();
    os << '\n';
    for (std::size_t i = 0; i < r.path_index.size(); ++i) {
      for (std::size_t p = 0; p < probes.size(); ++p) {
        os << r.path_index[i] << ',' << format_number(probes[p]);
        for (std::size_t k = 0; k < stats.size(); ++k) os << ',' << format_number(r.get(p, k)[i]);
        os << '\n';
      }
    }
    if (r.n_failed > 0) std::cerr << r.n_failed << " of " << r.n_requested << " paths failed and were dropped\n";
  }
  write_text(c.out, os.str());
  return kExitOk;
}

int compare(const Common& c) {
  const ExperimentConfig cfg = build_config(c);
  const Report r = run_experiment(cfg);
  std::ostringstream os;
  for (const auto& x : r.records) {
    if (x.verdict == "info") continue;
    os << std::left << std::setw(6) << x.verdict << std::setw(6) << x.theorem << std::setw(18) << x.statistic
       << std::setw(22) << x.metric << "T=" << format_number(x.T) << " t=" << format_number(x.t)
       << " value=" << format_number(x.value) << '\n';
  }
  os << (r.passed() ? "PASS" : "FAIL") << ' ' << cfg.scenario << '\n';
  write_text(c.out, os.str());
  return r.passed() ? kExitOk : kExitFail;
}

int report(const Common& c) {
  const ExperimentConfig cfg = build_config(c);
  const Report r = run_experiment(cfg);
  emit_report(r, c.format, c.out);
  return r.passed() ? kExitOk : kExitFail;
}

int conditions(const Common& c) {
  const ExperimentConfig cfg = build_config(c);
  const Report r = check_conditions(cfg);
  emit_report(r, c.format, c.out);
  return r.passed() ? kExitOk : kExitFail;
}

const char* kConfigHelp = R"(
Config file (JSON); every key is optional except scenario:
  scenario            scenario id                                  (required)
  t_ladder            strictly increasing T values                 [100, 1000, 10000]
  horizon             time horizon L                               1
  probe_times         times in [0, L] where laws are compared      [L]
  n_paths             paths per ensemble                           10000
  seed                master seed                                  $DIFFLIM_SEED or 1
  quad_tol            quadrature tolerance                         1e-10
  threads             worker threads, 0 = all cores                0
  integrator          euler | transformed                          euler
  statistics          from zeta, beta1, beta2, beta_xi, i_t, eta, xi, sup_abs(...)
                                                                   chosen from theorem tags
  step.h_max          largest time step                            1e-3
  step.stability      h <= stability / (1 + sup|a_T|^2)           0.1
  step.oscillation    h <= oscillation * (feature scale of g_T)^2  0.4
  coupled_ladder      dyadic steps, one Brownian path per seed     true
                      shared by all rungs of the ladder
  limit_step          time step of the limit equation              1e-3
  domain_half_width   excursion bound, 0 = max(5, 3 sqrt(L)+|x0|)  0
  condition_radius    N in the condition checks                    2
  thresholds.ks                                                    0.05
  thresholds.wasserstein1                                          0.05
  thresholds.mean     allowance added to 3 stderr                  0.05
  thresholds.trend_slack                                           0.1
  thresholds.degenerate_stdev                                      0.1
Exit codes: 0 success, 1 a verdict failed, 2 configuration error.
)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks of limit theorems for diffusions with large drift"};
  app.footer(kConfigHelp);
  app.require_subcommand(1);

  Common common;
  double T_override = 0.0;
  bool trace = false;
  long long path_index = 0;
  std::string integrator;

  auto* list = app.add_subcommand("list-scenarios", "print the scenario registry");
  auto* check = app.add_subcommand("check-conditions", "evaluate the analytic conditions along the T-ladder");
  auto* sim = app.add_subcommand("simulate", "simulate one ensemble and print per-path values");
  auto* cmp = app.add_subcommand("compare", "run the experiment and print verdicts");
  auto* rep = app.add_subcommand("report", "run the experiment and write the full report");
  for (auto* cmd : {check, sim, cmp, rep}) add_common(cmd, common);
  sim->add_option("--T", T_override, "T value (default: first ladder entry)");
  sim->add_flag("--trace", trace, "write the full trajectory of one path");
  sim->add_option("--path", path_index, "path index for --trace");
  sim->add_option("--integrator", integrator, "euler or transformed")->check(CLI::IsMember({"euler", "transformed"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (list->parsed()) return list_scenarios();
    if (check->parsed()) return conditions(common);
    if (sim->parsed()) return simulate(common, T_override, trace, path_index, integrator);
    if (cmp->parsed()) return compare(common);
    if (rep->parsed()) return report(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NotFoundError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainTooWideError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitConfig;
}
