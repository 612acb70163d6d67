#include "difflim/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "difflim/errors.hpp"
#include "difflim/limits.hpp"
#include "difflim/rng.hpp"
#include "difflim/scale.hpp"
#include "difflim/stats.hpp"

namespace difflim {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void config_fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) config_fail(field, "expected a number");
  return j.get<double>();
}

std::vector<double> get_numbers(const json& j, const std::string& field) {
  if (!j.is_array()) config_fail(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::size_t get_count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) config_fail(field, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) config_fail(field, "expected a string");
  return j.get<std::string>();
}

template <class Handlers>
void parse_object(const json& j, const std::string& prefix, const Handlers& handlers) {
  if (!j.is_object()) config_fail(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string field = prefix.empty() ? key : prefix + "." + key;
    const auto it = handlers.find(key);
    if (it == handlers.end()) config_fail(field, "unknown key");
    it->second(value, field);
  }
}

using Handler = std::function<void(const json&, const std::string&)>;

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  const std::map<std::string, Handler> step_keys = {
      {"h_max", [&](const json& v, const std::string& f) { cfg.step.h_max = get_number(v, f); }},
      {"stability", [&](const json& v, const std::string& f) { cfg.step.stability = get_number(v, f); }},
      {"oscillation", [&](const json& v, const std::string& f) { cfg.step.oscillation = get_number(v, f); }},
  };
  const std::map<std::string, Handler> threshold_keys = {
      {"ks", [&](const json& v, const std::string& f) { cfg.thresholds.ks = get_number(v, f); }},
      {"wasserstein1", [&](const json& v, const std::string& f) { cfg.thresholds.wasserstein1 = get_number(v, f); }},
      {"mean", [&](const json& v, const std::string& f) { cfg.thresholds.mean = get_number(v, f); }},
      {"trend_slack", [&](const json& v, const std::string& f) { cfg.thresholds.trend_slack = get_number(v, f); }},
      {"degenerate_stdev",
       [&](const json& v, const std::string& f) { cfg.thresholds.degenerate_stdev = get_number(v, f); }},
  };
  const std::map<std::string, Handler> keys = {
      {"scenario", [&](const json& v, const std::string& f) { cfg.scenario = get_string(v, f); }},
      {"t_ladder", [&](const json& v, const std::string& f) { cfg.t_ladder = get_numbers(v, f); }},
      {"horizon", [&](const json& v, const std::string& f) { cfg.horizon = get_number(v, f); }},
      {"probe_times", [&](const json& v, const std::string& f) { cfg.probe_times = get_numbers(v, f); }},
      {"n_paths", [&](const json& v, const std::string& f) { cfg.n_paths = get_count(v, f); }},
      {"seed",
       [&](const json& v, const std::string& f) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
           config_fail(f, "expected a nonnegative integer");
         }
         cfg.seed = v.get<std::uint64_t>();
       }},
      {"quad_tol", [&](const json& v, const std::string& f) { cfg.quad_tol = get_number(v, f); }},
      {"threads", [&](const json& v, const std::string& f) { cfg.threads = static_cast<unsigned>(get_count(v, f)); }},
      {"integrator", [&](const json& v, const std::string& f) { cfg.integrator = get_string(v, f); }},
      {"statistics",
       [&](const json& v, const std::string& f) {
         if (!v.is_array()) config_fail(f, "expected an array of strings");
         cfg.statistics.clear();
         for (std::size_t i = 0; i < v.size(); ++i) cfg.statistics.push_back(get_string(v[i], f + "[" + std::to_string(i) + "]"));
       }},
      {"step", [&](const json& v, const std::string& f) { parse_object(v, f, step_keys); }},
      {"coupled_ladder",
       [&](const json& v, const std::string& f) {
         if (!v.is_boolean()) config_fail(f, "expected true or false");
         cfg.coupled_ladder = v.get<bool>();
       }},
      {"limit_step", [&](const json& v, const std::string& f) { cfg.limit_step = get_number(v, f); }},
      {"domain_half_width", [&](const json& v, const std::string& f) { cfg.domain_half_width = get_number(v, f); }},
      {"condition_radius", [&](const json& v, const std::string& f) { cfg.condition_radius = get_number(v, f); }},
      {"thresholds", [&](const json& v, const std::string& f) { parse_object(v, f, threshold_keys); }},
  };
  parse_object(j, "", keys);
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.scenario.empty()) config_fail("scenario", "missing");
  try {
    registry_get(cfg.scenario);
  } catch (const NotFoundError& e) {
    config_fail("scenario", e.what());
  }
  if (cfg.t_ladder.empty()) config_fail("t_ladder", "must not be empty");
  for (std::size_t k = 0; k < cfg.t_ladder.size(); ++k) {
    const std::string f = "t_ladder[" + std::to_string(k) + "]";
    if (!(cfg.t_ladder[k] > 0.0) || !std::isfinite(cfg.t_ladder[k])) config_fail(f, "must be positive");
    if (k > 0 && !(cfg.t_ladder[k] > cfg.t_ladder[k - 1])) config_fail(f, "ladder must be strictly increasing");
  }
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) config_fail("horizon", "must be positive");
  for (std::size_t k = 0; k < cfg.probe_times.size(); ++k) {
    const double t = cfg.probe_times[k];
    if (!(t >= 0.0 && t <= cfg.horizon)) {
      std::ostringstream os;
      os << "value " << t << " outside [0, horizon=" << cfg.horizon << "]";
      config_fail("probe_times[" + std::to_string(k) + "]", os.str());
    }
  }
  if (cfg.n_paths < 1) config_fail("n_paths", "must be at least 1");
  if (!(cfg.quad_tol > 0.0)) config_fail("quad_tol", "must be positive");
  if (cfg.integrator != "euler" && cfg.integrator != "transformed") {
    config_fail("integrator", "expected 'euler' or 'transformed'");
  }
  for (std::size_t k = 0; k < cfg.statistics.size(); ++k) {
    try {
      parse_statistic(cfg.statistics[k]);
    } catch (const std::invalid_argument& e) {
      config_fail("statistics[" + std::to_string(k) + "]", e.what());
    }
  }
  if (!(cfg.step.h_max > 0.0)) config_fail("step.h_max", "must be positive");
  if (!(cfg.step.stability > 0.0)) config_fail("step.stability", "must be positive");
  if (!(cfg.step.oscillation > 0.0)) config_fail("step.oscillation", "must be positive");
  if (!(cfg.limit_step > 0.0)) config_fail("limit_step", "must be positive");
  if (cfg.domain_half_width < 0.0) config_fail("domain_half_width", "must be nonnegative");
  if (!(cfg.condition_radius > 0.0)) config_fail("condition_radius", "must be positive");
  if (!(cfg.thresholds.ks > 0.0 && cfg.thresholds.ks <= 1.0)) config_fail("thresholds.ks", "must be in (0, 1]");
  if (!(cfg.thresholds.wasserstein1 > 0.0)) config_fail("thresholds.wasserstein1", "must be positive");
  if (!(cfg.thresholds.mean >= 0.0)) config_fail("thresholds.mean", "must be nonnegative");
  if (!(cfg.thresholds.trend_slack >= 0.0)) config_fail("thresholds.trend_slack", "must be nonnegative");
  if (!(cfg.thresholds.degenerate_stdev >= 0.0)) config_fail("thresholds.degenerate_stdev", "must be nonnegative");
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["scenario"] = cfg.scenario;
  j["t_ladder"] = cfg.t_ladder;
  j["horizon"] = cfg.horizon;
  j["probe_times"] = cfg.probes();
  j["n_paths"] = cfg.n_paths;
  j["seed"] = cfg.seed_or_default();
  j["quad_tol"] = cfg.quad_tol;
  j["threads"] = cfg.threads;
  j["integrator"] = cfg.integrator;
  j["statistics"] = cfg.statistics;
  j["step"] = {{"h_max", cfg.step.h_max}, {"stability", cfg.step.stability}, {"oscillation", cfg.step.oscillation}};
  j["coupled_ladder"] = cfg.coupled_ladder;
  j["limit_step"] = cfg.limit_step;
  j["domain_half_width"] = cfg.domain_half_width;
  j["condition_radius"] = cfg.condition_radius;
  j["thresholds"] = {{"ks", cfg.thresholds.ks},
                     {"wasserstein1", cfg.thresholds.wasserstein1},
                     {"mean", cfg.thresholds.mean},
                     {"trend_slack", cfg.thresholds.trend_slack},
                     {"degenerate_stdev", cfg.thresholds.degenerate_stdev}};
  return j;
}

// ---------------------------------------------------------------------------

void Report::sort() {
  std::sort(records.begin(), records.end(), [](const ReportRecord& a, const ReportRecord& b) {
    return std::tie(a.scenario, a.theorem, a.T, a.t, a.statistic, a.metric) <
           std::tie(b.scenario, b.theorem, b.T, b.t, b.statistic, b.metric);
  });
}

bool Report::passed() const {
  return std::none_of(records.begin(), records.end(), [](const ReportRecord& r) { return r.verdict == "fail"; });
}

std::vector<const ReportRecord*> Report::find(const std::string& statistic, const std::string& metric) const {
  std::vector<const ReportRecord*> out;
  for (const auto& r : records) {
    if (r.statistic == statistic && r.metric == metric) out.push_back(&r);
  }
  return out;
}

namespace {

struct Recorder {
  const Scenario& s;
  Report& report;

  void add(const std::string& theorem, double T, double t, const std::string& statistic, const std::string& metric,
           double value, double se, const std::string& verdict) {
    report.records.push_back({s.id, theorem, T, t, statistic, metric, value, se, verdict});
  }
};

std::string verdict(bool ok) { return ok ? "pass" : "fail"; }

// One condition value per ladder rung; the trend row passes when the values
// decrease (up to the slack) or vanish to rounding.
void condition_trend(Recorder& rec, const std::string& theorem, const std::string& name,
                     const std::vector<double>& ladder, const std::vector<double>& values, double slack) {
  const double worst = *std::max_element(values.begin(), values.end());
  TrendVerdict tv;
  if (worst <= 1e-9) {
    tv.pass = true;
  } else {
    tv = convergence_trend(ladder, values, values.front() * (1.0 + 1e-12), slack);
    // Deterministic values: the slack is relative to the first rung.
    if (ladder.size() > 1) tv.pass = tv.pass && values.back() < values.front();
  }
  rec.add(theorem, ladder.back(), 0.0, name, "trend", tv.slope, kNaN, verdict(tv.pass));
}

void run_conditions(const ExperimentConfig& cfg, const Scenario& s, Recorder& rec) {
  const double N = cfg.condition_radius;
  const double X = std::max(cfg.domain_half_width > 0.0 ? cfg.domain_half_width : default_domain(s, cfg.horizon), N);
  std::map<std::pair<std::string, std::string>, std::vector<double>> rows;
  for (double T : cfg.t_ladder) {
    const ScaleTable tab = build_scale(s.drift, T, X, cfg.quad_tol);
    auto put = [&](const std::string& th, const std::string& name, double v) {
      rec.add(th, T, 0.0, name, "condition", v, kNaN, "info");
      rows[{th, name}].push_back(v);
    };
    if (s.has_tag(Theorem::thm2)) {
      put("Thm2", "A3_q1", check_A3(tab, [&](double x) { return residual_q1(s, T, x); }, N));
      put("Thm2", "A3_q2", check_A3(tab, [&](double x) { return residual_q2(s, T, x); }, N));
      rec.add("Thm2", T, 0.0, "A1_ratio", "condition", check_A1(tab, s.transform, N), kNaN, "info");
    }
    if (s.has_tag(Theorem::thm3)) {
      put("Thm3", "A3_g", check_A3(tab, [&](double x) { return residual_thm3(s, T, x); }, N));
    }
    if (s.has_tag(Theorem::thm4)) put("Thm4", "A4", check_A4(tab, s, N));
    if (s.has_tag(Theorem::thm5)) {
      put("Thm5", "A3_g", check_A3(tab, [&](double x) { return residual_thm5(s, T, x); }, N));
    }
    if (s.has_tag(Theorem::thm6)) {
      double sup = 0.0;
      for (std::size_t i = 0; i < tab.size(); ++i) {
        if (std::abs(tab.x(i)) <= N) sup = std::max(sup, std::abs(residual_thm6(s, T, tab.x(i))));
      }
      put("Thm6", "sup_F", sup);
    }
    if (s.has_tag(Theorem::thm7)) {
      try {
        const Thm7Conditions c = check_thm7(tab, s, N);
        put("Thm7", "cond1", c.cond1_sup);
        put("Thm7", "cond2_sup", c.cond2_sup);
        put("Thm7", "cond2_l2", c.cond2_l2);
      } catch (const ClassError&) {
        rec.add("Thm7", T, 0.0, "K1", "condition", 0.0, kNaN, "fail");
      }
    }
  }
  for (const auto& [key, values] : rows) {
    if (values.size() == cfg.t_ladder.size()) {
      condition_trend(rec, key.first, key.second, cfg.t_ladder, values, cfg.thresholds.trend_slack);
    }
  }
}

// Which limit functional pairs with a finite-T statistic.
struct Pairing {
  std::string theorem;
  std::optional<LimitFunctional> functional;
};

Pairing pair_statistic(const Scenario& s, const Statistic& st) {
  if (st.red != Reduction::value) return {"Thm2", std::nullopt};
  switch (st.acc) {
    case Accumulator::zeta: return {"Thm2", LimitFunctional::zeta};
    case Accumulator::eta: return {"Thm2", LimitFunctional::eta};
    case Accumulator::beta1:
      if (s.has_tag(Theorem::thm4)) return {"Thm4", LimitFunctional::beta1_tilde};
      if (s.has_tag(Theorem::thm3)) return {"Thm3", LimitFunctional::beta1};
      return {"Thm3", std::nullopt};
    case Accumulator::beta2:
      if (s.has_tag(Theorem::thm5)) return {"Thm5", LimitFunctional::beta2};
      return {"Thm5", std::nullopt};
    case Accumulator::i_t:
      if (s.has_tag(Theorem::thm6)) return {"Thm6", LimitFunctional::i0};
      if (s.has_tag(Theorem::thm7)) return {"Thm7", LimitFunctional::i_thm7};
      return {"Thm6", std::nullopt};
    case Accumulator::xi: return {"Thm2", std::nullopt};
    case Accumulator::beta_xi: return {"Thm5", std::nullopt};
  }
  return {"Thm2", std::nullopt};
}

std::vector<Statistic> default_statistics(const Scenario& s) {
  std::vector<Statistic> out = {{Accumulator::zeta, Reduction::value}};
  if (s.has_tag(Theorem::thm3) || s.has_tag(Theorem::thm4)) out.push_back({Accumulator::beta1, Reduction::value});
  if (s.has_tag(Theorem::thm5)) out.push_back({Accumulator::beta2, Reduction::value});
  if (s.has_tag(Theorem::thm6) || s.has_tag(Theorem::thm7)) out.push_back({Accumulator::i_t, Reduction::value});
  return out;
}

void run_simulation(const ExperimentConfig& cfg, const Scenario& s, Recorder& rec) {
  std::vector<Statistic> stats;
  for (const auto& name : cfg.statistics) stats.push_back(parse_statistic(name));
  if (stats.empty()) stats = default_statistics(s);
  const std::vector<double> probes = cfg.probes();
  const std::uint64_t seed = cfg.seed_or_default();
  const std::uint64_t limit_seed = mix(seed, 0);

  // Limit samples: one per (probe, paired statistic), shared by every rung.
  std::vector<Pairing> pairs;
  std::vector<LimitFunctional> euler_fns;
  for (const auto& st : stats) {
    pairs.push_back(pair_statistic(s, st));
    const auto& fn = pairs.back().functional;
    if (!fn) continue;
    if (*fn == LimitFunctional::zeta && s.closed_forms.limit_sampler) continue;
    if (std::find(euler_fns.begin(), euler_fns.end(), *fn) == euler_fns.end()) euler_fns.push_back(*fn);
  }
  LimitEnsemble limit_ens;
  if (!euler_fns.empty()) {
    limit_ens = run_limit_ensemble(s.limit, cfg.horizon, cfg.limit_step, cfg.n_paths, limit_seed, probes, euler_fns,
                                   cfg.threads);
  }
  std::vector<std::vector<std::optional<EmpiricalLaw>>> limit_laws(probes.size(),
                                                                   std::vector<std::optional<EmpiricalLaw>>(stats.size()));
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (std::size_t k = 0; k < stats.size(); ++k) {
      const auto& fn = pairs[k].functional;
      if (!fn) continue;
      if (*fn == LimitFunctional::zeta && s.closed_forms.limit_sampler) {
        if (probes[p] > 0.0) {
          limit_laws[p][k] = EmpiricalLaw(s.closed_forms.limit_sampler(probes[p], cfg.n_paths, mix(limit_seed, p + 1)));
        } else {
          limit_laws[p][k] = EmpiricalLaw(std::vector<double>(cfg.n_paths, s.limit.y0));
        }
      } else {
        const auto idx = static_cast<std::size_t>(std::find(euler_fns.begin(), euler_fns.end(), *fn) - euler_fns.begin());
        limit_laws[p][k] = EmpiricalLaw(limit_ens.get(p, idx));
      }
    }
  }

  // Distances along the ladder per (probe, stat). A degenerate limit law is
  // judged by Wasserstein-1, anything else by KS.
  struct Series {
    std::vector<double> ks, w1;
    bool degenerate = false;
    MeanCI finite, limit;
  };
  std::map<std::pair<std::size_t, std::size_t>, Series> series;

  StepPolicy policy = cfg.step;
  if (cfg.coupled_ladder) {
    policy.dyadic = true;
    double finest = std::numeric_limits<double>::infinity();
    for (double T : cfg.t_ladder) finest = std::min(finest, step_size(s, T, cfg.horizon, policy));
    policy.brownian_step = finest;
  }

  for (std::size_t rung = 0; rung < cfg.t_ladder.size(); ++rung) {
    const double T = cfg.t_ladder[rung];
    EnsembleOptions opts;
    opts.step = policy;
    opts.threads = cfg.threads;
    opts.domain_half_width = cfg.domain_half_width;
    std::optional<ScaleTable> tab;
    if (cfg.integrator == "transformed") {
      const double X = cfg.domain_half_width > 0.0 ? cfg.domain_half_width : default_domain(s, cfg.horizon);
      tab = build_scale(s.drift, T, X, cfg.quad_tol);
      opts.table = &*tab;
    }
    const std::uint64_t rung_seed = cfg.coupled_ladder ? mix(seed, 1) : mix(seed, rung + 1);
    const EnsembleResult ens = run_ensemble(s, T, cfg.horizon, cfg.n_paths, rung_seed, probes, stats, opts);
    if (ens.n_failed > 0) {
      rec.add("Thm2", T, 0.0, "paths", "failed_fraction",
              static_cast<double>(ens.n_failed) / static_cast<double>(ens.n_requested), kNaN, "info");
    }
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const double t = probes[p];
      for (std::size_t k = 0; k < stats.size(); ++k) {
        const std::string name = stats[k].name();
        const std::string& th = pairs[k].theorem;
        const EmpiricalLaw fin(ens.get(p, k));
        const MeanCI mf = mean_ci(fin);
        rec.add(th, T, t, name, "mean_finite", mf.mean, mf.stderr_, "info");
        rec.add(th, T, t, name, "stdev_finite", fin.size() > 1 ? fin.stdev() : 0.0, kNaN, "info");
        if (!limit_laws[p][k]) continue;
        const EmpiricalLaw& lim = *limit_laws[p][k];
        const MeanCI ml = mean_ci(lim);
        const double ks = ks_two_sample(fin, lim);
        const double w1 = wasserstein1(fin, lim);
        rec.add(th, T, t, name, "ks", ks, kNaN, "info");
        rec.add(th, T, t, name, "wasserstein1", w1, kNaN, "info");
        rec.add(th, T, t, name, "mean_limit", ml.mean, ml.stderr_, "info");
        const double lim_sd = lim.size() > 1 ? lim.stdev() : 0.0;
        const bool degenerate = lim_sd <= cfg.thresholds.degenerate_stdev * std::max(1.0, std::abs(ml.mean));
        Series& sr = series[{p, k}];
        sr.ks.push_back(ks);
        sr.w1.push_back(w1);
        sr.degenerate = degenerate;
        sr.finite = mf;
        sr.limit = ml;
      }
    }
  }

  for (const auto& [key, sr] : series) {
    const auto [p, k] = key;
    const bool use_w1 = sr.degenerate;
    const std::vector<double>& values = use_w1 ? sr.w1 : sr.ks;
    const double threshold = use_w1 ? cfg.thresholds.wasserstein1 : cfg.thresholds.ks;
    const TrendVerdict tv = convergence_trend(cfg.t_ladder, values, threshold, cfg.thresholds.trend_slack);
    const std::string name = stats[k].name();
    const std::string& th = pairs[k].theorem;
    const double T = cfg.t_ladder.back();
    rec.add(th, T, probes[p], name, use_w1 ? "trend_wasserstein1" : "trend_ks", tv.slope, kNaN, verdict(tv.pass));
    const double diff = std::abs(sr.finite.mean - sr.limit.mean);
    const double se = std::hypot(sr.finite.stderr_, sr.limit.stderr_);
    rec.add(th, T, probes[p], name, "mean_check", diff, se, verdict(diff <= 3.0 * se + cfg.thresholds.mean));
  }
}

}  // namespace

Report check_conditions(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Scenario s = registry_get(cfg.scenario);
  Report report;
  Recorder rec{s, report};
  run_conditions(cfg, s, rec);
  report.sort();
  return report;
}

Report run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Scenario s = registry_get(cfg.scenario);
  Report report;
  Recorder rec{s, report};
  run_conditions(cfg, s, rec);
  run_simulation(cfg, s, rec);
  report.sort();
  return report;
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

const char* kHeader = "scenario,theorem,T,t,statistic,metric,value,stderr,verdict";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string stderr_field(double v) { return std::isnan(v) ? "" : format_number(v); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s) {
  if (s.empty() || s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("report CSV: bad number '" + s + "'");
  }
  return v;
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_report_csv(const Report& r, std::ostream& os) {
  os << kHeader << '\n';
  for (const auto& x : r.records) {
    os << csv_field(x.scenario) << ',' << csv_field(x.theorem) << ',' << format_number(x.T) << ','
       << format_number(x.t) << ',' << csv_field(x.statistic) << ',' << csv_field(x.metric) << ','
       << format_number(x.value) << ',' << stderr_field(x.stderr_) << ',' << csv_field(x.verdict) << '\n';
  }
}

void write_report_json(const Report& r, std::ostream& os) {
  json arr = json::array();
  for (const auto& x : r.records) {
    json o = json::object();
    o["scenario"] = x.scenario;
    o["theorem"] = x.theorem;
    o["T"] = number_json(x.T);
    o["t"] = number_json(x.t);
    o["statistic"] = x.statistic;
    o["metric"] = x.metric;
    o["value"] = number_json(x.value);
    o["stderr"] = number_json(x.stderr_);
    o["verdict"] = x.verdict;
    arr.push_back(std::move(o));
  }
  json doc = {{"records", std::move(arr)}, {"passed", r.passed()}};
  os << doc.dump(2) << '\n';
}

std::string report_to_string(const Report& r, const std::string& format) {
  std::ostringstream os;
  if (format == "csv") {
    write_report_csv(r, os);
  } else if (format == "json") {
    write_report_json(r, os);
  } else {
    throw ConfigError("unknown report format '" + format + "' (expected csv or json)");
  }
  return os.str();
}

void emit_report(const Report& r, const std::string& format, const std::string& path) {
  const std::string text = report_to_string(r, format);
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

Report parse_report_csv(std::istream& is) {
  Report r;
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw std::invalid_argument("report CSV: missing or wrong header");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) {
      throw std::invalid_argument("report CSV line " + std::to_string(lineno) + ": expected 9 fields");
    }
    r.records.push_back({f[0], f[1], parse_number(f[2]), parse_number(f[3]), f[4], f[5], parse_number(f[6]),
                         parse_number(f[7]), f[8]});
  }
  return r;
}

}  // namespace difflim
