#include "difflim/sde_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "difflim/errors.hpp"
#include "difflim/rng.hpp"

namespace difflim {

namespace {

struct PathState {
  double t = 0.0;
  double xi = 0.0;
  double zeta = 0.0;
  double eta = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta_xi = 0.0;
  double beta_drift = 0.0;
  double i_t = 0.0;
};

double pick(const PathState& st, Accumulator acc) {
  switch (acc) {
    case Accumulator::xi: return st.xi;
    case Accumulator::zeta: return st.zeta;
    case Accumulator::eta: return st.eta;
    case Accumulator::beta1: return st.beta1;
    case Accumulator::beta2: return st.beta2;
    case Accumulator::beta_xi: return st.beta_xi;
    case Accumulator::i_t: return st.i_t;
  }
  return 0.0;
}

std::size_t step_count(double horizon, double h) {
  return static_cast<std::size_t>(std::llround(horizon / h));
}

void guard(double next, double X, std::size_t step, double t) {
  if (!std::isfinite(next)) {
    std::ostringstream os;
    os << "non-finite state at step " << step << " (t=" << t << ")";
    throw NumericalError(os.str(), step);
  }
  if (std::abs(next) > X) {
    std::ostringstream os;
    os << "path left [-" << X << ", " << X << "] at step " << step << " (t=" << t << ", xi=" << next << ")";
    throw ExcursionError(os.str(), step);
  }
}

// Shared accumulator update: everything is built from the same increment dw
// and the realized state change next - xi.
inline void accumulate(const Scenario& s, double T, double h, double xi, double a, double dw, double next,
                       PathState& st) {
  const double g = s.functional.g_eval(T, xi);
  const double gd1 = s.transform.g_d1(T, xi);
  st.beta1 += g * h;
  st.beta2 += g * dw;
  st.beta_xi += g * (next - xi);
  st.beta_drift += g * a * h;
  st.eta += gd1 * dw;
}

inline void finish_node(const Scenario& s, double T, double next, double t, PathState& st) {
  st.xi = next;
  st.t = t;
  st.zeta = s.transform.g_value(T, next);
  st.i_t = s.functional.f_eval(T, next) + st.beta2;
}

PathState initial_state(const Scenario& s, double T) {
  PathState st;
  st.xi = s.x0;
  st.zeta = s.transform.g_value(T, s.x0);
  st.i_t = s.functional.f_eval(T, s.x0);
  return st;
}

// Draws the Wiener increment of one step, possibly as a sum over a finer grid.
struct IncrementSource {
  GaussianStream gs;
  double sqrt_fine;
  unsigned m;

  IncrementSource(std::uint64_t seed, double h, const StepPolicy& policy) : gs(seed) {
    if (policy.brownian_step > 0.0) {
      const double r = h / policy.brownian_step;
      const long long k = std::llround(r);
      if (k < 1 || std::abs(r - static_cast<double>(k)) > 1e-9 * r) {
        throw std::invalid_argument("brownian_step must divide the time step");
      }
      m = static_cast<unsigned>(k);
      sqrt_fine = std::sqrt(policy.brownian_step);
    } else {
      m = 1;
      sqrt_fine = std::sqrt(h);
    }
  }
  double next() { return m == 1 ? gs.increment(sqrt_fine) : gs.increment(sqrt_fine, m); }
};

template <class Sink>
void integrate_euler(const Scenario& s, double T, std::size_t n, double h, double X, std::uint64_t seed,
                     const StepPolicy& policy, Sink& sink) {
  IncrementSource inc(seed, h, policy);
  PathState st = initial_state(s, T);
  sink.node(0, st);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = st.xi;
    const double a = s.drift.eval(T, xi);
    const double dw = inc.next();
    const double next = xi + a * h + dw;
    const double t = static_cast<double>(i + 1) * h;
    guard(next, X, i + 1, t);
    sink.increment(i, dw);
    accumulate(s, T, h, xi, a, dw, next, st);
    finish_node(s, T, next, t, st);
    sink.node(i + 1, st);
  }
}

template <class Sink>
void integrate_transformed(const Scenario& s, const ScaleTable& tab, double T, std::size_t n, double h,
                           std::uint64_t seed, const StepPolicy& policy, Sink& sink) {
  IncrementSource inc(seed, h, policy);
  PathState st = initial_state(s, T);
  double y = tab.f_at(s.x0);
  double fp = tab.fprime_at(s.x0);
  sink.node(0, st);
  const auto f = tab.f();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = st.xi;
    const double dw = inc.next();
    const double y_next = y + fp * dw;
    const double t = static_cast<double>(i + 1) * h;
    if (!std::isfinite(y_next)) guard(y_next, tab.half_width(), i + 1, t);
    if (y_next < f.front() || y_next > f.back()) {
      std::ostringstream os;
      os << "transformed path left the scale table at step " << i + 1 << " (t=" << t << ")";
      throw ExcursionError(os.str(), i + 1);
    }
    const double next = tab.inverse_fast(y_next, &fp);
    guard(next, tab.half_width(), i + 1, t);
    sink.increment(i, dw);
    accumulate(s, T, h, xi, s.drift.eval(T, xi), dw, next, st);
    finish_node(s, T, next, t, st);
    y = y_next;
    sink.node(i + 1, st);
  }
}

struct FullSink {
  PathSample* p;
  void node(std::size_t i, const PathState& st) {
    p->times[i] = st.t;
    p->xi[i] = st.xi;
    p->zeta[i] = st.zeta;
    p->eta[i] = st.eta;
    p->beta1[i] = st.beta1;
    p->beta2[i] = st.beta2;
    p->beta_xi[i] = st.beta_xi;
    p->beta_drift[i] = st.beta_drift;
    p->i_t[i] = st.i_t;
  }
  void increment(std::size_t i, double dw) { p->dW[i] = dw; }
};

PathSample allocate(double T, double h, std::size_t n, std::uint64_t seed) {
  PathSample p;
  p.T = T;
  p.h = h;
  p.seed = seed;
  for (auto* v : {&p.times, &p.xi, &p.beta1, &p.beta2, &p.beta_xi, &p.beta_drift, &p.i_t, &p.zeta, &p.eta}) {
    v->assign(n + 1, 0.0);
  }
  p.dW.assign(n, 0.0);
  return p;
}

// Records requested statistics at probe nodes; running sups for sup_abs.
struct ProbeSink {
  const std::vector<std::size_t>* probe_nodes;
  const std::vector<Statistic>* stats;
  std::vector<double> sups;
  std::vector<double> out;  // [probe * n_stats + stat]
  std::size_t next_probe = 0;
  // probe_nodes is sorted; order[k] maps sorted position back to probe slot.
  const std::vector<std::size_t>* order;

  void reset() {
    std::fill(sups.begin(), sups.end(), 0.0);
    next_probe = 0;
  }
  void node(std::size_t i, const PathState& st) {
    const std::size_t ns = stats->size();
    for (std::size_t k = 0; k < ns; ++k) {
      if ((*stats)[k].red == Reduction::sup_abs) {
        sups[k] = std::max(sups[k], std::abs(pick(st, (*stats)[k].acc)));
      }
    }
    while (next_probe < probe_nodes->size() && (*probe_nodes)[next_probe] == i) {
      const std::size_t slot = (*order)[next_probe];
      for (std::size_t k = 0; k < ns; ++k) {
        const auto& stat = (*stats)[k];
        out[slot * ns + k] = stat.red == Reduction::sup_abs ? sups[k] : pick(st, stat.acc);
      }
      ++next_probe;
    }
  }
  void increment(std::size_t, double) {}
};

}  // namespace

double step_size(const Scenario& s, double T, double horizon, const StepPolicy& policy) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const double L = s.drift.drift_bound(T);
  double bound = policy.stability / (1.0 + L * L);
  if (s.functional.feature_scale) {
    const double lg = s.functional.feature_scale(T);
    if (std::isfinite(lg)) bound = std::min(bound, policy.oscillation * lg * lg);
  }
  if (policy.dyadic) {
    double h = horizon / std::max(1.0, std::ceil(horizon / policy.h_max * (1.0 - 1e-12)));
    while (h > bound * (1.0 + 1e-12)) h *= 0.5;
    return h;
  }
  const double h = std::min(policy.h_max, bound);
  const double n = std::ceil(horizon / h * (1.0 - 1e-12));
  return horizon / std::max(n, 1.0);
}

double default_domain(const Scenario& s, double horizon) {
  return std::max(5.0, 3.0 * std::sqrt(horizon) + std::abs(s.x0));
}

PathSample simulate_path_em(const Scenario& s, double T, double horizon, const StepPolicy& policy,
                            std::uint64_t seed, double domain_half_width) {
  const double h = step_size(s, T, horizon, policy);
  const std::size_t n = step_count(horizon, h);
  const double X = domain_half_width > 0.0 ? domain_half_width : default_domain(s, horizon);
  PathSample p = allocate(T, h, n, seed);
  FullSink sink{&p};
  integrate_euler(s, T, n, h, X, seed, policy, sink);
  return p;
}

PathSample simulate_path_transformed(const Scenario& s, const ScaleTable& tab, double T, double horizon,
                                     const StepPolicy& policy, std::uint64_t seed) {
  if (tab.T() != T) throw std::invalid_argument("scale table was built for a different T");
  const double h = step_size(s, T, horizon, policy);
  const std::size_t n = step_count(horizon, h);
  PathSample p = allocate(T, h, n, seed);
  FullSink sink{&p};
  integrate_transformed(s, tab, T, n, h, seed, policy, sink);
  return p;
}

std::string to_string(Accumulator acc) {
  switch (acc) {
    case Accumulator::xi: return "xi";
    case Accumulator::zeta: return "zeta";
    case Accumulator::eta: return "eta";
    case Accumulator::beta1: return "beta1";
    case Accumulator::beta2: return "beta2";
    case Accumulator::beta_xi: return "beta_xi";
    case Accumulator::i_t: return "i_t";
  }
  return "?";
}

std::string Statistic::name() const {
  return red == Reduction::sup_abs ? "sup_abs(" + to_string(acc) + ")" : to_string(acc);
}

Statistic parse_statistic(std::string_view text) {
  Statistic st;
  std::string_view core = text;
  if (text.starts_with("sup_abs(") && text.ends_with(")")) {
    st.red = Reduction::sup_abs;
    core = text.substr(8, text.size() - 9);
  }
  for (auto acc : {Accumulator::xi, Accumulator::zeta, Accumulator::eta, Accumulator::beta1,
                   Accumulator::beta2, Accumulator::beta_xi, Accumulator::i_t}) {
    if (core == to_string(acc)) {
      st.acc = acc;
      return st;
    }
  }
  throw std::invalid_argument("unknown statistic '" + std::string(text) +
                              "' (expected xi, zeta, eta, beta1, beta2, beta_xi, i_t or sup_abs(...))");
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct FailureLog {
  std::vector<char> ok;
  std::vector<std::pair<std::size_t, std::string>> messages;
  std::mutex mutex;

  explicit FailureLog(std::size_t n) : ok(n, 0) {}

  template <class Fn>
  void run(std::size_t i, Fn&& fn) {
    try {
      fn();
      ok[i] = 1;
    } catch (const ExcursionError& e) {
      record(i, e.what());
    } catch (const NumericalError& e) {
      record(i, e.what());
    } catch (const RangeError& e) {
      record(i, e.what());
    }
  }

  void record(std::size_t i, const char* what) {
    std::lock_guard lock(mutex);
    messages.emplace_back(i, what);
  }

  std::size_t failed() const {
    return static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  }

  std::vector<std::string> first_messages(std::size_t k) {
    std::sort(messages.begin(), messages.end());
    std::vector<std::string> out;
    for (std::size_t j = 0; j < messages.size() && j < k; ++j) {
      out.push_back("path " + std::to_string(messages[j].first) + ": " + messages[j].second);
    }
    return out;
  }

  void enforce(double max_fraction, std::size_t n) {
    const std::size_t bad = failed();
    if (static_cast<double>(bad) > max_fraction * static_cast<double>(n)) {
      std::ostringstream os;
      os << bad << " of " << n << " paths failed";
      const auto msgs = first_messages(1);
      if (!msgs.empty()) os << "; first: " << msgs.front();
      throw EnsembleError(os.str(), bad, n);
    }
  }
};

}  // namespace

EnsembleResult run_ensemble(const Scenario& s, double T, double horizon, std::size_t n_paths,
                            std::uint64_t seed, std::span<const double> probes,
                            std::span<const Statistic> statistics, const EnsembleOptions& opts) {
  if (n_paths < 1) throw std::invalid_argument("run_ensemble: n_paths must be >= 1");
  if (opts.table && opts.table->T() != T) {
    throw std::invalid_argument("run_ensemble: scale table was built for a different T");
  }
  const double h = step_size(s, T, horizon, opts.step);
  const std::size_t n = step_count(horizon, h);
  const double X = opts.domain_half_width > 0.0 ? opts.domain_half_width : default_domain(s, horizon);

  std::vector<std::size_t> probe_nodes(probes.size());
  for (std::size_t k = 0; k < probes.size(); ++k) {
    if (!(probes[k] >= 0.0 && probes[k] <= horizon * (1.0 + 1e-12))) {
      throw std::invalid_argument("probe time outside [0, horizon]");
    }
    probe_nodes[k] = std::min<std::size_t>(static_cast<std::size_t>(std::llround(probes[k] / h)), n);
  }
  std::vector<std::size_t> order(probes.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return probe_nodes[a] < probe_nodes[b]; });
  std::vector<std::size_t> sorted_nodes(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) sorted_nodes[k] = probe_nodes[order[k]];

  const std::vector<Statistic> stats(statistics.begin(), statistics.end());
  const std::size_t ns = stats.size();
  const std::size_t width = probes.size() * ns;
  std::vector<double> raw(n_paths * width, 0.0);
  FailureLog log(n_paths);

  parallel_for(n_paths, opts.threads, [&](std::size_t i) {
    ProbeSink sink{&sorted_nodes, &stats, std::vector<double>(ns, 0.0), std::vector<double>(width, 0.0), 0, &order};
    log.run(i, [&] {
      const std::uint64_t path_seed = mix(seed, i);
      if (opts.table) {
        integrate_transformed(s, *opts.table, T, n, h, path_seed, opts.step, sink);
      } else {
        integrate_euler(s, T, n, h, X, path_seed, opts.step, sink);
      }
      std::copy(sink.out.begin(), sink.out.end(), raw.begin() + static_cast<std::ptrdiff_t>(i * width));
    });
  });
  log.enforce(opts.max_failure_fraction, n_paths);

  EnsembleResult res;
  res.probes.assign(probes.begin(), probes.end());
  res.statistics = stats;
  res.n_requested = n_paths;
  res.n_failed = log.failed();
  res.failures = log.first_messages(5);
  res.values.assign(probes.size(), std::vector<std::vector<double>>(ns));
  for (std::size_t i = 0; i < n_paths; ++i) {
    if (!log.ok[i]) continue;
    res.path_index.push_back(i);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      for (std::size_t k = 0; k < ns; ++k) res.values[p][k].push_back(raw[i * width + p * ns + k]);
    }
  }
  return res;
}

std::vector<double> map_paths(const Scenario& s, double T, double horizon, std::size_t n_paths,
                              std::uint64_t seed, const std::function<double(const PathSample&)>& reduce,
                              const EnsembleOptions& opts) {
  if (n_paths < 1) throw std::invalid_argument("map_paths: n_paths must be >= 1");
  std::vector<double> raw(n_paths, 0.0);
  FailureLog log(n_paths);
  parallel_for(n_paths, opts.threads, [&](std::size_t i) {
    log.run(i, [&] {
      const auto p = opts.table
                         ? simulate_path_transformed(s, *opts.table, T, horizon, opts.step, mix(seed, i))
                         : simulate_path_em(s, T, horizon, opts.step, mix(seed, i), opts.domain_half_width);
      raw[i] = reduce(p);
    });
  });
  log.enforce(opts.max_failure_fraction, n_paths);
  std::vector<double> out;
  out.reserve(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    if (log.ok[i]) out.push_back(raw[i]);
  }
  return out;
}

void write_trace_csv(const PathSample& p, std::ostream& os) {
  os << "t,xi,zeta,eta,beta1,beta2,beta_xi,i_t\n" << std::setprecision(17);
  for (std::size_t i = 0; i < p.times.size(); ++i) {
    os << p.times[i] << ',' << p.xi[i] << ',' << p.zeta[i] << ',' << p.eta[i] << ',' << p.beta1[i] << ','
       << p.beta2[i] << ',' << p.beta_xi[i] << ',' << p.i_t[i] << '\n';
  }
}

}  // namespace difflim
