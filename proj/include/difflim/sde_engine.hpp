#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "difflim/drift_models.hpp"
#include "difflim/scale.hpp"

namespace difflim {

// h = min(h_max, stability / (1 + L_T^2), oscillation * l_g^2), rounded down
// so that the horizon is an integer number of steps. l_g is the feature scale
// of the functional g_T.
//
// dyadic: h is instead the largest L / (ceil(L / h_max) 2^j) below the bound,
// so steps chosen for different T nest into each other.
// brownian_step > 0: each increment is the sum of h / brownian_step standard
// increments on the finer grid, so paths with the same seed share one Brownian
// motion whatever their step. Must divide h.
struct StepPolicy {
  double h_max = 1e-3;
  double stability = 0.1;
  double oscillation = 0.4;
  bool dyadic = false;
  double brownian_step = 0.0;
};

double step_size(const Scenario& s, double T, double horizon, const StepPolicy& policy);

// max(5, 3 sqrt(L) + |x0|)
double default_domain(const Scenario& s, double horizon);

// One trajectory with every accumulator sampled on the time grid. dW has one
// entry per step; all other arrays have steps + 1 entries.
struct PathSample {
  double T = 0.0;
  double h = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<double> xi;
  std::vector<double> dW;
  std::vector<double> beta1;       // int g(xi) ds
  std::vector<double> beta2;       // int g(xi) dW
  std::vector<double> beta_xi;     // int g(xi) dxi, against realized increments
  std::vector<double> beta_drift;  // int g(xi) a_T(xi) ds
  std::vector<double> i_t;         // F(xi(t)) + beta2(t)
  std::vector<double> zeta;        // G(xi(t))
  std::vector<double> eta;         // int G'(xi) dW

  std::size_t steps() const noexcept { return dW.size(); }
};

// Explicit Euler-Maruyama. domain_half_width <= 0 selects default_domain.
PathSample simulate_path_em(const Scenario& s, double T, double horizon, const StepPolicy& policy,
                            std::uint64_t seed, double domain_half_width = 0.0);

// Euler-Maruyama on eta = f_T(xi), d eta = f'(phi(eta)) dW, mapped back by phi.
PathSample simulate_path_transformed(const Scenario& s, const ScaleTable& tab, double T, double horizon,
                                     const StepPolicy& policy, std::uint64_t seed);

enum class Accumulator { xi, zeta, eta, beta1, beta2, beta_xi, i_t };
enum class Reduction { value, sup_abs };

struct Statistic {
  Accumulator acc = Accumulator::zeta;
  Reduction red = Reduction::value;

  std::string name() const;
  friend bool operator==(const Statistic&, const Statistic&) = default;
};

// "zeta", "beta1", ..., or "sup_abs(<acc>)".
Statistic parse_statistic(std::string_view text);
std::string to_string(Accumulator acc);

struct EnsembleResult {
  std::vector<double> probes;
  std::vector<Statistic> statistics;
  // values[probe][statistic] holds one entry per successful path, ordered by
  // path index.
  std::vector<std::vector<std::vector<double>>> values;
  std::vector<std::size_t> path_index;  // indices of the successful paths
  std::size_t n_requested = 0;
  std::size_t n_failed = 0;
  std::vector<std::string> failures;  // first few error messages

  std::span<const double> get(std::size_t probe, std::size_t stat) const {
    return values.at(probe).at(stat);
  }
};

struct EnsembleOptions {
  StepPolicy step;
  unsigned threads = 0;             // 0: hardware concurrency
  double domain_half_width = 0.0;   // 0: default_domain
  const ScaleTable* table = nullptr;  // non-null selects the transformed integrator
  double max_failure_fraction = 0.01;
};

// Per-path seeds are mix(seed, path_index). Results do not depend on the
// number of worker threads.
EnsembleResult run_ensemble(const Scenario& s, double T, double horizon, std::size_t n_paths,
                            std::uint64_t seed, std::span<const double> probes,
                            std::span<const Statistic> statistics, const EnsembleOptions& opts = {});

// Applies reduce to every simulated path (Euler scheme) and returns the
// results ordered by path index; failed paths are dropped as in run_ensemble.
std::vector<double> map_paths(const Scenario& s, double T, double horizon, std::size_t n_paths,
                              std::uint64_t seed, const std::function<double(const PathSample&)>& reduce,
                              const EnsembleOptions& opts = {});

// CSV rows (t, xi, zeta, eta, beta1, beta2, beta_xi, i_t).
void write_trace_csv(const PathSample& p, std::ostream& os);

// Runs fn(i) for i in [0, n) on a pool of threads.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);
unsigned resolve_threads(unsigned requested);

}  // namespace difflim
