#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "difflim/drift_models.hpp"
#include "difflim/errors.hpp"
#include "difflim/rng.hpp"
#include "difflim/scale.hpp"
#include "difflim/sde_engine.hpp"
#include "difflim/stats.hpp"

using namespace difflim;

namespace {

const char* kIds[] = {"besq(1)", "zero_drift", "constant_drift(0.7)", "oscillatory_beta1", "periodic_k1(0.5)",
                      "delta_drift(1)"};

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("step policy") {
  const StepPolicy pol;
  for (const char* id : kIds) {
    CAPTURE(id);
    const Scenario s = registry_get(id);
    for (double T : {10.0, 1e3, 1e4}) {
      for (double L : {1.0, 0.37, 2.0}) {
        const double h = step_size(s, T, L, pol);
        const double bound = s.drift.drift_bound(T);
        CHECK(h <= pol.h_max * (1 + 1e-12));
        CHECK(h <= pol.stability / (1 + bound * bound) * (1 + 1e-12));
        const double steps = L / h;
        CHECK(std::abs(steps - std::round(steps)) < 1e-6);
      }
    }
  }
  CHECK(default_domain(make_zero_drift(), 1.0) == 5.0);
  CHECK(default_domain(make_besq(1.0), 9.0) == doctest::Approx(10.0));
}

TEST_CASE("zero drift path is a cumulative sum of its increments") {
  const Scenario s = make_zero_drift();
  const PathSample p = simulate_path_em(s, 100.0, 1.0, {}, 42);
  REQUIRE(p.steps() == 1000);
  double sum = s.x0;
  for (std::size_t i = 0; i < p.steps(); ++i) {
    sum += p.dW[i];
    CHECK(p.xi[i + 1] == sum);
  }
}

TEST_CASE("Euler recurrence and Ito decomposition hold on every scenario") {
  for (const char* id : kIds) {
    CAPTURE(id);
    const Scenario s = registry_get(id);
    const double T = 1e3;
    const PathSample p = simulate_path_em(s, T, 1.0, {}, 7);
    const double scale = 1.0 + max_abs(p.beta_xi) + max_abs(p.beta_drift) + max_abs(p.beta2);
    double worst_rec = 0.0, worst_ito = 0.0, worst_i = 0.0, worst_zeta = 0.0;
    for (std::size_t i = 0; i < p.steps(); ++i) {
      const double expect = p.xi[i] + s.drift.eval(T, p.xi[i]) * p.h + p.dW[i];
      worst_rec = std::max(worst_rec, std::abs(p.xi[i + 1] - expect));
    }
    for (std::size_t i = 0; i <= p.steps(); ++i) {
      worst_ito = std::max(worst_ito, std::abs(p.beta_xi[i] - p.beta_drift[i] - p.beta2[i]));
      worst_i = std::max(worst_i, std::abs(p.i_t[i] - s.functional.f_eval(T, p.xi[i]) - p.beta2[i]));
      worst_zeta = std::max(worst_zeta, std::abs(p.zeta[i] - s.transform.g_value(T, p.xi[i])));
    }
    CHECK(worst_rec == 0.0);
    CHECK(worst_ito <= 1e-12 * scale);
    CHECK(worst_i <= 1e-12 * scale);
    CHECK(worst_zeta == 0.0);
  }
}

TEST_CASE("paths are reproducible from their seed") {
  const Scenario s = make_besq(1.0);
  const PathSample a = simulate_path_em(s, 100.0, 1.0, {}, 99);
  const PathSample b = simulate_path_em(s, 100.0, 1.0, {}, 99);
  const PathSample c = simulate_path_em(s, 100.0, 1.0, {}, 100);
  CHECK(a.xi == b.xi);
  CHECK(a.dW == b.dW);
  CHECK(a.beta2 == b.beta2);
  CHECK(a.xi != c.xi);
}

TEST_CASE("ensemble moments for simple drifts") {
  const double probes[] = {1.0};
  const Statistic xi{Accumulator::xi, Reduction::value};
  SUBCASE("zero drift") {
    const EnsembleResult r = run_ensemble(make_zero_drift(), 10.0, 1.0, 10000, 5, probes, {&xi, 1});
    const EmpiricalLaw law(r.get(0, 0));
    const MeanCI ci = mean_ci(law);
    CHECK(std::abs(ci.mean) <= 3 * ci.stderr_);
    CHECK(law.variance() >= 0.95);
    CHECK(law.variance() <= 1.05);
  }
  SUBCASE("constant drift") {
    const double a = 0.7;
    const EnsembleResult r = run_ensemble(make_constant_drift(a), 10.0, 1.0, 10000, 6, probes, {&xi, 1});
    const MeanCI ci = mean_ci(EmpiricalLaw(r.get(0, 0)));
    CHECK(std::abs(ci.mean - a) <= 3 * ci.stderr_);
  }
}

TEST_CASE("single-path ensemble") {
  const double probes[] = {0.5, 1.0};
  const Statistic st[] = {parse_statistic("zeta"), parse_statistic("sup_abs(xi)")};
  const EnsembleResult r = run_ensemble(make_besq(1.0), 100.0, 1.0, 1, 1, probes, st);
  REQUIRE(r.get(1, 0).size() == 1);
  const PathSample p = simulate_path_em(make_besq(1.0), 100.0, 1.0, {}, mix(1, 0));
  CHECK(r.get(1, 0)[0] == p.zeta.back());
  CHECK(r.get(0, 0)[0] == p.zeta[p.steps() / 2]);
  CHECK(r.get(1, 1)[0] == max_abs(p.xi));
}

TEST_CASE("besq squared process has the limit mean") {
  const double probes[] = {1.0};
  const Statistic z{Accumulator::zeta, Reduction::value};
  const EnsembleResult r = run_ensemble(make_besq(1.0), 1e4, 1.0, 2000, 11, probes, {&z, 1});
  const MeanCI ci = mean_ci(EmpiricalLaw(r.get(0, 0)));
  CHECK(std::abs(ci.mean - 4.0) <= 3 * ci.stderr_ + 0.05);
}

TEST_CASE("results do not depend on the thread count") {
  const double probes[] = {0.3, 1.0};
  const Statistic st[] = {parse_statistic("zeta"), parse_statistic("beta2"), parse_statistic("sup_abs(eta)")};
  EnsembleOptions one;
  one.threads = 1;
  EnsembleOptions three;
  three.threads = 3;
  const auto a = run_ensemble(make_besq(1.0), 100.0, 1.0, 200, 17, probes, st, one);
  const auto b = run_ensemble(make_besq(1.0), 100.0, 1.0, 200, 17, probes, st, three);
  CHECK(a.values == b.values);
  CHECK(a.path_index == b.path_index);
}

TEST_CASE("transformed integrator") {
  SUBCASE("identity scale reproduces the Euler path") {
    const Scenario s = make_zero_drift();
    const ScaleTable tab = build_scale(s.drift, 100.0, 5.0, 1e-10);
    const PathSample a = simulate_path_em(s, 100.0, 1.0, {}, 3);
    const PathSample b = simulate_path_transformed(s, tab, 100.0, 1.0, {}, 3);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.xi.size(); ++i) worst = std::max(worst, std::abs(a.xi[i] - b.xi[i]));
    CHECK(worst <= 1e-9);
  }
  SUBCASE("besq laws agree with the Euler scheme") {
    const Scenario s = make_besq(1.0);
    const double T = 1e3;
    const ScaleTable tab = build_scale(s.drift, T, default_domain(s, 1.0), 1e-10);
    const double probes[] = {1.0};
    const Statistic xi{Accumulator::xi, Reduction::value};
    EnsembleOptions opts;
    opts.table = &tab;
    const auto em = run_ensemble(s, T, 1.0, 10000, 21, probes, {&xi, 1});
    const auto tr = run_ensemble(s, T, 1.0, 10000, 22, probes, {&xi, 1}, opts);
    CHECK(ks_two_sample(EmpiricalLaw(em.get(0, 0)), EmpiricalLaw(tr.get(0, 0))) < 0.03);
  }
  SUBCASE("a table for another T is rejected") {
    const Scenario s = make_besq(1.0);
    const ScaleTable tab = build_scale(s.drift, 10.0, 5.0, 1e-8);
    CHECK_THROWS_AS(simulate_path_transformed(s, tab, 20.0, 1.0, {}, 1), std::invalid_argument);
  }
}

TEST_CASE("step halving leaves smooth statistics within noise") {
  const Scenario s = make_constant_drift(0.7);
  const double probes[] = {1.0};
  const Statistic b1{Accumulator::beta1, Reduction::value};
  EnsembleOptions coarse;
  coarse.step.h_max = 2e-3;
  EnsembleOptions fine;
  fine.step.h_max = 1e-3;
  const Statistic st[] = {Statistic{Accumulator::xi, Reduction::value}, b1};
  const auto a = run_ensemble(s, 10.0, 1.0, 4000, 31, probes, st, coarse);
  const auto b = run_ensemble(s, 10.0, 1.0, 4000, 31, probes, st, fine);
  for (std::size_t k = 0; k < 2; ++k) {
    const MeanCI ca = mean_ci(EmpiricalLaw(a.get(0, k)));
    const MeanCI cb = mean_ci(EmpiricalLaw(b.get(0, k)));
    CHECK(std::abs(ca.mean - cb.mean) <= 3 * std::hypot(ca.stderr_, cb.stderr_) + 1e-12);
  }
}

TEST_CASE("failed paths") {
  const Scenario s = make_zero_drift();
  const double probes[] = {1.0};
  const Statistic xi{Accumulator::xi, Reduction::value};
  SUBCASE("too many failures raise EnsembleError") {
    EnsembleOptions opts;
    opts.domain_half_width = 0.5;
    try {
      run_ensemble(s, 10.0, 1.0, 200, 1, probes, {&xi, 1}, opts);
      FAIL("expected EnsembleError");
    } catch (const EnsembleError& e) {
      CHECK(e.failed() > 100);
      CHECK(e.total() == 200);
    }
  }
  SUBCASE("rare failures are dropped and counted") {
    EnsembleOptions opts;
    opts.domain_half_width = 3.3;
    opts.max_failure_fraction = 0.05;
    const auto r = run_ensemble(s, 10.0, 1.0, 2000, 2, probes, {&xi, 1}, opts);
    CHECK(r.n_failed > 0);
    CHECK(r.get(0, 0).size() == 2000 - r.n_failed);
    CHECK(r.path_index.size() == r.get(0, 0).size());
    CHECK(std::is_sorted(r.path_index.begin(), r.path_index.end()));
    CHECK_FALSE(r.failures.empty());
  }
  SUBCASE("a single path excursion raises ExcursionError with the step") {
    try {
      simulate_path_em(s, 10.0, 1.0, {}, 1, 0.01);
      FAIL("expected ExcursionError");
    } catch (const ExcursionError& e) {
      CHECK(e.step() >= 1);
    }
  }
}

TEST_CASE("oscillatory beta1 concentrates as T grows") {
  const Scenario s = registry_get("oscillatory_beta1");
  const double probes[] = {1.0};
  const Statistic b1{Accumulator::beta1, Reduction::value};
  const auto lo = run_ensemble(s, 1e2, 1.0, 2000, 41, probes, {&b1, 1});
  const auto hi = run_ensemble(s, 1e4, 1.0, 2000, 42, probes, {&b1, 1});
  // beta1 = t + int sin(xi sqrt T) ds; its mean is about t and its spread shrinks.
  CHECK(EmpiricalLaw(hi.get(0, 0)).variance() < EmpiricalLaw(lo.get(0, 0)).variance());
}

TEST_CASE("besq zeta stays tight along the ladder") {
  const Scenario s = make_besq(1.0);
  const double probes[] = {1.0};
  const Statistic sup{Accumulator::zeta, Reduction::sup_abs};
  double first = 0.0;
  for (double T : {1e2, 1e3, 1e4}) {
    const auto r = run_ensemble(s, T, 1.0, 1000, 51, probes, {&sup, 1});
    double m2 = 0.0;
    for (double v : r.get(0, 0)) m2 += v * v;
    m2 /= static_cast<double>(r.get(0, 0).size());
    if (first == 0.0) first = m2;
    CHECK(m2 < 2.0 * first);
  }
}

TEST_CASE("statistic names") {
  CHECK(parse_statistic("sup_abs(zeta)").name() == "sup_abs(zeta)");
  CHECK(parse_statistic("beta_xi").acc == Accumulator::beta_xi);
  CHECK_THROWS_AS(parse_statistic("sup(zeta)"), std::invalid_argument);
}

TEST_CASE("trace CSV") {
  const PathSample p = simulate_path_em(make_zero_drift(), 1.0, 0.01, {}, 1);
  std::ostringstream os;
  write_trace_csv(p, os);
  const std::string out = os.str();
  CHECK(out.rfind("t,xi,zeta,eta,beta1,beta2,beta_xi,i_t\n", 0) == 0);
  CHECK(std::count(out.begin(), out.end(), '\n') == static_cast<long>(p.xi.size() + 1));
}
