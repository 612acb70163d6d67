#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace difflim {

using Coefficient = std::function<double(double T, double x)>;
using ScalarFn = std::function<double(double)>;

// Drift a_T(x) of d xi = a_T(xi) dt + dW together with its sup bound and
// the smallest spatial wavelength (infinity for smooth, unscaled drifts).
struct DriftFamily {
  std::string id;
  Coefficient eval;
  std::function<double(double T)> drift_bound;
  std::function<double(double T)> feature_scale;
};

// G_T with analytic first and (a.e.) second derivatives; |G| >= c |x|^alpha.
struct TransformFamily {
  std::string id;
  Coefficient g_value;
  Coefficient g_d1;
  Coefficient g_d2;
  double growth_c = 1.0;
  double growth_alpha = 1.0;
  // Points where g_d2 may jump; finite-difference checks avoid them.
  std::function<std::vector<double>(double T)> kink_set;
};

// g_T (integrand of the additive functionals) and F_T (endpoint term of I_T).
struct FunctionalFamily {
  std::string id;
  Coefficient g_eval;
  Coefficient f_eval;
  std::function<double(double T, double N)> local_bound;
  std::function<double(double T)> feature_scale;
};

// Coefficients of the limit equation d zeta = a0 dt + sigma0 dW_hat, zeta(0)=y0,
// plus the limit functional ingredients g0 and F0.
struct LimitModel {
  ScalarFn a0;
  ScalarFn sigma0;
  ScalarFn g0;
  ScalarFn f0;
  double y0 = 0.0;
  // sigma0 is a square-root type coefficient; simulate with full truncation.
  bool sqrt_diffusion = false;
};

enum class Theorem : int { thm2 = 2, thm3 = 3, thm4 = 4, thm5 = 5, thm6 = 6, thm7 = 7 };

std::string to_string(Theorem th);

using LimitSampler =
    std::function<std::vector<double>(double t, std::size_t n, std::uint64_t seed)>;

struct ClosedForms {
  Coefficient fprime;            // exact f_T'
  Coefficient scale;             // exact f_T
  LimitSampler limit_sampler;    // exact draws of zeta(t)
  std::optional<std::pair<double, double>> k1_bounds;  // (delta, C)
  std::optional<double> besq_dimension;
};

struct Scenario {
  std::string id;
  std::string name;
  std::vector<double> params;
  DriftFamily drift;
  TransformFamily transform;
  FunctionalFamily functional;
  LimitModel limit;
  double x0 = 0.0;
  ClosedForms closed_forms;
  std::set<Theorem> theorem_tags;

  bool has_tag(Theorem th) const { return theorem_tags.count(th) != 0; }
};

struct ScenarioInfo {
  std::string pattern;
  std::string parameters;
  std::string tags;
  std::string description;
};

// Parses ids of the form `name` or `name(p1, p2, ...)`.
Scenario registry_get(std::string_view id);
std::vector<ScenarioInfo> registry_list();

Scenario make_besq(double c0);
Scenario make_zero_drift();
Scenario make_constant_drift(double a);
Scenario make_oscillatory_beta1();
Scenario make_periodic_k1(double alpha);
Scenario make_delta_drift(double lambda);
// a_T(x) = sqrt(T) a(x sqrt(T)) with a piecewise linear on (xs, as), zero outside.
Scenario make_delta_drift(std::vector<double> xs, std::vector<double> as);

// Throws std::invalid_argument when a theorem tag lacks a required field.
void validate(const Scenario& s);

// q1 = G' a_T + G''/2 - a0(G),  q2 = (G')^2 - sigma0^2(G).
double residual_q1(const Scenario& s, double T, double x);
double residual_q2(const Scenario& s, double T, double x);
// g_T - g0(G)
double residual_thm3(const Scenario& s, double T, double x);
// (g_T - g0(G) G')^2
double residual_thm5(const Scenario& s, double T, double x);
// F_T - F0(G)
double residual_thm6(const Scenario& s, double T, double x);

}  // namespace difflim
