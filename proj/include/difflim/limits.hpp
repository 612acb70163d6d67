#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "difflim/drift_models.hpp"

namespace difflim {

// Euler path of d zeta = a0(zeta) dt + sigma0(zeta) dW_hat, zeta(0) = y0.
struct LimitPath {
  double h = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<double> zeta;
  std::vector<double> dWhat;
};

// Full truncation (sigma0 evaluated at max(zeta, 0)) when the model declares
// a square-root diffusion.
LimitPath simulate_limit(const LimitModel& lm, double horizon, double h, std::uint64_t seed);

// n draws of t * X with X ~ noncentral chi-square(delta, y0 / t), sampled as
// a Poisson(y0 / (2t)) mixture of central chi-squares.
std::vector<double> sample_besq_exact(double delta, double y0, double t, std::size_t n, std::uint64_t seed);

// int_0^t g0(zeta) ds
std::vector<double> limit_beta1(const LimitPath& path, const ScalarFn& g0);

// 2 (int_{y0}^{zeta(t)} g0(x) dx - int_0^t g0(zeta) sigma0(zeta) dW_hat).
// The primitive of g0 is tabulated by adaptive quadrature over the range the
// path visits.
std::vector<double> limit_beta1_tilde(const LimitPath& path, const ScalarFn& g0, const ScalarFn& sigma0,
                                      bool sqrt_diffusion = false, double quad_tol = 1e-10);

// int_0^t g0(zeta) d zeta - int_0^t g0(zeta) a0(zeta) ds
std::vector<double> limit_beta2(const LimitPath& path, const ScalarFn& g0, const ScalarFn& a0);

// F0(zeta(t)) + int_0^t g0(zeta) sigma0(zeta) dW_hat
std::vector<double> limit_i0(const LimitPath& path, const ScalarFn& f0, const ScalarFn& g0,
                             const ScalarFn& sigma0, bool sqrt_diffusion = false);

// F0(zeta(t)) + int_0^t g0(zeta) d zeta
std::vector<double> limit_i_thm7(const LimitPath& path, const ScalarFn& f0, const ScalarFn& g0);

// int_0^t sigma0(zeta) dW_hat (the martingale part of zeta).
std::vector<double> limit_eta(const LimitPath& path, const ScalarFn& sigma0, bool sqrt_diffusion = false);

enum class LimitFunctional { zeta, beta1, beta1_tilde, beta2, i0, i_thm7, eta };

std::string to_string(LimitFunctional f);
LimitFunctional parse_limit_functional(std::string_view text);

// values[probe][functional], one entry per path in path order. Per-path seeds
// are mix(seed, path_index).
struct LimitEnsemble {
  std::vector<double> probes;
  std::vector<LimitFunctional> functionals;
  std::vector<std::vector<std::vector<double>>> values;

  std::span<const double> get(std::size_t probe, std::size_t k) const { return values.at(probe).at(k); }
};

LimitEnsemble run_limit_ensemble(const LimitModel& lm, double horizon, double h, std::size_t n_paths,
                                 std::uint64_t seed, std::span<const double> probes,
                                 std::span<const LimitFunctional> functionals, unsigned threads = 0);

}  // namespace difflim
