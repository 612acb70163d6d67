#include "difflim/limits.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "difflim/errors.hpp"
#include "difflim/quadrature.hpp"
#include "difflim/rng.hpp"
#include "difflim/sde_engine.hpp"

namespace difflim {

namespace {

inline double diffusion(const ScalarFn& sigma0, double z, bool sqrt_diffusion) {
  return sigma0(sqrt_diffusion ? std::max(z, 0.0) : z);
}

// Primitive of g0 relative to y0 on a uniform grid covering [lo, hi].
class TabulatedPrimitive {
 public:
  TabulatedPrimitive(const ScalarFn& g, double y0, double lo, double hi, double tol) : g_(g), tol_(tol) {
    lo = std::min(lo, y0);
    hi = std::max(hi, y0);
    const double span = std::max(hi - lo, 1e-12);
    n_ = static_cast<std::size_t>(std::min(4096.0, std::max(16.0, std::ceil(span / 0.01))));
    step_ = span / static_cast<double>(n_);
    lo_ = lo;
    nodes_.assign(n_ + 1, 0.0);
    for (std::size_t i = 1; i <= n_; ++i) {
      nodes_[i] = nodes_[i - 1] +
                  quad::adaptive_simpson(g_, node(i - 1), node(i), tol_ / static_cast<double>(n_));
    }
    offset_ = eval(y0);
  }

  double operator()(double y) const { return eval(y) - offset_; }

 private:
  double node(std::size_t i) const { return lo_ + static_cast<double>(i) * step_; }

  double eval(double y) const {
    const double r = std::clamp(std::round((y - lo_) / step_), 0.0, static_cast<double>(n_));
    const auto i = static_cast<std::size_t>(r);
    return nodes_[i] + quad::adaptive_simpson(g_, node(i), y, tol_ / static_cast<double>(n_));
  }

  const ScalarFn& g_;
  double tol_;
  std::size_t n_ = 0;
  double step_ = 0.0;
  double lo_ = 0.0;
  double offset_ = 0.0;
  std::vector<double> nodes_;
};

}  // namespace

LimitPath simulate_limit(const LimitModel& lm, double horizon, double h, std::uint64_t seed) {
  if (!(h > 0.0)) throw std::invalid_argument("simulate_limit: h must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate_limit: horizon must be positive");
  const auto n = static_cast<std::size_t>(std::max<long long>(1, std::llround(horizon / h)));
  const double hh = horizon / static_cast<double>(n);
  const double sqrt_h = std::sqrt(hh);
  LimitPath p;
  p.h = hh;
  p.seed = seed;
  p.times.resize(n + 1);
  p.zeta.resize(n + 1);
  p.dWhat.resize(n);
  p.times[0] = 0.0;
  p.zeta[0] = lm.y0;
  GaussianStream gs(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = p.zeta[i];
    const double dw = gs.increment(sqrt_h);
    const double next = z + lm.a0(z) * hh + diffusion(lm.sigma0, z, lm.sqrt_diffusion) * dw;
    if (!std::isfinite(next)) {
      std::ostringstream os;
      os << "limit path non-finite at step " << i + 1;
      throw NumericalError(os.str(), i + 1);
    }
    p.dWhat[i] = dw;
    p.zeta[i + 1] = next;
    p.times[i + 1] = static_cast<double>(i + 1) * hh;
  }
  return p;
}

std::vector<double> sample_besq_exact(double delta, double y0, double t, std::size_t n, std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("sample_besq_exact: delta must be positive");
  if (!(t > 0.0)) throw std::invalid_argument("sample_besq_exact: t must be positive");
  if (y0 < 0.0) throw std::invalid_argument("sample_besq_exact: y0 must be nonnegative");
  Engine eng(seed);
  const double half_lambda = 0.5 * y0 / t;
  std::vector<double> out(n);
  for (auto& v : out) {
    long k = 0;
    if (half_lambda > 0.0) k = std::poisson_distribution<long>(half_lambda)(eng);
    // chi-square(d) = Gamma(d/2, scale 2)
    const double shape = 0.5 * delta + static_cast<double>(k);
    v = t * std::gamma_distribution<double>(shape, 2.0)(eng);
  }
  return out;
}

std::vector<double> limit_beta1(const LimitPath& path, const ScalarFn& g0) {
  std::vector<double> out(path.zeta.size(), 0.0);
  for (std::size_t i = 0; i + 1 < path.zeta.size(); ++i) out[i + 1] = out[i] + g0(path.zeta[i]) * path.h;
  return out;
}

std::vector<double> limit_beta1_tilde(const LimitPath& path, const ScalarFn& g0, const ScalarFn& sigma0,
                                      bool sqrt_diffusion, double quad_tol) {
  const auto [mn, mx] = std::minmax_element(path.zeta.begin(), path.zeta.end());
  const double y0 = path.zeta.front();
  const TabulatedPrimitive prim(g0, y0, *mn, *mx, quad_tol);
  std::vector<double> out(path.zeta.size(), 0.0);
  double stoch = 0.0;
  for (std::size_t i = 0; i + 1 < path.zeta.size(); ++i) {
    const double z = path.zeta[i];
    stoch += g0(z) * diffusion(sigma0, z, sqrt_diffusion) * path.dWhat[i];
    out[i + 1] = 2.0 * (prim(path.zeta[i + 1]) - stoch);
  }
  return out;
}

std::vector<double> limit_beta2(const LimitPath& path, const ScalarFn& g0, const ScalarFn& a0) {
  std::vector<double> out(path.zeta.size(), 0.0);
  for (std::size_t i = 0; i + 1 < path.zeta.size(); ++i) {
    const double z = path.zeta[i];
    const double g = g0(z);
    out[i + 1] = out[i] + g * (path.zeta[i + 1] - z) - g * a0(z) * path.h;
  }
  return out;
}

std::vector<double> limit_i0(const LimitPath& path, const ScalarFn& f0, const ScalarFn& g0,
                             const ScalarFn& sigma0, bool sqrt_diffusion) {
  std::vector<double> out(path.zeta.size(), 0.0);
  double stoch = 0.0;
  out[0] = f0(path.zeta[0]);
  for (std::size_t i = 0; i + 1 < path.zeta.size(); ++i) {
    const double z = path.zeta[i];
    stoch += g0(z) * diffusion(sigma0, z, sqrt_diffusion) * path.dWhat[i];
    out[i + 1] = f0(path.zeta[i + 1]) + stoch;
  }
  return out;
}

std::vector<double> limit_i_thm7(const LimitPath& path, const ScalarFn& f0, const ScalarFn& g0) {
  std::vector<double> out(path.zeta.size(), 0.0);
  double stoch = 0.0;
  out[0] = f0(path.zeta[0]);
  for (std::size_t i = 0; i + 1 < path.zeta.size(); ++i) {
    const double z = path.zeta[i];
    stoch += g0(z) * (path.zeta[i + 1] - z);
    out[i + 1] = f0(path.zeta[i + 1]) + stoch;
  }
  return out;
}

std::vector<double> limit_eta(const LimitPath& path, const ScalarFn& sigma0, bool sqrt_diffusion) {
  std::vector<double> out(path.zeta.size(), 0.0);
  for (std::size_t i = 0; i + 1 < path.zeta.size(); ++i) {
    out[i + 1] = out[i] + diffusion(sigma0, path.zeta[i], sqrt_diffusion) * path.dWhat[i];
  }
  return out;
}

std::string to_string(LimitFunctional f) {
  switch (f) {
    case LimitFunctional::zeta: return "zeta";
    case LimitFunctional::beta1: return "beta1";
    case LimitFunctional::beta1_tilde: return "beta1_tilde";
    case LimitFunctional::beta2: return "beta2";
    case LimitFunctional::i0: return "i0";
    case LimitFunctional::i_thm7: return "i_thm7";
    case LimitFunctional::eta: return "eta";
  }
  return "?";
}

LimitFunctional parse_limit_functional(std::string_view text) {
  for (auto f : {LimitFunctional::zeta, LimitFunctional::beta1, LimitFunctional::beta1_tilde,
                 LimitFunctional::beta2, LimitFunctional::i0, LimitFunctional::i_thm7, LimitFunctional::eta}) {
    if (text == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown limit functional '" + std::string(text) + "'");
}

LimitEnsemble run_limit_ensemble(const LimitModel& lm, double horizon, double h, std::size_t n_paths,
                                 std::uint64_t seed, std::span<const double> probes,
                                 std::span<const LimitFunctional> functionals, unsigned threads) {
  if (n_paths < 1) throw std::invalid_argument("run_limit_ensemble: n_paths must be >= 1");
  const auto n = static_cast<std::size_t>(std::max<long long>(1, std::llround(horizon / h)));
  const double hh = horizon / static_cast<double>(n);
  std::vector<std::size_t> nodes;
  for (double t : probes) {
    if (!(t >= 0.0 && t <= horizon * (1.0 + 1e-12))) throw std::invalid_argument("probe time outside [0, horizon]");
    nodes.push_back(std::min<std::size_t>(static_cast<std::size_t>(std::llround(t / hh)), n));
  }
  const std::size_t nf = functionals.size();
  std::vector<double> raw(n_paths * probes.size() * nf, 0.0);
  parallel_for(n_paths, threads, [&](std::size_t i) {
    const LimitPath path = simulate_limit(lm, horizon, hh, mix(seed, i));
    for (std::size_t k = 0; k < nf; ++k) {
      std::vector<double> series;
      switch (functionals[k]) {
        case LimitFunctional::zeta: series = path.zeta; break;
        case LimitFunctional::beta1: series = limit_beta1(path, lm.g0); break;
        case LimitFunctional::beta1_tilde:
          series = limit_beta1_tilde(path, lm.g0, lm.sigma0, lm.sqrt_diffusion);
          break;
        case LimitFunctional::beta2: series = limit_beta2(path, lm.g0, lm.a0); break;
        case LimitFunctional::i0: series = limit_i0(path, lm.f0, lm.g0, lm.sigma0, lm.sqrt_diffusion); break;
        case LimitFunctional::i_thm7: series = limit_i_thm7(path, lm.f0, lm.g0); break;
        case LimitFunctional::eta: series = limit_eta(path, lm.sigma0, lm.sqrt_diffusion); break;
      }
      for (std::size_t p = 0; p < nodes.size(); ++p) raw[(i * probes.size() + p) * nf + k] = series[nodes[p]];
    }
  });
  LimitEnsemble res;
  res.probes.assign(probes.begin(), probes.end());
  res.functionals.assign(functionals.begin(), functionals.end());
  res.values.assign(probes.size(), std::vector<std::vector<double>>(nf, std::vector<double>(n_paths)));
  for (std::size_t i = 0; i < n_paths; ++i) {
    for (std::size_t p = 0; p < probes.size(); ++p) {
      for (std::size_t k = 0; k < nf; ++k) res.values[p][k][i] = raw[(i * probes.size() + p) * nf + k];
    }
  }
  return res;
}

}  // namespace difflim
