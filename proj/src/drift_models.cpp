#include "difflim/drift_models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "difflim/errors.hpp"
#include "difflim/limits.hpp"
#include "difflim/rng.hpp"

namespace difflim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double gauss20(F&& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

std::function<double(double)> constant_fn(double c) {
  return [c](double) { return c; };
}

std::function<double(double)> identity_fn() {
  return [](double y) { return y; };
}

LimitSampler normal_sampler(double mean, double drift) {
  return [mean, drift](double t, std::size_t n, std::uint64_t seed) {
    GaussianStream gs(seed);
    std::vector<double> out(n);
    const double sd = std::sqrt(t);
    for (auto& v : out) v = mean + drift * t + sd * gs.standard();
    return out;
  };
}

std::function<std::vector<double>(double)> no_kinks() {
  return [](double) { return std::vector<double>{}; };
}

std::string canonical_id(std::string_view name, const std::vector<double>& params) {
  std::ostringstream os;
  os << name;
  if (!params.empty()) {
    os << '(';
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (i) os << ',';
      os << params[i];
    }
    os << ')';
  }
  return os.str();
}

// Primitive of u -> exp(-2 alpha sin u) on the whole line, from one tabulated
// period plus a local Gauss-Legendre piece.
class PeriodicPrimitive {
 public:
  explicit PeriodicPrimitive(double alpha) : alpha_(alpha) {
    constexpr int kSegments = 64;
    nodes_.resize(kSegments + 1);
    cum_.resize(kSegments + 1, 0.0);
    const double w = kPeriod / kSegments;
    for (int k = 0; k <= kSegments; ++k) nodes_[k] = k * w;
    for (int k = 0; k < kSegments; ++k) {
      cum_[k + 1] = cum_[k] + gauss20([this](double u) { return density(u); }, nodes_[k],
                                      nodes_[k + 1]);
    }
  }

  double density(double u) const { return std::exp(-2.0 * alpha_ * std::sin(u)); }

  double operator()(double s) const {
    const double k = std::floor(s / kPeriod);
    double r = s - k * kPeriod;
    if (r < 0.0) r = 0.0;
    if (r >= kPeriod) r = std::nextafter(kPeriod, 0.0);
    const auto seg = std::min<std::size_t>(
        static_cast<std::size_t>(r / (kPeriod / (nodes_.size() - 1))), nodes_.size() - 2);
    const double local =
        gauss20([this](double u) { return density(u); }, nodes_[seg], r);
    return k * cum_.back() + cum_[seg] + local;
  }

 private:
  static constexpr double kPeriod = 2.0 * std::numbers::pi;
  double alpha_;
  std::vector<double> nodes_;
  std::vector<double> cum_;
};

// Piecewise linear compactly supported profile a(s) with exact primitive A(s)
// (A(0) = 0) and tabulated E(s) = int_0^s exp(-2 A(u)) du.
class DeltaProfile {
 public:
  DeltaProfile(std::vector<double> xs, std::vector<double> as) : xs_(std::move(xs)), as_(std::move(as)) {
    if (xs_.size() < 2 || xs_.size() != as_.size()) {
      throw std::invalid_argument("delta profile needs >= 2 nodes and matching values");
    }
    for (std::size_t i = 1; i < xs_.size(); ++i) {
      if (!(xs_[i] > xs_[i - 1])) throw std::invalid_argument("delta profile nodes must increase");
    }
    cum_a_.assign(xs_.size(), 0.0);
    for (std::size_t i = 1; i < xs_.size(); ++i) {
      cum_a_[i] = cum_a_[i - 1] + 0.5 * (xs_[i] - xs_[i - 1]) * (as_[i] + as_[i - 1]);
    }
    offset_ = raw_primitive(0.0);

    // Breakpoints for E: profile nodes plus the origin.
    breaks_ = xs_;
    breaks_.push_back(0.0);
    std::sort(breaks_.begin(), breaks_.end());
    breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
    zero_ = static_cast<std::size_t>(std::find(breaks_.begin(), breaks_.end(), 0.0) - breaks_.begin());
    e_cum_.assign(breaks_.size(), 0.0);
    auto dens = [this](double u) { return std::exp(-2.0 * primitive(u)); };
    for (std::size_t i = zero_; i + 1 < breaks_.size(); ++i) {
      e_cum_[i + 1] = e_cum_[i] + gauss20(dens, breaks_[i], breaks_[i + 1]);
    }
    for (std::size_t i = zero_; i > 0; --i) {
      e_cum_[i - 1] = e_cum_[i] - gauss20(dens, breaks_[i - 1], breaks_[i]);
    }

    // Extremes of A: nodes and sign changes of a inside segments.
    std::vector<double> cand = xs_;
    for (std::size_t i = 1; i < xs_.size(); ++i) {
      if (as_[i - 1] * as_[i] < 0.0) {
        cand.push_back(xs_[i - 1] + (xs_[i] - xs_[i - 1]) * as_[i - 1] / (as_[i - 1] - as_[i]));
      }
    }
    cand.push_back(0.0);
    a_min_ = kInf;
    a_max_ = -kInf;
    for (double c : cand) {
      a_min_ = std::min(a_min_, primitive(c));
      a_max_ = std::max(a_max_, primitive(c));
    }
    a_abs_max_ = 0.0;
    for (double v : as_) a_abs_max_ = std::max(a_abs_max_, std::abs(v));
  }

  double value(double s) const {
    if (s <= xs_.front() || s >= xs_.back()) return 0.0;
    const auto k = segment(s);
    const double w = (s - xs_[k]) / (xs_[k + 1] - xs_[k]);
    return as_[k] + w * (as_[k + 1] - as_[k]);
  }

  double primitive(double s) const { return raw_primitive(s) - offset_; }

  double exp_primitive(double s) const {
    auto dens = [this](double u) { return std::exp(-2.0 * primitive(u)); };
    std::size_t j;
    if (s <= breaks_.front()) {
      j = 0;
    } else if (s >= breaks_.back()) {
      j = breaks_.size() - 1;
    } else {
      j = static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), s) - breaks_.begin()) - 1;
    }
    return e_cum_[j] + gauss20(dens, breaks_[j], s);
  }

  double integral() const { return cum_a_.back(); }
  double primitive_min() const { return a_min_; }
  double primitive_max() const { return a_max_; }
  double primitive_right() const { return primitive(xs_.back()); }
  double primitive_left() const { return primitive(xs_.front()); }
  double abs_max() const { return a_abs_max_; }
  const std::vector<double>& nodes() const { return xs_; }

 private:
  std::size_t segment(double s) const {
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), s);
    return std::min<std::size_t>(static_cast<std::size_t>(it - xs_.begin()) - 1, xs_.size() - 2);
  }

  double raw_primitive(double s) const {
    if (s <= xs_.front()) return 0.0;
    if (s >= xs_.back()) return cum_a_.back();
    const auto k = segment(s);
    return cum_a_[k] + 0.5 * (s - xs_[k]) * (as_[k] + value(s));
  }

  std::vector<double> xs_, as_, cum_a_, breaks_, e_cum_;
  std::size_t zero_ = 0;
  double offset_ = 0.0;
  double a_min_ = 0.0, a_max_ = 0.0, a_abs_max_ = 0.0;
};

FunctionalFamily scale_derivative_functional(const std::string& id, Coefficient fprime, double bound,
                                             std::function<double(double)> feature) {
  FunctionalFamily fn;
  fn.id = id;
  fn.g_eval = std::move(fprime);
  fn.f_eval = [](double, double) { return 0.0; };
  fn.local_bound = [bound](double, double) { return bound; };
  fn.feature_scale = std::move(feature);
  return fn;
}

}  // namespace

std::string to_string(Theorem th) { return "Thm" + std::to_string(static_cast<int>(th)); }

Scenario make_besq(double c0) {
  if (!(c0 > -0.5)) {
    throw NotFoundError("besq(c0) is only defined for c0 > -1/2, got " + std::to_string(c0));
  }
  Scenario s;
  s.name = "besq";
  s.params = {c0};
  s.id = canonical_id(s.name, s.params);
  s.x0 = 1.0;

  s.drift.id = s.id;
  s.drift.eval = [c0](double T, double x) { return c0 * T * x / (1.0 + x * x * T); };
  s.drift.drift_bound = [c0](double T) { return std::abs(c0) * std::sqrt(T) / 2.0; };
  s.drift.feature_scale = [](double T) { return 1.0 / std::sqrt(T); };

  s.transform.id = "square";
  s.transform.g_value = [](double, double x) { return x * x; };
  s.transform.g_d1 = [](double, double x) { return 2.0 * x; };
  s.transform.g_d2 = [](double, double) { return 2.0; };
  s.transform.growth_c = 1.0;
  s.transform.growth_alpha = 2.0;
  s.transform.kink_set = no_kinks();

  s.functional.id = "g=2x,F=x^2";
  s.functional.g_eval = [](double, double x) { return 2.0 * x; };
  s.functional.f_eval = [](double, double x) { return x * x; };
  s.functional.local_bound = [](double, double N) { return 2.0 * N; };
  s.functional.feature_scale = [](double) { return kInf; };

  const double delta = 1.0 + 2.0 * c0;
  s.limit.a0 = constant_fn(delta);
  s.limit.sigma0 = [](double y) { return 2.0 * std::sqrt(std::max(y, 0.0)); };
  s.limit.g0 = constant_fn(1.0);
  s.limit.f0 = identity_fn();
  s.limit.y0 = s.x0 * s.x0;
  s.limit.sqrt_diffusion = true;

  s.closed_forms.fprime = [c0](double T, double x) { return std::pow(1.0 + x * x * T, -c0); };
  if (c0 == 0.0) {
    s.closed_forms.scale = [](double, double x) { return x; };
  } else if (c0 == 1.0) {
    s.closed_forms.scale = [](double T, double x) {
      const double r = std::sqrt(T);
      return std::atan(x * r) / r;
    };
  }
  const double y0 = s.limit.y0;
  s.closed_forms.limit_sampler = [delta, y0](double t, std::size_t n, std::uint64_t seed) {
    return sample_besq_exact(delta, y0, t, n, seed);
  };
  s.closed_forms.besq_dimension = delta;
  s.theorem_tags = {Theorem::thm2, Theorem::thm5, Theorem::thm6};
  return s;
}

Scenario make_zero_drift() {
  Scenario s;
  s.name = "zero_drift";
  s.id = s.name;
  s.x0 = 0.0;

  s.drift.id = s.id;
  s.drift.eval = [](double, double) { return 0.0; };
  s.drift.drift_bound = [](double) { return 0.0; };
  s.drift.feature_scale = [](double) { return kInf; };

  s.transform.id = "identity";
  s.transform.g_value = [](double, double x) { return x; };
  s.transform.g_d1 = [](double, double) { return 1.0; };
  s.transform.g_d2 = [](double, double) { return 0.0; };
  s.transform.kink_set = no_kinks();

  s.functional.id = "g=1,F=-x";
  s.functional.g_eval = [](double, double) { return 1.0; };
  s.functional.f_eval = [](double, double x) { return -x; };
  s.functional.local_bound = [](double, double) { return 1.0; };
  s.functional.feature_scale = [](double) { return kInf; };

  s.limit.a0 = constant_fn(0.0);
  s.limit.sigma0 = constant_fn(1.0);
  s.limit.g0 = constant_fn(0.0);
  s.limit.f0 = constant_fn(0.0);
  s.limit.y0 = s.x0;

  s.closed_forms.fprime = [](double, double) { return 1.0; };
  s.closed_forms.scale = [](double, double x) { return x; };
  s.closed_forms.limit_sampler = normal_sampler(s.x0, 0.0);
  s.closed_forms.k1_bounds = std::make_pair(1.0, 1.0);
  s.theorem_tags = {Theorem::thm2, Theorem::thm7};
  return s;
}

Scenario make_constant_drift(double a) {
  Scenario s;
  s.name = "constant_drift";
  s.params = {a};
  s.id = canonical_id(s.name, s.params);
  s.x0 = 0.0;

  s.drift.id = s.id;
  s.drift.eval = [a](double, double) { return a; };
  s.drift.drift_bound = [a](double) { return std::abs(a); };
  s.drift.feature_scale = [](double) { return kInf; };

  s.transform.id = "identity";
  s.transform.g_value = [](double, double x) { return x; };
  s.transform.g_d1 = [](double, double) { return 1.0; };
  s.transform.g_d2 = [](double, double) { return 0.0; };
  s.transform.kink_set = no_kinks();

  s.functional.id = "g=1,F=x";
  s.functional.g_eval = [](double, double) { return 1.0; };
  s.functional.f_eval = [](double, double x) { return x; };
  s.functional.local_bound = [](double, double) { return 1.0; };
  s.functional.feature_scale = [](double) { return kInf; };

  s.limit.a0 = constant_fn(a);
  s.limit.sigma0 = constant_fn(1.0);
  s.limit.g0 = constant_fn(1.0);
  s.limit.f0 = identity_fn();
  s.limit.y0 = s.x0;

  s.closed_forms.fprime = [a](double, double x) { return std::exp(-2.0 * a * x); };
  s.closed_forms.scale = [a](double, double x) {
    return a == 0.0 ? x : -std::expm1(-2.0 * a * x) / (2.0 * a);
  };
  s.closed_forms.limit_sampler = normal_sampler(s.x0, a);
  if (a == 0.0) s.closed_forms.k1_bounds = std::make_pair(1.0, 1.0);
  s.theorem_tags = {Theorem::thm2, Theorem::thm3, Theorem::thm5, Theorem::thm6};
  return s;
}

Scenario make_oscillatory_beta1() {
  Scenario s = make_zero_drift();
  s.name = "oscillatory_beta1";
  s.id = s.name;
  s.drift.id = s.id;

  s.functional.id = "g=1+sin(x*sqrt(T)),F=0";
  s.functional.g_eval = [](double T, double x) { return 1.0 + std::sin(x * std::sqrt(T)); };
  s.functional.f_eval = [](double, double) { return 0.0; };
  s.functional.local_bound = [](double, double) { return 2.0; };
  s.functional.feature_scale = [](double T) { return 1.0 / std::sqrt(T); };

  s.limit.g0 = identity_fn();
  s.limit.f0 = constant_fn(0.0);
  s.closed_forms.k1_bounds = std::make_pair(1.0, 1.0);
  s.theorem_tags = {Theorem::thm2, Theorem::thm4};
  return s;
}

Scenario make_periodic_k1(double alpha) {
  Scenario s;
  s.name = "periodic_k1";
  s.params = {alpha};
  s.id = canonical_id(s.name, s.params);
  s.x0 = 0.0;

  s.drift.id = s.id;
  s.drift.eval = [alpha](double T, double x) {
    const double r = std::sqrt(T);
    return alpha * r * std::cos(x * r);
  };
  s.drift.drift_bound = [alpha](double T) { return std::abs(alpha) * std::sqrt(T); };
  s.drift.feature_scale = [](double T) { return 1.0 / std::sqrt(T); };

  auto prim = std::make_shared<const PeriodicPrimitive>(alpha);
  Coefficient fprime = [alpha](double T, double x) {
    return std::exp(-2.0 * alpha * std::sin(x * std::sqrt(T)));
  };
  Coefficient scale = [prim](double T, double x) {
    const double r = std::sqrt(T);
    return (*prim)(x * r) / r;
  };

  s.transform.id = "scale_function";
  s.transform.g_value = scale;
  s.transform.g_d1 = fprime;
  s.transform.g_d2 = [alpha](double T, double x) {
    const double r = std::sqrt(T);
    return -2.0 * alpha * r * std::cos(x * r) * std::exp(-2.0 * alpha * std::sin(x * r));
  };
  s.transform.growth_c = std::exp(-2.0 * std::abs(alpha));
  s.transform.growth_alpha = 1.0;
  s.transform.kink_set = no_kinks();

  s.functional = scale_derivative_functional("g=f',F=0", fprime, std::exp(2.0 * std::abs(alpha)),
                                             [](double T) { return 1.0 / std::sqrt(T); });

  s.limit.a0 = constant_fn(0.0);
  s.limit.sigma0 = constant_fn(1.0);
  s.limit.g0 = constant_fn(0.0);
  s.limit.f0 = identity_fn();
  s.limit.y0 = 0.0;

  s.closed_forms.fprime = fprime;
  s.closed_forms.scale = scale;
  s.closed_forms.limit_sampler = normal_sampler(0.0, 0.0);
  s.closed_forms.k1_bounds =
      std::make_pair(std::exp(-2.0 * std::abs(alpha)), std::exp(2.0 * std::abs(alpha)));
  s.theorem_tags = {Theorem::thm2, Theorem::thm7};
  return s;
}

Scenario make_delta_drift(std::vector<double> xs, std::vector<double> as) {
  auto prof = std::make_shared<const DeltaProfile>(std::move(xs), std::move(as));
  Scenario s;
  s.name = "delta_drift";
  s.params = {prof->integral()};
  s.id = canonical_id(s.name, s.params);
  s.x0 = 0.0;

  s.drift.id = s.id;
  s.drift.eval = [prof](double T, double x) {
    const double r = std::sqrt(T);
    return r * prof->value(x * r);
  };
  s.drift.drift_bound = [prof](double T) { return std::sqrt(T) * prof->abs_max(); };
  s.drift.feature_scale = [prof](double T) {
    const auto& n = prof->nodes();
    double w = kInf;
    for (std::size_t i = 1; i < n.size(); ++i) w = std::min(w, n[i] - n[i - 1]);
    return w / std::sqrt(T);
  };

  Coefficient fprime = [prof](double T, double x) {
    return std::exp(-2.0 * prof->primitive(x * std::sqrt(T)));
  };
  Coefficient scale = [prof](double T, double x) {
    const double r = std::sqrt(T);
    return prof->exp_primitive(x * r) / r;
  };

  s.transform.id = "scale_function";
  s.transform.g_value = scale;
  s.transform.g_d1 = fprime;
  s.transform.g_d2 = [prof](double T, double x) {
    const double r = std::sqrt(T);
    return -2.0 * r * prof->value(x * r) * std::exp(-2.0 * prof->primitive(x * r));
  };
  const double lo = std::exp(-2.0 * prof->primitive_max());
  const double hi = std::exp(-2.0 * prof->primitive_min());
  s.transform.growth_c = lo;
  s.transform.growth_alpha = 1.0;
  s.transform.kink_set = [prof](double T) {
    std::vector<double> k;
    for (double n : prof->nodes()) k.push_back(n / std::sqrt(T));
    return k;
  };

  s.functional = scale_derivative_functional("g=f',F=0", fprime, hi, s.drift.feature_scale);

  // Away from the origin f_T' is exp(-2 A(+inf)) on the right and
  // exp(-2 A(-inf)) on the left, so zeta is an oscillating Brownian motion.
  const double c_right = std::exp(-2.0 * prof->primitive_right());
  const double c_left = std::exp(-2.0 * prof->primitive_left());
  s.limit.a0 = constant_fn(0.0);
  s.limit.sigma0 = [c_right, c_left](double y) { return y >= 0.0 ? c_right : c_left; };
  s.limit.g0 = constant_fn(0.0);
  s.limit.f0 = identity_fn();
  s.limit.y0 = 0.0;

  s.closed_forms.fprime = fprime;
  s.closed_forms.scale = scale;
  s.closed_forms.limit_sampler = [c_right, c_left](double t, std::size_t n, std::uint64_t seed) {
    GaussianStream gs(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double p_right = c_left / (c_right + c_left);
    const double sd = std::sqrt(t);
    std::vector<double> out(n);
    for (auto& v : out) {
      const double mag = std::abs(gs.standard()) * sd;
      v = u(gs.engine()) < p_right ? c_right * mag : -c_left * mag;
    }
    return out;
  };
  s.closed_forms.k1_bounds = std::make_pair(lo, hi);
  s.theorem_tags = {Theorem::thm2, Theorem::thm7};
  return s;
}

Scenario make_delta_drift(double lambda) {
  return make_delta_drift({-1.0, 0.0, 1.0}, {0.0, lambda, 0.0});
}

std::vector<ScenarioInfo> registry_list() {
  return {
      {"besq(c0)", "c0 > -1/2 (default 1)", "Thm2,Thm5,Thm6",
       "a_T=c0*T*x/(1+x^2*T), G=x^2, limit BESQ(1+2c0) from x0^2"},
      {"constant_drift(a)", "a real (default 1)", "Thm2,Thm3,Thm5,Thm6",
       "a_T=a, G=x, limit Brownian motion with drift a"},
      {"delta_drift(lambda)", "lambda real (default 1)", "Thm2,Thm7",
       "a_T=sqrt(T)*a(x*sqrt(T)), tent profile with integral lambda, limit oscillating BM"},
      {"oscillatory_beta1", "-", "Thm2,Thm4",
       "a_T=0, g_T=1+sin(x*sqrt(T)), beta1 limit is the deterministic t"},
      {"periodic_k1(alpha)", "alpha real (default 0.5)", "Thm2,Thm7",
       "a_T=alpha*sqrt(T)*cos(x*sqrt(T)), class K1, homogenized limit Brownian motion"},
      {"zero_drift", "-", "Thm2,Thm7", "a_T=0, G=x, xi_T=x0+W"},
  };
}

Scenario registry_get(std::string_view id) {
  std::string text(id);
  text.erase(std::remove_if(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }),
             text.end());
  std::string name = text;
  std::vector<double> params;
  const auto open = text.find('(');
  if (open != std::string::npos) {
    if (text.back() != ')') throw NotFoundError("malformed scenario id '" + text + "'");
    name = text.substr(0, open);
    std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        params.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw NotFoundError("bad parameter '" + tok + "' in scenario id '" + text + "'");
      }
    }
  }
  auto arity = [&](std::size_t max) {
    if (params.size() > max) {
      throw NotFoundError("scenario '" + name + "' takes at most " + std::to_string(max) +
                          " parameter(s)");
    }
  };
  auto param_or = [&](double dflt) { return params.empty() ? dflt : params[0]; };

  if (name == "besq") { arity(1); return make_besq(param_or(1.0)); }
  if (name == "zero_drift") { arity(0); return make_zero_drift(); }
  if (name == "constant_drift") { arity(1); return make_constant_drift(param_or(1.0)); }
  if (name == "oscillatory_beta1") { arity(0); return make_oscillatory_beta1(); }
  if (name == "periodic_k1") { arity(1); return make_periodic_k1(param_or(0.5)); }
  if (name == "delta_drift") { arity(1); return make_delta_drift(param_or(1.0)); }

  std::string known;
  for (const auto& info : registry_list()) {
    if (!known.empty()) known += ", ";
    known += info.pattern;
  }
  throw NotFoundError("unknown scenario '" + name + "'; known: " + known);
}

void validate(const Scenario& s) {
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument("scenario " + s.id + ": missing " + what);
  };
  need(s.drift.eval && s.drift.drift_bound && s.drift.feature_scale, "drift family");
  need(s.transform.g_value && s.transform.g_d1 && s.transform.g_d2, "transform family");
  need(s.functional.g_eval && s.functional.f_eval && s.functional.local_bound, "functional family");
  if (s.has_tag(Theorem::thm2)) need(s.limit.a0 && s.limit.sigma0, "limit drift/diffusion (Thm2)");
  for (auto th : {Theorem::thm3, Theorem::thm4, Theorem::thm5}) {
    if (s.has_tag(th)) need(static_cast<bool>(s.limit.g0), "limit g0");
  }
  if (s.has_tag(Theorem::thm6)) need(s.limit.g0 && s.limit.f0, "limit g0/F0 (Thm6)");
  if (s.has_tag(Theorem::thm7)) {
    need(s.limit.g0 && s.limit.f0 && s.limit.sigma0, "limit g0/F0/sigma0 (Thm7)");
    need(s.closed_forms.k1_bounds.has_value(), "K1 bounds (Thm7)");
  }
}

double residual_q1(const Scenario& s, double T, double x) {
  const auto& G = s.transform;
  return G.g_d1(T, x) * s.drift.eval(T, x) + 0.5 * G.g_d2(T, x) - s.limit.a0(G.g_value(T, x));
}

double residual_q2(const Scenario& s, double T, double x) {
  const double d1 = s.transform.g_d1(T, x);
  const double sig = s.limit.sigma0(s.transform.g_value(T, x));
  return d1 * d1 - sig * sig;
}

double residual_thm3(const Scenario& s, double T, double x) {
  return s.functional.g_eval(T, x) - s.limit.g0(s.transform.g_value(T, x));
}

double residual_thm5(const Scenario& s, double T, double x) {
  const double d = s.functional.g_eval(T, x) -
                   s.limit.g0(s.transform.g_value(T, x)) * s.transform.g_d1(T, x);
  return d * d;
}

double residual_thm6(const Scenario& s, double T, double x) {
  return s.functional.f_eval(T, x) - s.limit.f0(s.transform.g_value(T, x));
}

}  // namespace difflim
