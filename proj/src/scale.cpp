#include "difflim/scale.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

#include "difflim/errors.hpp"
#include "difflim/quadrature.hpp"

namespace difflim {

namespace {

constexpr double kMaxExponent = 700.0;

// Per-cell share of a tolerance budget spread over one half of the table.
double cell_tolerance(const ScaleTable& tab, double total) {
  return 0.25 * total * tab.step() / tab.half_width();
}

// Largest |value| over nodes with |x| <= N, refined by Brent's method inside
// the two cells adjacent to the best node.
template <class NodeFn, class PointFn>
double refined_sup(const ScaleTable& tab, double N, NodeFn&& node_value, PointFn&& point_value) {
  if (N > tab.half_width() * (1.0 + 1e-12)) {
    throw RangeError("sup radius N exceeds the table half-width");
  }
  const auto grid = tab.grid();
  std::size_t best = tab.zero_index();
  double best_val = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i]) > N) continue;
    const double v = std::abs(node_value(i));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  const double lo = std::max(best > 0 ? grid[best - 1] : grid[best], -N);
  const double hi = std::min(best + 1 < grid.size() ? grid[best + 1] : grid[best], N);
  if (hi > lo) {
    auto neg = [&](double x) { return -std::abs(point_value(x)); };
    const auto r = boost::math::tools::brent_find_minima(neg, lo, hi, 40);
    best_val = std::max(best_val, -r.second);
  }
  return best_val;
}

}  // namespace

std::size_t ScaleTable::nearest(double x) const {
  if (!(x >= -d_->X * (1.0 + 1e-12) && x <= d_->X * (1.0 + 1e-12))) {
    std::ostringstream os;
    os << "x=" << x << " outside scale table [-" << d_->X << ", " << d_->X << "]";
    throw RangeError(os.str());
  }
  const double r = std::round((x + d_->X) / d_->step);
  return std::min(static_cast<std::size_t>(std::max(r, 0.0)), d_->grid.size() - 1);
}

std::size_t ScaleTable::cell(double x) const {
  const std::size_t j = nearest(x);
  if (j + 1 == d_->grid.size()) return j - 1;
  if (x < d_->grid[j] && j > 0) return j - 1;
  return j;
}

double ScaleTable::fprime_at(double x) const {
  const std::size_t j = nearest(x);
  if (x == d_->grid[j]) return d_->fprime[j];
  const double tol = 0.01 * cell_tolerance(*this, d_->quad_tol);
  const double T = d_->T;
  const auto& a = d_->drift_fn;
  const double I = quad::adaptive_simpson([&](double v) { return a(T, v); }, d_->grid[j], x, tol);
  return d_->fprime[j] * std::exp(-2.0 * I);
}

double ScaleTable::f_at(double x) const {
  const std::size_t j = nearest(x);
  if (x == d_->grid[j]) return d_->f[j];
  const double tol = cell_tolerance(*this, d_->quad_tol);
  const double T = d_->T;
  const double xj = d_->grid[j];
  const double fpj = d_->fprime[j];
  const auto& a = d_->drift_fn;
  auto local_fprime = [&](double u) {
    const double I = quad::adaptive_simpson([&](double v) { return a(T, v); }, xj, u, 0.01 * tol);
    return fpj * std::exp(-2.0 * I);
  };
  return d_->f[j] + quad::adaptive_simpson(local_fprime, xj, x, tol);
}

double ScaleTable::inverse_fast(double y, double* fprime_out) const {
  const auto& f = d_->f;
  if (!(y >= f.front() && y <= f.back())) {
    std::ostringstream os;
    os << "y=" << y << " outside scale range [" << f.front() << ", " << f.back() << "]";
    throw RangeError(os.str());
  }
  auto it = std::upper_bound(f.begin(), f.end(), y);
  std::size_t i = it == f.begin() ? 0 : static_cast<std::size_t>(it - f.begin()) - 1;
  if (i + 1 >= f.size()) i = f.size() - 2;
  const double e0 = f[i], e1 = f[i + 1];
  const double w = e1 - e0;
  const double s = (y - e0) / w;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  const double p0 = d_->fprime[i], p1 = d_->fprime[i + 1];
  // x(eta): dx/deta = 1/f';  f'(eta): df'/deta = f''/f' = -2 a.
  const double x = h00 * d_->grid[i] + h10 * w / p0 + h01 * d_->grid[i + 1] + h11 * w / p1;
  if (fprime_out) {
    *fprime_out =
        h00 * p0 + h10 * w * (-2.0 * d_->drift[i]) + h01 * p1 + h11 * w * (-2.0 * d_->drift[i + 1]);
  }
  return x;
}

void ScaleTable::write_csv(std::ostream& os) const {
  os << "x,f,fprime\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < size(); ++i) {
    os << d_->grid[i] << ',' << d_->f[i] << ',' << d_->fprime[i] << '\n';
  }
}

ScaleTable build_scale(const DriftFamily& drift, double T, double X, double quad_tol, double user_step) {
  if (!(X > 0.0)) throw std::invalid_argument("build_scale: X must be positive");
  if (!(quad_tol > 0.0)) throw std::invalid_argument("build_scale: quad_tol must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("build_scale: T must be positive");
  if (!(user_step > 0.0)) throw std::invalid_argument("build_scale: step must be positive");

  auto d = std::make_shared<ScaleTable::Data>();
  d->T = T;
  d->X = X;
  d->quad_tol = quad_tol;
  d->drift_fn = drift.eval;

  double cap = user_step;
  const double feature = drift.feature_scale ? drift.feature_scale(T) : std::numeric_limits<double>::infinity();
  if (std::isfinite(feature)) cap = std::min(cap, feature / 10.0);
  const auto n_half = static_cast<std::size_t>(std::ceil(X / cap));
  d->step = X / static_cast<double>(n_half);
  d->zero = n_half;
  const std::size_t n = 2 * n_half + 1;
  d->grid.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d->grid[i] = (static_cast<double>(i) - static_cast<double>(n_half)) * d->step;
  }
  d->grid[n_half] = 0.0;
  d->grid.front() = -X;
  d->grid.back() = X;

  const double tol = 0.25 * quad_tol * d->step / X;
  auto a = [&](double v) { return drift.eval(T, v); };

  std::vector<double> I(n, 0.0);
  auto check = [&](std::size_t i) {
    if (std::abs(2.0 * I[i]) > kMaxExponent || !std::isfinite(I[i])) {
      std::ostringstream os;
      os << "scale table domain too wide: |2*int_0^x a_T| exceeds " << kMaxExponent
         << " at x=" << d->grid[i] << " (T=" << T << ")";
      throw DomainTooWideError(os.str(), d->grid[i]);
    }
  };
  for (std::size_t i = n_half + 1; i < n; ++i) {
    I[i] = I[i - 1] + quad::adaptive_simpson(a, d->grid[i - 1], d->grid[i], tol);
    check(i);
  }
  for (std::size_t i = n_half; i-- > 0;) {
    I[i] = I[i + 1] - quad::adaptive_simpson(a, d->grid[i], d->grid[i + 1], tol);
    check(i);
  }

  d->fprime.resize(n);
  d->drift.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d->fprime[i] = std::exp(-2.0 * I[i]);
    d->drift[i] = a(d->grid[i]);
  }

  auto fprime_from = [&](std::size_t j) {
    return [&, j](double u) {
      const double local = quad::adaptive_simpson(a, d->grid[j], u, 0.01 * tol);
      return d->fprime[j] * std::exp(-2.0 * local);
    };
  };
  d->f.assign(n, 0.0);
  for (std::size_t i = n_half + 1; i < n; ++i) {
    d->f[i] = d->f[i - 1] + quad::adaptive_simpson(fprime_from(i - 1), d->grid[i - 1], d->grid[i], tol);
  }
  for (std::size_t i = n_half; i-- > 0;) {
    d->f[i] = d->f[i + 1] - quad::adaptive_simpson(fprime_from(i + 1), d->grid[i], d->grid[i + 1], tol);
  }
  return ScaleTable(std::move(d));
}

double scale_inverse(const ScaleTable& tab, double y) {
  const auto f = tab.f();
  const double slack = tab.quad_tol();
  if (!(y >= f.front() - slack && y <= f.back() + slack)) {
    std::ostringstream os;
    os << "scale_inverse: y=" << y << " outside [" << f.front() << ", " << f.back() << "]";
    throw RangeError(os.str());
  }
  const double yc = std::clamp(y, f.front(), f.back());
  double x = tab.inverse_fast(yc, nullptr);
  auto it = std::upper_bound(f.begin(), f.end(), yc);
  std::size_t i = it == f.begin() ? 0 : static_cast<std::size_t>(it - f.begin()) - 1;
  if (i + 1 >= f.size()) i = f.size() - 2;
  double lo = tab.x(i), hi = tab.x(i + 1);
  x = std::clamp(x, lo, hi);
  // Safeguarded Newton on f(x) = y; f is increasing.
  for (int it_n = 0; it_n < 60; ++it_n) {
    const double r = tab.f_at(x) - y;
    const double p = tab.fprime_at(x);
    if (std::abs(r) <= 0.01 * tab.quad_tol() * std::min(1.0, p) || lo == hi) break;
    if (r > 0) hi = x; else lo = x;
    double next = x - r / p;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
  }
  return x;
}

CumulativeIntegral::CumulativeIntegral(const ScaleTable& tab, std::function<double(double)> integrand,
                                       double tol)
    : tab_(tab), h_(std::move(integrand)), tol_(cell_tolerance(tab, tol)) {
  const auto grid = tab_.grid();
  const std::size_t n = grid.size();
  const std::size_t z = tab_.zero_index();
  values_.assign(n, 0.0);
  for (std::size_t i = z + 1; i < n; ++i) {
    values_[i] = values_[i - 1] + quad::adaptive_simpson(h_, grid[i - 1], grid[i], tol_);
  }
  for (std::size_t i = z; i-- > 0;) {
    values_[i] = values_[i + 1] - quad::adaptive_simpson(h_, grid[i], grid[i + 1], tol_);
  }
}

double CumulativeIntegral::at(double x) const {
  const std::size_t j = tab_.nearest(x);
  const double xj = tab_.x(j);
  if (x == xj) return values_[j];
  return values_[j] + quad::adaptive_simpson(h_, xj, x, tol_);
}

NestedIntegral::NestedIntegral(const ScaleTable& tab, std::function<double(double)> q)
    : tab_(tab),
      inner_(tab, [tab, q = std::move(q)](double v) { return q(v) / tab.fprime_at(v); }, tab.quad_tol()),
      tol_(cell_tolerance(tab, tab.quad_tol())) {
  const auto grid = tab_.grid();
  const std::size_t n = grid.size();
  const std::size_t z = tab_.zero_index();
  auto integrand = [this](double u) { return 2.0 * tab_.fprime_at(u) * inner_.at(u); };
  outer_.assign(n, 0.0);
  for (std::size_t i = z + 1; i < n; ++i) {
    outer_[i] = outer_[i - 1] + quad::adaptive_simpson(integrand, grid[i - 1], grid[i], tol_);
  }
  for (std::size_t i = z; i-- > 0;) {
    outer_[i] = outer_[i + 1] - quad::adaptive_simpson(integrand, grid[i], grid[i + 1], tol_);
  }
}

double NestedIntegral::value(double x) const {
  const std::size_t j = tab_.nearest(x);
  const double xj = tab_.x(j);
  if (x == xj) return outer_[j];
  auto integrand = [this](double u) { return 2.0 * tab_.fprime_at(u) * inner_.at(u); };
  return outer_[j] + quad::adaptive_simpson(integrand, xj, x, tol_);
}

double NestedIntegral::inner(double x) const { return inner_.at(x); }

double NestedIntegral::flux(double x) const { return tab_.fprime_at(x) * inner_.at(x); }

double nested_integral(const ScaleTable& tab, std::function<double(double)> q, double x) {
  return NestedIntegral(tab, std::move(q)).value(x);
}

double check_A3(const ScaleTable& tab, std::function<double(double)> q, double N) {
  const CumulativeIntegral J(tab, [&tab, &q](double v) { return q(v) / tab.fprime_at(v); }, tab.quad_tol());
  const auto fp = tab.fprime();
  return refined_sup(
      tab, N, [&](std::size_t i) { return fp[i] * J.at_node(i); },
      [&](double x) { return tab.fprime_at(x) * J.at(x); });
}

double check_A4(const ScaleTable& tab, const Scenario& s, double N) {
  const double T = tab.T();
  const auto& G = s.transform;
  const auto& g = s.functional.g_eval;
  const auto& g0 = s.limit.g0;
  const CumulativeIntegral J(tab, [&](double v) { return g(T, v) / tab.fprime_at(v); }, tab.quad_tol());
  const auto fp = tab.fprime();
  auto target = [&](double x) { return g0(G.g_value(T, x)) * G.g_d1(T, x); };
  return refined_sup(
      tab, N, [&](std::size_t i) { return fp[i] * J.at_node(i) - target(tab.x(i)); },
      [&](double x) { return tab.fprime_at(x) * J.at(x) - target(x); });
}

double IntervalSet::measure() const {
  auto sorted = parts;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  double cur_lo = 0.0, cur_hi = 0.0;
  bool open = false;
  for (const auto& [lo, hi] : sorted) {
    if (hi < lo) continue;
    if (!open) {
      cur_lo = lo;
      cur_hi = hi;
      open = true;
    } else if (lo <= cur_hi) {
      cur_hi = std::max(cur_hi, hi);
    } else {
      total += cur_hi - cur_lo;
      cur_lo = lo;
      cur_hi = hi;
    }
  }
  if (open) total += cur_hi - cur_lo;
  return total;
}

double check_A2(const ScaleTable& tab, const TransformFamily& transform, const IntervalSet& B, double x) {
  if (B.parts.empty()) return 0.0;
  const double T = tab.T();
  const NestedIntegral phi(tab, [&](double v) { return B.contains(transform.g_value(T, v)) ? 1.0 : 0.0; });
  return 0.5 * phi.value(x);
}

double check_A1(const ScaleTable& tab, const TransformFamily& transform, double N) {
  const double T = tab.T();
  double worst = 0.0;
  for (std::size_t i = 0; i < tab.size(); ++i) {
    const double x = tab.x(i);
    if (std::abs(x) > N) continue;
    const double g = transform.g_value(T, x);
    const double d1 = transform.g_d1(T, x);
    const double gen = d1 * tab.drift_at(x) + 0.5 * transform.g_d2(T, x);
    worst = std::max(worst, (gen * gen + d1 * d1) / (1.0 + g * g));
  }
  return worst;
}

Thm7Conditions check_thm7(const ScaleTable& tab, const Scenario& s, double N,
                          std::optional<std::pair<double, double>> k1_bounds) {
  if (!k1_bounds) k1_bounds = s.closed_forms.k1_bounds;
  if (!k1_bounds) throw std::invalid_argument("check_thm7: no K1 bounds for scenario " + s.id);
  const auto [delta, C] = *k1_bounds;
  const auto fp = tab.fprime();
  const auto [mn, mx] = std::minmax_element(fp.begin(), fp.end());
  constexpr double kRel = 1e-9;
  if (*mn < delta * (1.0 - kRel) || *mx > C * (1.0 + kRel)) {
    std::ostringstream os;
    os << "scenario " << s.id << " not in K1 on the table: f' in [" << *mn << ", " << *mx
       << "], required [" << delta << ", " << C << "]";
    throw ClassError(os.str());
  }

  const double T = tab.T();
  const auto sigma0 = s.limit.sigma0;
  auto cond1_integrand = [tab, sigma0](double v) {
    const double p = tab.fprime_at(v);
    const double sg = sigma0(tab.f_at(v));
    return (p * p - sg * sg) / p;
  };
  auto C1 = std::make_shared<const CumulativeIntegral>(tab, cond1_integrand, tab.quad_tol());

  Thm7Conditions out;
  out.cond1 = [tab, C1](double x) { return C1->at(scale_inverse(tab, x)); };

  // cond1 sup over the f-variable: nodes with |f| <= N.
  const auto f = tab.f();
  std::size_t best = tab.zero_index();
  double best_val = 0.0;
  for (std::size_t i = 0; i < tab.size(); ++i) {
    if (std::abs(f[i]) > N) continue;
    const double v = std::abs(C1->at_node(i));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  {
    const double lo = best > 0 ? tab.x(best - 1) : tab.x(best);
    const double hi = best + 1 < tab.size() ? tab.x(best + 1) : tab.x(best);
    if (hi > lo) {
      auto neg = [&](double v) { return std::abs(tab.f_at(v)) > N ? 0.0 : -std::abs(C1->at(v)); };
      const auto r = boost::math::tools::brent_find_minima(neg, lo, hi, 40);
      best_val = std::max(best_val, -r.second);
    }
  }
  out.cond1_sup = best_val;

  const auto& F = s.functional.f_eval;
  const auto& g = s.functional.g_eval;
  const auto& F0 = s.limit.f0;
  const auto& g0 = s.limit.g0;
  out.cond2_sup = refined_sup(
      tab, N, [&](std::size_t i) { return F(T, tab.x(i)) + f[i] - F0(f[i]); },
      [&](double x) {
        const double fx = tab.f_at(x);
        return F(T, x) + fx - F0(fx);
      });

  const CumulativeIntegral L2(
      tab,
      [&](double x) {
        const double p = tab.fprime_at(x);
        const double d = g(T, x) - p * (1.0 + g0(tab.f_at(x)));
        return d * d / p;
      },
      tab.quad_tol());
  out.cond2_l2 = L2.at(N) - L2.at(-N);
  return out;
}

}  // namespace difflim
