#include "difflim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace difflim {

EmpiricalLaw::EmpiricalLaw(std::vector<double> samples) : samples_(std::move(samples)) {
  std::sort(samples_.begin(), samples_.end());
}

double EmpiricalLaw::mean() const {
  if (samples_.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
}

double EmpiricalLaw::variance() const {
  if (samples_.size() < 2) throw std::invalid_argument("variance needs at least two samples");
  const double m = mean();
  double ss = 0.0;
  for (double v : samples_) ss += (v - m) * (v - m);
  return ss / static_cast<double>(samples_.size() - 1);
}

double EmpiricalLaw::stdev() const { return std::sqrt(variance()); }

double EmpiricalLaw::cdf(double x) const {
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
  return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

double ks_two_sample(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("ks_two_sample: empty sample");
  const auto sa = a.samples();
  const auto sb = b.samples();
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      x = sa[i];
    } else {
      x = sb[j];
    }
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double wasserstein1(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("wasserstein1: empty sample");
  const auto sa = a.samples();
  const auto sb = b.samples();
  if (sa.size() == sb.size()) {
    double s = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) s += std::abs(sa[k] - sb[k]);
    return s / static_cast<double>(sa.size());
  }
  // Unequal sizes: integrate |F_a - F_b| between consecutive merged jump points.
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(sa.front(), sb.front());
  double total = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      x = sa[i];
    } else {
      x = sb[j];
    }
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (x - prev);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    prev = x;
  }
  return total;
}

MeanCI mean_ci(const EmpiricalLaw& a, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("mean_ci: level must be in (0, 1)");
  MeanCI ci;
  ci.mean = a.mean();
  if (a.size() < 2) return ci;
  ci.stderr_ = a.stdev() / std::sqrt(static_cast<double>(a.size()));
  const boost::math::normal_distribution<double> z;
  ci.halfwidth = boost::math::quantile(z, 0.5 + 0.5 * level) * ci.stderr_;
  return ci;
}

double occupation_fraction(std::span<const double> zeta, double h, const IntervalSet& B, double horizon) {
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::llround(horizon / h)),
                                       zeta.empty() ? 0 : zeta.size() - 1);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += B.contains(zeta[i]) ? 1 : 0;
  return static_cast<double>(count) * h;
}

double occupation_fraction(const PathSample& path, const IntervalSet& B, double horizon) {
  return occupation_fraction(path.zeta, path.h, B, horizon);
}

double occupation_fraction(const LimitPath& path, const IntervalSet& B, double horizon) {
  return occupation_fraction(path.zeta, path.h, B, horizon);
}

TrendVerdict convergence_trend(std::span<const double> T_ladder, std::span<const double> values,
                               double threshold, double slack) {
  if (T_ladder.size() != values.size() || values.empty()) {
    throw std::invalid_argument("convergence_trend: ladder and values must be nonempty and of equal size");
  }
  TrendVerdict v;
  const bool positive = std::all_of(values.begin(), values.end(), [](double x) { return x > 0.0; });
  if (values.size() >= 2) {
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
      mx += std::log10(T_ladder[k]);
      my += positive ? std::log10(values[k]) : values[k];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double dx = std::log10(T_ladder[k]) - mx;
      sxy += dx * ((positive ? std::log10(values[k]) : values[k]) - my);
      sxx += dx * dx;
    }
    v.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  const double allowance = slack * threshold;
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    if (values[k + 1] > values[k] + allowance) {
      std::ostringstream os;
      os << "value rises from " << values[k] << " at T=" << T_ladder[k] << " to " << values[k + 1]
         << " at T=" << T_ladder[k + 1];
      v.reason = os.str();
      return v;
    }
  }
  if (!(values.back() < threshold)) {
    std::ostringstream os;
    os << "last value " << values.back() << " not below threshold " << threshold;
    v.reason = os.str();
    return v;
  }
  v.pass = true;
  return v;
}

}  // namespace difflim
