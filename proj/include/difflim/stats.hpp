#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "difflim/limits.hpp"
#include "difflim/scale.hpp"
#include "difflim/sde_engine.hpp"

namespace difflim {

// Sorted sample of a scalar statistic.
class EmpiricalLaw {
 public:
  EmpiricalLaw() = default;
  explicit EmpiricalLaw(std::vector<double> samples);
  explicit EmpiricalLaw(std::span<const double> samples)
      : EmpiricalLaw(std::vector<double>(samples.begin(), samples.end())) {}

  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double mean() const;
  double variance() const;  // unbiased
  double stdev() const;
  // Fraction of samples <= x.
  double cdf(double x) const;

 private:
  std::vector<double> samples_;
};

// sup_x |F_a(x) - F_b(x)|
double ks_two_sample(const EmpiricalLaw& a, const EmpiricalLaw& b);

// int |F_a - F_b| dx. For equal sizes this is the mean absolute difference of
// order statistics.
double wasserstein1(const EmpiricalLaw& a, const EmpiricalLaw& b);

struct MeanCI {
  double mean = 0.0;
  double halfwidth = 0.0;
  double stderr_ = 0.0;
};

// Normal-approximation confidence interval at the given two-sided level.
MeanCI mean_ci(const EmpiricalLaw& a, double level = 0.95);

// h * #{i < n : zeta(t_i) in B}, left-point over the first `horizon` of the path.
double occupation_fraction(std::span<const double> zeta, double h, const IntervalSet& B, double horizon);
double occupation_fraction(const PathSample& path, const IntervalSet& B, double horizon);
double occupation_fraction(const LimitPath& path, const IntervalSet& B, double horizon);

struct TrendVerdict {
  bool pass = false;
  double slope = 0.0;  // least-squares slope of log10(value) against log10(T)
  std::string reason;
};

// Passes iff v[k+1] <= v[k] + slack * threshold for every k and the last
// value is below threshold. The allowance absorbs sampling noise once the
// values reach the noise floor of the metric.
TrendVerdict convergence_trend(std::span<const double> T_ladder, std::span<const double> values,
                               double threshold, double slack = 0.1);

}  // namespace difflim
