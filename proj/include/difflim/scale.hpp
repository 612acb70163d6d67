#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "difflim/drift_models.hpp"

namespace difflim {

// Tabulated scale function f_T(x) = int_0^x exp(-2 int_0^u a_T) du on a
// uniform grid over [-X, X] that contains the origin. Immutable; copies share
// the underlying data.
class ScaleTable {
 public:
  double T() const noexcept { return d_->T; }
  double half_width() const noexcept { return d_->X; }
  double step() const noexcept { return d_->step; }
  double quad_tol() const noexcept { return d_->quad_tol; }
  std::size_t size() const noexcept { return d_->grid.size(); }
  std::size_t zero_index() const noexcept { return d_->zero; }

  std::span<const double> grid() const noexcept { return d_->grid; }
  std::span<const double> f() const noexcept { return d_->f; }
  std::span<const double> fprime() const noexcept { return d_->fprime; }
  // a_T at the grid nodes (derivative of log f' is -2 a_T).
  std::span<const double> drift_nodes() const noexcept { return d_->drift; }

  double x(std::size_t i) const noexcept { return d_->grid[i]; }
  bool contains(double x) const noexcept { return x >= -d_->X && x <= d_->X; }
  // Index of the grid node nearest to x; throws RangeError outside [-X, X].
  std::size_t nearest(double x) const;
  // Index i with grid[i] <= x <= grid[i+1].
  std::size_t cell(double x) const;

  double drift_at(double x) const { return d_->drift_fn(d_->T, x); }
  // f_T'(x) and f_T(x) at arbitrary points, accurate to quad_tol.
  double fprime_at(double x) const;
  double f_at(double x) const;

  // Cubic Hermite interpolation in the f-variable: returns phi(y) and stores
  // f'(phi(y)) in *fprime_out. Used inside the transformed integrator.
  double inverse_fast(double y, double* fprime_out) const;

  // CSV rows (x, f, fprime).
  void write_csv(std::ostream& os) const;

 private:
  struct Data {
    double T = 0.0;
    double X = 0.0;
    double step = 0.0;
    double quad_tol = 0.0;
    std::size_t zero = 0;
    Coefficient drift_fn;
    std::vector<double> grid, f, fprime, drift;
  };
  explicit ScaleTable(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  std::shared_ptr<const Data> d_;

  friend ScaleTable build_scale(const DriftFamily&, double, double, double, double);
};

// user_step caps the grid spacing; the feature scale of the drift caps it at
// feature_scale(T) / 10.
ScaleTable build_scale(const DriftFamily& drift, double T, double X, double quad_tol,
                       double user_step = 1e-2);

// phi_T(y): inverse of f_T, |f_T(phi(y)) - y| <= quad_tol.
double scale_inverse(const ScaleTable& tab, double y);

// Cumulative integral int_0^{x_i} h(v) dv on the table grid, with pointwise
// evaluation between nodes by a local adaptive piece.
class CumulativeIntegral {
 public:
  CumulativeIntegral(const ScaleTable& tab, std::function<double(double)> integrand, double tol);

  std::span<const double> values() const noexcept { return values_; }
  double at_node(std::size_t i) const { return values_[i]; }
  double at(double x) const;
  const ScaleTable& table() const noexcept { return tab_; }

 private:
  ScaleTable tab_;
  std::function<double(double)> h_;
  double tol_;
  std::vector<double> values_;
};

// Phi(x) = 2 int_0^x f'(u) J(u) du with J(u) = int_0^u q(v)/f'(v) dv.
class NestedIntegral {
 public:
  NestedIntegral(const ScaleTable& tab, std::function<double(double)> q);

  double value(double x) const;  // Phi(x)
  double inner(double x) const;  // J(x)
  double flux(double x) const;   // f'(x) J(x)
  std::span<const double> values() const noexcept { return outer_; }

 private:
  ScaleTable tab_;
  CumulativeIntegral inner_;
  std::vector<double> outer_;
  double tol_;
};

double nested_integral(const ScaleTable& tab, std::function<double(double)> q, double x);

// sup over |x| <= N of f'(x) |int_0^x q/f'|.
double check_A3(const ScaleTable& tab, std::function<double(double)> q, double N);
// sup over |x| <= N of |f'(x) int_0^x g_T/f' - g0(G(x)) G'(x)|.
double check_A4(const ScaleTable& tab, const Scenario& s, double N);

// Closed intervals [lo, hi]; a finite union of them.
struct IntervalSet {
  std::vector<std::pair<double, double>> parts;

  bool contains(double v) const noexcept {
    for (const auto& [lo, hi] : parts) {
      if (v >= lo && v <= hi) return true;
    }
    return false;
  }
  // Lebesgue measure (overlaps are merged).
  double measure() const;
};

// Left side of (A2): int_0^x f'(u) int_0^u chi_B(G(v))/f'(v) dv du.
double check_A2(const ScaleTable& tab, const TransformFamily& transform, const IntervalSet& B, double x);

// sup over grid nodes |x| <= N of [(G'a + G''/2)^2 + G'^2] / (1 + G^2); the
// constant in (A1) is not fixed, so the ratio is reported.
double check_A1(const ScaleTable& tab, const TransformFamily& transform, double N);

struct Thm7Conditions {
  std::function<double(double)> cond1;  // x -> int_0^{phi(x)} ([f']^2 - sigma0^2(f))/f' dv
  double cond1_sup = 0.0;               // sup over |x| <= N in the f-variable
  double cond2_sup = 0.0;
  double cond2_l2 = 0.0;
};

// Throws ClassError when min f' < delta or max f' > C on the grid. Bounds
// default to the scenario's declared K1 band.
Thm7Conditions check_thm7(const ScaleTable& tab, const Scenario& s, double N,
                          std::optional<std::pair<double, double>> k1_bounds = std::nullopt);

}  // namespace difflim
