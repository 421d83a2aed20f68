#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace ksb {

// Radial nodes r_0 < r_1 < ... with two weight sets for integrals f(r) 2 pi r dr:
// `weights` is a nonuniform composite Simpson rule on r f(r) (high order),
// `cell_areas` are the annuli between node midpoints (exactly conservative).
class RadialGrid {
 public:
  explicit RadialGrid(std::vector<double> radii);

  // r_i = A (e^{beta i / (n-1)} - 1), A chosen so r_{n-1} = R. Smooth in i,
  // so refinement families converge at the design order.
  static RadialGrid stretched(std::size_t n, double R, double beta);
  // Same family with beta fixed by the first step r_1 = first_step.
  static RadialGrid geometric(std::size_t n, double R, double first_step);
  static RadialGrid uniform(std::size_t n, double R);

  std::size_t size() const { return r_.size(); }
  double r(std::size_t i) const { return r_[i]; }
  double outer() const { return r_.back(); }
  const std::vector<double>& radii() const { return r_; }
  const std::vector<double>& weights() const { return w_; }
  const std::vector<double>& cell_areas() const { return area_; }
  // Midpoints between consecutive nodes (size n-1).
  const std::vector<double>& faces() const { return faces_; }

 private:
  std::vector<double> r_, w_, area_, faces_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

struct RadialField {
  GridPtr grid;
  std::vector<double> values;

  RadialField() = default;
  RadialField(GridPtr g, std::vector<double> v);
  static RadialField sample(GridPtr g, const std::function<double(double)>& f);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  double sup() const;
};

// Sum_i w_i f_i with the high-order weights.
double integrate_2d(const RadialGrid& g, const std::vector<double>& f);
double integrate_2d(const RadialField& f);

// Estimate of int_R^inf f 2 pi r dr assuming power decay f ~ r^{-p}; the
// exponent is read off the last two nodes and replaced by `fallback_power`
// when that reading is unusable. Returns 0 when the fallback is also <= 2.
double tail_2d(const RadialGrid& g, const std::vector<double>& f, double fallback_power);

// Same for a plain 1D integrand: int_R^inf f dr with f ~ r^{-p}, p > 1.
double tail_1d(double r1, double f1, double r2, double f2, double fallback_power);

// Cumulative integral out[i] = int_{r_0}^{r_i} f dr; each interval averages
// the two quadratic interpolants that contain it (fourth order on smooth grids).
std::vector<double> cumulative_integral(const std::vector<double>& r, const std::vector<double>& f);
// Reverse form: out[i] = int_{r_i}^{r_{n-1}} f dr.
std::vector<double> reverse_cumulative_integral(const std::vector<double>& r, const std::vector<double>& f);

// Cumulative trapezoid of f over the node radii: out[i] = int_{r_0}^{r_i} f dr.
std::vector<double> cumulative_trapezoid(const std::vector<double>& r, const std::vector<double>& f);

}  // namespace ksb
