#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ksblow/errors.hpp"
#include "ksblow/radial.hpp"

namespace ksb {

// A step that must be retried with a smaller dt.
class StepRejected : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "step"; }
};

// Annular cells [f_i, f_{i+1}], f_0 = 0, f_n = R.
class CellGrid {
 public:
  explicit CellGrid(std::vector<double> faces);
  // f_k = A (e^{beta k / n} - 1)
  static CellGrid stretched(std::size_t n, double R, double beta);
  // stretched family with f_1 = first_width
  static CellGrid geometric(std::size_t n, double R, double first_width);

  std::size_t size() const { return centers_.size(); }
  double outer() const { return faces_.back(); }
  const std::vector<double>& faces() const { return faces_; }
  const std::vector<double>& centers() const { return centers_; }
  // pi (f_{i+1}^2 - f_i^2)
  const std::vector<double>& areas() const { return areas_; }
  // 2 pi int_cell r^3 dr
  const std::vector<double>& second_moments() const { return moments_; }
  // radial nodes at the cell centers
  const GridPtr& nodes() const { return nodes_; }

 private:
  std::vector<double> faces_, centers_, areas_, moments_;
  GridPtr nodes_;
};

using CellGridPtr = std::shared_ptr<const CellGrid>;

struct SimConfig {
  double mass_multiplier = 1.05;  // m / (8 pi)
  double lambda0 = 1.0;
  double radius = 40.0;
  std::size_t cells = 1024;
  double first_cell = 1e-4;  // relative to lambda0
  double cfl = 0.4;
  double dt_max = 1e-2;
  double dt_min = 1e-14;
  double max_t = 10.0;
  double peak_factor = 1e8;       // stop when u_peak / u_peak(0) exceeds this
  double resolution_cells = 8.0;  // stop when lambda_eff < this * first cell width
  double sample_dt = 1e-2;
  double sample_growth = 1.05;  // also sample when u_peak changes by this factor
  bool muscl = true;
  bool drift = true;  // false: pure heat flow

  std::vector<std::string> violations() const;
  void validate() const;
  CellGridPtr make_grid() const;
};

struct SimState {
  CellGridPtr grid;
  RadialField u;  // cell averages, nodes at the cell centers
  double t = 0.0;
  double M = 0.0;
  double m2 = 0.0;
  double u_peak = 0.0;
  double lambda_eff = 0.0;  // sqrt(8 / u_peak)

  void refresh();
  // u in the last cell relative to u_peak
  double boundary_ratio() const;
};

// Cell averages of f on the grid (4-point Gauss in each cell).
std::vector<double> cell_averages(const CellGrid& g, const std::function<double(double)>& f);
SimState make_state(CellGridPtr g, std::vector<double> u, double t = 0.0);

SimState init_bubble(const SimConfig& cfg);

// v_r = -(1/r) int_0^r u s ds at the n + 1 faces, v_r(0) = 0.
std::vector<double> chemical_gradient(const CellGrid& g, const std::vector<double>& u);

struct StepOptions {
  bool muscl = true;
  bool drift = true;
  double cfl = 0.5;
};

// Largest dt allowed by the explicit drift.
double drift_dt_limit(const SimState& s, const StepOptions& opt = {});

// u_t = (1/r) (r (u_r - u v_r))_r: implicit diffusion, explicit upwind drift, zero flux at R.
// Throws StepRejected on a CFL violation or a negative cell.
SimState step(const SimState& s, double dt, const StepOptions& opt = {});

struct SimSample {
  double t = 0.0;
  double M = 0.0;
  double m2 = 0.0;
  double dm2dt_fit = 0.0;
  double u_peak = 0.0;
  double lambda_eff = 0.0;
  double q_indicator = 0.0;  // 0 unless a blow-up time was fitted
  double boundary_ratio = 0.0;
};

enum class SimStatus { completed, blowup };

struct SimRun {
  std::vector<SimSample> samples;
  SimStatus status = SimStatus::completed;
  std::string reason;
  SimState final_state;
  double min_u = 0.0;  // smallest cell value over accepted steps
  double max_mass_drift = 0.0;
  long steps = 0;
  long rejected = 0;
};

SimRun run(const SimConfig& cfg);

struct M2Report {
  double slope = 0.0;
  double expected = 0.0;  // 4M - M^2 / (2 pi)
  double rel_discrepancy = 0.0;  // relative to 4M when the expected slope is 0
  double abs_discrepancy = 0.0;
  std::size_t samples = 0;
};

// Least-squares slope of m2 over samples with boundary_ratio < 1e-10.
M2Report verify_m2_identity(const std::vector<SimSample>& series);

struct RateFit {
  double T_est = 0.0;
  double amplitude = 0.0;  // 1/u_peak ~ amplitude (T - t)^exponent
  double exponent = 0.0;
  std::vector<double> t, lambda_eff, q;
  double decreasing_fraction = 0.0;  // successive q decreases over the final decade
  bool monotone_final_decade = false;
};

// Fits T_est from u_peak on the samples whose u_peak spans the last two decades.
RateFit extract_rate(const std::vector<SimSample>& series);

}  // namespace ksb
