#pragma once

namespace ksb {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEulerGamma = 0.57721566490153286061;

struct RateConstants {
  double euler_gamma;
  double a;       // sqrt(2)/2
  double c_star;  // 4 exp(-(gamma + 2))
  double kappa;   // gamma + 1 - ln 4

  static RateConstants standard();
  // gamma + 2 + ln(c_star / 4), zero up to rounding.
  double identity_defect() const;
};

double bubble_U(double rho);
double bubble_U_prime(double rho);
double gamma0(double rho);
double Z0(double rho);
double z0_kernel(double rho);
// Second radial kernel element of Delta + U, normalized so that
// rho * (z0 * zbar0' - z0' * zbar0) = -1.
double zbar0_kernel(double rho);
double zbar0_kernel_prime(double rho);

// Asymptotic scale and rate p = lambda * lambda' written in tau = T - t.
double lambda_star_tau(double tau);
double p_star_tau(double tau);
double lambda_star(double t, double T);
double p_star(double t, double T);

// Quintic smoothstep x^3 (10 - 15 x + 6 x^2) clamped to [0, 1].
double smoothstep5(double x);
double smoothstep5_d1(double x);
double smoothstep5_d2(double x);

class Cutoff {
 public:
  enum class Kind { quintic, sharp };

  static Cutoff quintic() { return Cutoff(Kind::quintic); }
  // Indicator of [0, 1]; only meaningful for diagnostics of integrals.
  static Cutoff sharp() { return Cutoff(Kind::sharp); }

  double operator()(double s) const;
  double d1(double s) const;
  double d2(double s) const;
  Kind kind() const { return kind_; }

 private:
  explicit Cutoff(Kind k) : kind_(k) {}
  Kind kind_;
};

// Time cutoff: 0 for s <= -1/2, 1 for s >= 0.
double eta_cutoff(double s);

}  // namespace ksb
