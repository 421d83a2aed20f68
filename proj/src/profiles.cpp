#include "ksblow/profiles.hpp"

#include <cmath>

#include "ksblow/errors.hpp"

namespace ksb {

RateConstants RateConstants::standard() {
  const double g = kEulerGamma;
  return {g, std::sqrt(2.0) / 2.0, 4.0 * std::exp(-(g + 2.0)), g + 1.0 - std::log(4.0)};
}

double RateConstants::identity_defect() const {
  return euler_gamma + 2.0 + std::log(c_star / 4.0);
}

double bubble_U(double rho) {
  const double q = 1.0 + rho * rho;
  return 8.0 / (q * q);
}

double bubble_U_prime(double rho) {
  const double q = 1.0 + rho * rho;
  return -32.0 * rho / (q * q * q);
}

double gamma0(double rho) { return std::log(8.0) - 2.0 * std::log1p(rho * rho); }

double Z0(double rho) {
  const double r2 = rho * rho, q = 1.0 + r2;
  return 16.0 * (1.0 - r2) / (q * q * q);
}

double z0_kernel(double rho) {
  const double r2 = rho * rho;
  return 2.0 * (1.0 - r2) / (1.0 + r2);
}

double zbar0_kernel(double rho) {
  const double r2 = rho * rho;
  return ((r2 - 1.0) * std::log(rho) - 2.0) / (2.0 * (1.0 + r2));
}

double zbar0_kernel_prime(double rho) {
  const double r2 = rho * rho, q = 1.0 + r2;
  const double num = 2.0 * rho * std::log(rho) + (r2 - 1.0) / rho;
  const double top = (r2 - 1.0) * std::log(rho) - 2.0;
  return num / (2.0 * q) - top * rho / (q * q);
}

namespace {
void check_tau(double tau) {
  if (!(tau > 0.0) || !(tau < 1.0)) throw DomainError("time to blow-up T - t must lie in (0, 1)");
}
}  // namespace

double lambda_star_tau(double tau) {
  check_tau(tau);
  const double L = -std::log(tau);
  return 2.0 * std::exp(-(kEulerGamma + 2.0) / 2.0) * std::sqrt(tau) * std::exp(-std::sqrt(L / 2.0));
}

double p_star_tau(double tau) {
  check_tau(tau);
  const double L = -std::log(tau);
  const double c_star = RateConstants::standard().c_star;
  return -0.5 * c_star * std::exp(-std::sqrt(2.0 * L));
}

double lambda_star(double t, double T) { return lambda_star_tau(T - t); }
double p_star(double t, double T) { return p_star_tau(T - t); }

double smoothstep5(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

double smoothstep5_d1(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double y = x * (1.0 - x);
  return 30.0 * y * y;
}

double smoothstep5_d2(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
}

double Cutoff::operator()(double s) const {
  if (kind_ == Kind::sharp) return s <= 1.0 ? 1.0 : 0.0;
  return 1.0 - smoothstep5(s - 1.0);
}

double Cutoff::d1(double s) const {
  if (kind_ == Kind::sharp) return 0.0;
  return -smoothstep5_d1(s - 1.0);
}

double Cutoff::d2(double s) const {
  if (kind_ == Kind::sharp) return 0.0;
  return -smoothstep5_d2(s - 1.0);
}

double eta_cutoff(double s) { return smoothstep5(2.0 * s + 1.0); }

}  // namespace ksb
