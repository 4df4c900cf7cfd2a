#pragma once

#include <cmath>
#include <stdexcept>

#include "cqdsim/core.hpp"

// Closed-form spin-flip probability for the inner rotation chamber,
// the independent oracle the Monte Carlo pipeline is validated against.
namespace cqdsim::analytic {

/// Mean nuclear polar angle under the post-SG1 density (1 - cos)/4pi.
inline constexpr double mean_theta_n() { return 5.0 * pi / 8.0; }

/// Coefficients of the three effects in the closed form: null-point rotation
/// (c_r0, A), rotation saturation (c_rs, dimensionless), resonant rotation
/// (c_rr, 1/A^3).
struct ClosedFormCoefficients {
  double c_r0 = 0.0;
  double c_rs = 0.0;
  double c_rr = 0.0;
};

inline ClosedFormCoefficients coefficients(const ChamberGeometry& geom,
                                           const PhysicalConstants& constants,
                                           const HyperfineFields& hf) {
  geom.validate();
  if (!(constants.mu0 > 0.0) || !(std::abs(constants.gamma_e) > 0.0) ||
      !(constants.gamma_n > 0.0))
    throw std::domain_error("coefficients: nonpositive physical constants");
  if (hf.B_e < 0.0 || hf.B_n < 0.0)
    throw std::domain_error("coefficients: hyperfine field magnitudes must be nonnegative");
  const double th = mean_theta_n();
  const double b_par = geom.B_r + hf.B_n * std::cos(th);
  if (!(b_par > 0.0))
    throw std::domain_error("coefficients: B_r + B_n cos<theta_n> must be positive");
  const double b_perp = hf.B_n * std::sin(th);
  const double abs_ge = std::abs(constants.gamma_e);
  ClosedFormCoefficients c;
  c.c_r0 = abs_ge * 2.0 * pi * pi * geom.z_a * geom.z_a / (constants.mu0 * geom.v) *
           b_par * b_par;
  c.c_rs = abs_ge * pi * geom.z_a / geom.v * b_perp;
  const double mu0_3 = constants.mu0 * constants.mu0 * constants.mu0;
  const double b_perp5 = b_perp * b_perp * b_perp * b_perp * b_perp;
  const double b_par6 = b_par * b_par * b_par * b_par * b_par * b_par;
  c.c_rr = mu0_3 * constants.gamma_e * constants.gamma_e * constants.gamma_n /
           (32.0 * pi * geom.v * geom.v * geom.v) * hf.B_e * b_perp5 / b_par6;
  return c;
}

/// Spin-flip probability at wire current I_w.
inline double w_analytic(double I_w, const ClosedFormCoefficients& c) {
  if (!(I_w > 0.0)) throw std::domain_error("w_analytic: I_w must be positive");
  const double r0 = c.c_r0 / I_w;
  return std::exp(-std::sqrt(r0 * r0 + c.c_rs * c.c_rs) - c.c_rr * I_w * I_w * I_w);
}

}  // namespace cqdsim::analytic
