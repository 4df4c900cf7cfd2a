#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cqdsim {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Vacuum permeability, T m / A.
inline constexpr double vacuum_permeability = 4.0e-7 * std::numbers::pi;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::domain_error("Vec3::normalized: zero vector");
    return *this / n;
  }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Atomic species parameters. Defaults (potassium39) reproduce the K-39
/// ground-state data used throughout: gyromagnetic ratios in rad/s/T,
/// moments in J/T, van der Waals radius in m.
struct PhysicalConstants {
  double mu0 = vacuum_permeability;
  double gamma_e = 0.0;  // electron gyromagnetic ratio (negative)
  double gamma_n = 0.0;  // nuclear gyromagnetic ratio (positive)
  double mu_e = 0.0;     // electron magnetic moment magnitude
  double mu_n = 0.0;     // nuclear magnetic moment magnitude
  double R = 0.0;        // van der Waals radius
  double S = 0.5;        // electron spin quantum number
  double I = 0.0;        // nuclear spin quantum number

  static constexpr PhysicalConstants potassium39() {
    PhysicalConstants c;
    c.gamma_e = -1.76085963023e11;
    c.gamma_n = 1.2500612e7;
    c.mu_e = 9.2847677043e-24;
    c.mu_n = 1.97723e-27;
    c.R = 275e-12;
    c.S = 0.5;
    c.I = 1.5;
    return c;
  }

  void validate() const {
    if (!(mu0 > 0.0)) throw std::domain_error("PhysicalConstants: mu0 must be positive");
    if (!(gamma_e < 0.0)) throw std::domain_error("PhysicalConstants: gamma_e must be negative");
    if (!(gamma_n > 0.0)) throw std::domain_error("PhysicalConstants: gamma_n must be positive");
    if (!(mu_e > 0.0)) throw std::domain_error("PhysicalConstants: mu_e must be positive");
    if (!(mu_n > 0.0)) throw std::domain_error("PhysicalConstants: mu_n must be positive");
    if (!(R > 0.0)) throw std::domain_error("PhysicalConstants: R must be positive");
  }
};

/// Magnitudes of the torque-averaged fields the moments exert on each other.
struct HyperfineFields {
  double B_e = 0.0;  // field generated by the electron moment, T
  double B_n = 0.0;  // field generated by the nuclear moment, T
};

inline HyperfineFields derived_hyperfine_fields(const PhysicalConstants& c) {
  const double scale = 5.0 * c.mu0 / (16.0 * pi * c.R * c.R * c.R);
  return {scale * c.mu_e, scale * c.mu_n};
}

/// Larmor angular frequency |gamma B| of a moment in field magnitude B.
inline double larmor_frequency(double gamma, double B) { return std::abs(gamma * B); }

/// Inner rotation chamber parameters. frisch_segre() gives the published
/// 1933 apparatus values.
struct ChamberGeometry {
  double z_a = 0.0;  // wire depth below the beam, m
  double d = 0.0;    // chamber length, m
  double v = 0.0;    // atom speed, m/s
  double B_r = 0.0;  // remnant field along +z, T

  static constexpr ChamberGeometry frisch_segre() { return {105e-6, 16.3e-3, 800.0, 42e-6}; }

  double half_transit_time() const { return d / (2.0 * v); }

  void validate() const {
    if (!(z_a > 0.0 && d > 0.0 && v > 0.0 && B_r > 0.0))
      throw std::domain_error("ChamberGeometry: all fields must be strictly positive");
  }
};

struct PolarAzimuth {
  double polar = 0.0;    // [0, pi]
  double azimuth = 0.0;  // [0, 2 pi)
};

inline Vec3 unit_from_angles(double polar, double azimuth) {
  const double s = std::sin(polar);
  return {s * std::cos(azimuth), s * std::sin(azimuth), std::cos(polar)};
}

/// Inverse of unit_from_angles. Azimuth at the poles is reported as 0.
inline PolarAzimuth angles_from_unit(const Vec3& v) {
  const double n = v.norm();
  if (std::abs(n - 1.0) > 1e-6)
    throw std::domain_error("angles_from_unit: input is not a unit vector");
  const double polar = std::acos(std::clamp(v.z / n, -1.0, 1.0));
  if (v.x == 0.0 && v.y == 0.0) return {polar, 0.0};
  double azimuth = std::atan2(v.y, v.x);
  if (azimuth < 0.0) azimuth += two_pi;
  if (azimuth >= two_pi) azimuth = 0.0;
  return {polar, azimuth};
}

/// Orientations of the electron and nuclear magnetic moments.
/// Cartesian unit vectors are the canonical representation; the spherical
/// angles are derived views.
struct MomentState {
  Vec3 mu_e_hat{0.0, 0.0, 1.0};
  Vec3 mu_n_hat{0.0, 0.0, 1.0};

  static MomentState from_angles(double theta_e, double phi_e, double theta_n, double phi_n) {
    return {unit_from_angles(theta_e, phi_e), unit_from_angles(theta_n, phi_n)};
  }

  double theta_e() const { return angles_from_unit(mu_e_hat).polar; }
  double phi_e() const { return angles_from_unit(mu_e_hat).azimuth; }
  double theta_n() const { return angles_from_unit(mu_n_hat).polar; }
  double phi_n() const { return angles_from_unit(mu_n_hat).azimuth; }

  void validate() const {
    if (std::abs(mu_e_hat.norm() - 1.0) > 1e-9 || std::abs(mu_n_hat.norm() - 1.0) > 1e-9)
      throw std::domain_error("MomentState: moment vectors must be unit length");
  }
};

}  // namespace cqdsim
