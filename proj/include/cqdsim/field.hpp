#pragma once

#include <limits>

#include "cqdsim/core.hpp"

// Magnetic field models inside the inner rotation chamber. All fields lie in
// the yz plane; the wire runs along -x at depth z_a below the beam axis.
namespace cqdsim::field {

using FieldSample = Vec3;

struct NullPoint {
  double y_np = 0.0;  // position along the beam, m
  double t_np = 0.0;  // transit time to the null point, s
};

/// Field of the infinite straight wire carrying current I_w along -x.
inline FieldSample wire_field(double y, double z, double I_w, const ChamberGeometry& geom) {
  const double dz = z + geom.z_a;
  const double r2 = dz * dz + y * y;
  if (r2 == 0.0) throw std::domain_error("wire_field: singular at the wire position");
  const double pref = vacuum_permeability * I_w / (two_pi * r2);
  return {0.0, pref * dz, -pref * y};
}

/// Wire field plus the remnant field B_r along +z.
inline FieldSample total_field(double y, double z, double I_w, const ChamberGeometry& geom) {
  FieldSample B = wire_field(y, z, I_w, geom);
  B.z += geom.B_r;
  return B;
}

inline NullPoint null_point(double I_w, const ChamberGeometry& geom) {
  if (!(I_w > 0.0)) throw std::domain_error("null_point: I_w must be positive");
  if (!(geom.B_r > 0.0)) throw std::domain_error("null_point: B_r must be positive");
  const double y = vacuum_permeability * I_w / (two_pi * geom.B_r);
  return {y, y / geom.v};
}

/// Total field sampled on the beam path y = v t, z = 0.
/// Valid for t within the chamber transit window.
inline FieldSample field_on_path(double t, double I_w, const ChamberGeometry& geom) {
  const double half = geom.half_transit_time();
  if (t < -half || t > half)
    throw std::domain_error("field_on_path: t outside the chamber window");
  return total_field(geom.v * t, 0.0, I_w, geom);
}

/// First-order expansion of the total field about the null point.
inline FieldSample quadrupole_field(double y, double z, double I_w, const ChamberGeometry& geom) {
  if (!(I_w > 0.0)) throw std::domain_error("quadrupole_field: I_w must be positive");
  const double g = two_pi * geom.B_r * geom.B_r / (vacuum_permeability * I_w);
  const NullPoint np = null_point(I_w, geom);
  return {0.0, g * (z + geom.z_a), g * (y - np.y_np)};
}

/// Quadrupole gradient magnitude 2 pi B_r^2 / (mu0 I_w), T/m.
inline double quadrupole_gradient(double I_w, const ChamberGeometry& geom) {
  if (!(I_w > 0.0)) throw std::domain_error("quadrupole_gradient: I_w must be positive");
  return two_pi * geom.B_r * geom.B_r / (vacuum_permeability * I_w);
}

/// Quadrupole field on the beam path: B_y constant, B_z linear in t - t_NP.
inline FieldSample quadrupole_on_path(double t, double I_w, const ChamberGeometry& geom) {
  const double g = quadrupole_gradient(I_w, geom);
  const NullPoint np = null_point(I_w, geom);
  return {0.0, g * geom.z_a, g * geom.v * (t - np.t_np)};
}

/// Adiabaticity parameter k = |omega_e / Omega_B| for the on-path field:
/// electron Larmor frequency over the field rotation rate in the yz plane.
/// The nuclear contribution to the field is ignored. Returns +infinity where
/// the rotation rate vanishes (one instant between the wire and the null
/// point).
inline double adiabaticity(double t, double I_w, const ChamberGeometry& geom,
                           const PhysicalConstants& constants) {
  const double a = vacuum_permeability * I_w / two_pi;
  const double u = geom.v * t;
  const double rho2 = u * u + geom.z_a * geom.z_a;
  const double den = std::abs(a - 2.0 * u * geom.B_r);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  const double w = (a - u * geom.B_r) * (a - u * geom.B_r) + geom.B_r * geom.B_r * geom.z_a * geom.z_a;
  return std::abs(constants.gamma_e) * std::sqrt(rho2) * w * std::sqrt(w) /
         (geom.v * geom.z_a * a * den);
}

}  // namespace cqdsim::field
