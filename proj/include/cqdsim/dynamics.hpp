#pragma once

#include <cstddef>
#include <vector>

#include "cqdsim/core.hpp"
#include "cqdsim/field.hpp"
#include "cqdsim/radau.hpp"

// Coupled electron-nuclear Bloch dynamics through the inner rotation chamber
// and the stiff integrator driver producing theta_e trajectories.
//
// The electron moment is integrated in Cartesian form (regular at the poles,
// where the angular system has a cot(theta) singularity and where the
// pipeline's own initial condition theta_e = pi sits); the nuclear moment is
// constrained to its initial polar cone and contributes only its azimuth as a
// state variable. Angular outputs are derived views.
namespace cqdsim::dynamics {

using radau::IntegrationError;

struct OdeSettings {
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;
  double max_step = 1e-6;            // s
  double dense_output_step = 1e-8;   // s
  long max_steps = 50'000'000;       // per-atom step budget

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-3) || !(abs_tol > 0.0 && abs_tol <= 1e-3))
      throw std::domain_error("OdeSettings: tolerances must lie in (0, 1e-3]");
    if (!(max_step > 0.0)) throw std::domain_error("OdeSettings: max_step must be positive");
    if (!(dense_output_step > 0.0))
      throw std::domain_error("OdeSettings: dense_output_step must be positive");
    if (max_steps < 1) throw std::domain_error("OdeSettings: max_steps must be positive");
  }
};

/// Dense trajectory through the chamber. theta_n is constant by construction
/// and stored once; phi angles are wrapped to [0, 2 pi).
struct TrajectoryResult {
  std::vector<double> times;
  std::vector<double> theta_e;
  std::vector<double> phi_e;
  std::vector<double> phi_n;
  double theta_n0 = 0.0;
  double theta_e_final = 0.0;
};

struct MomentRates {
  Vec3 mu_e_hat_dot;
  Vec3 mu_n_hat_dot;
};

/// Full coupled Bloch equations: each moment precesses about the external
/// field plus the other moment's torque-averaged field.
inline MomentRates rhs_full(const MomentState& state, const Vec3& B_ext,
                            const PhysicalConstants& constants,
                            const HyperfineFields& hf) {
  const Vec3 B_on_e = B_ext + hf.B_n * state.mu_n_hat;
  const Vec3 B_on_n = B_ext + hf.B_e * state.mu_e_hat;
  return {constants.gamma_e * state.mu_e_hat.cross(B_on_e),
          constants.gamma_n * state.mu_n_hat.cross(B_on_n)};
}

inline MomentRates rhs_full(const MomentState& state, const Vec3& B_ext,
                            const PhysicalConstants& constants) {
  return rhs_full(state, B_ext, constants, derived_hyperfine_fields(constants));
}

struct AngularState {
  double theta_e = 0.0;
  double phi_e = 0.0;
  double theta_n = 0.0;
  double phi_n = 0.0;
};

using AngularRates = AngularState;

namespace detail {
// cot(theta) with the gauge choice that the cot term is dropped exactly at
// the poles, where the azimuth itself is a gauge angle.
inline double safe_cot(double theta) {
  const double s = std::sin(theta);
  if (s == 0.0) return 0.0;
  return std::cos(theta) / s;
}
}  // namespace detail

/// Reduced angular system in an in-plane field (B_x = 0): the nuclear polar
/// rate is pinned to zero, the nuclear azimuth keeps its full Bloch rate.
/// Finite for all inputs, including exact poles (see detail::safe_cot).
inline AngularRates rhs_reduced_in_field(const AngularState& a, const Vec3& B,
                                         const PhysicalConstants& constants,
                                         const HyperfineFields& hf) {
  const double se = std::sin(a.theta_e), ce = std::cos(a.theta_e);
  const double sn = std::sin(a.theta_n), cn = std::cos(a.theta_n);
  const double spe = std::sin(a.phi_e), cpe = std::cos(a.phi_e);
  const double spn = std::sin(a.phi_n);
  AngularRates r;
  r.theta_e = -constants.gamma_e *
              (B.y * cpe + hf.B_n * sn * std::sin(a.phi_n - a.phi_e));
  r.phi_e = -constants.gamma_e *
            (B.z + hf.B_n * cn -
             detail::safe_cot(a.theta_e) *
                 (B.y * spe + hf.B_n * sn * std::cos(a.phi_e - a.phi_n)));
  r.theta_n = 0.0;
  r.phi_n = -constants.gamma_n *
            (B.z + hf.B_e * ce -
             detail::safe_cot(a.theta_n) *
                 (B.y * spn + hf.B_e * se * std::cos(a.phi_e - a.phi_n)));
  return r;
}

/// Reduced system under the quadrupole field on the beam path at time t.
inline AngularRates rhs_reduced(const AngularState& a, double t, double I_w,
                                const ChamberGeometry& geom,
                                const PhysicalConstants& constants) {
  return rhs_reduced_in_field(a, field::quadrupole_on_path(t, I_w, geom), constants,
                              derived_hyperfine_fields(constants));
}

namespace detail {

// State layout for the reduced integration: electron moment in Cartesian
// components plus the (unwrapped) nuclear azimuth.
using ReducedState = radau::State<4>;

struct ReducedSystem {
  double gamma_e, gamma_n, B_e, B_n;
  double B_y;       // constant quadrupole component along +y
  double dBz_dt;    // quadrupole gradient times beam speed
  double t_np;
  double sin_tn, cos_tn, cot_tn;

  void rhs(double t, const ReducedState& y, ReducedState& dy) const {
    const double Bz = dBz_dt * (t - t_np);
    const double cp = std::cos(y[3]), sp = std::sin(y[3]);
    const double btx = B_n * sin_tn * cp;
    const double bty = B_y + B_n * sin_tn * sp;
    const double btz = Bz + B_n * cos_tn;
    dy[0] = gamma_e * (y[1] * btz - y[2] * bty);
    dy[1] = gamma_e * (y[2] * btx - y[0] * btz);
    dy[2] = gamma_e * (y[0] * bty - y[1] * btx);
    dy[3] = -gamma_n *
            (Bz + B_e * y[2] - cot_tn * (B_y * sp + B_e * (y[0] * cp + y[1] * sp)));
  }

  void jacobian(double t, const ReducedState& y, radau::Matrix<4>& J) const {
    const double Bz = dBz_dt * (t - t_np);
    const double cp = std::cos(y[3]), sp = std::sin(y[3]);
    const double btx = B_n * sin_tn * cp;
    const double bty = B_y + B_n * sin_tn * sp;
    const double btz = Bz + B_n * cos_tn;
    // d(mu x B)/d(mu) = -skew(B)
    J[0][0] = 0.0;
    J[0][1] = gamma_e * btz;
    J[0][2] = -gamma_e * bty;
    J[1][0] = -gamma_e * btz;
    J[1][1] = 0.0;
    J[1][2] = gamma_e * btx;
    J[2][0] = gamma_e * bty;
    J[2][1] = -gamma_e * btx;
    J[2][2] = 0.0;
    // d(mu x B)/d(phi_n) = mu x dB/dphi_n with dB/dphi_n = B_n sin_tn (-sp, cp, 0)
    const double dbx = -B_n * sin_tn * sp;
    const double dby = B_n * sin_tn * cp;
    J[0][3] = gamma_e * (y[1] * 0.0 - y[2] * dby);
    J[1][3] = gamma_e * (y[2] * dbx - y[0] * 0.0);
    J[2][3] = gamma_e * (y[0] * dby - y[1] * dbx);
    J[3][0] = gamma_n * cot_tn * B_e * cp;
    J[3][1] = gamma_n * cot_tn * B_e * sp;
    J[3][2] = -gamma_n * B_e;
    J[3][3] = gamma_n * cot_tn * (B_y * cp + B_e * (y[1] * cp - y[0] * sp));
  }
};

inline double wrap_two_pi(double phi) {
  double w = std::fmod(phi, two_pi);
  if (w < 0.0) w += two_pi;
  if (w >= two_pi) w = 0.0;
  return w;
}

}  // namespace detail

/// Mean of theta_e over the trailing `window` seconds of the trajectory.
inline double final_polar_angle(const TrajectoryResult& traj, double window) {
  if (traj.times.empty()) throw std::domain_error("final_polar_angle: empty trajectory");
  if (!(window > 0.0)) throw std::domain_error("final_polar_angle: window must be positive");
  const double t_end = traj.times.back();
  const double span = t_end - traj.times.front();
  if (window > span * (1.0 + 1e-12))
    throw std::domain_error("final_polar_angle: window longer than trajectory");
  const double t_from = t_end - window * (1.0 + 1e-12);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = traj.times.size(); i-- > 0;) {
    if (traj.times[i] < t_from) break;
    sum += traj.theta_e[i];
    ++n;
  }
  if (n == 0) throw std::domain_error("final_polar_angle: no samples in window");
  return sum / static_cast<double>(n);
}

/// Integrate the reduced system from t_begin to chamber exit. Exposed with a
/// free start time so the sensitivity of theta_e_final to the entry point can
/// be measured; integrate_atom covers the full transit.
inline TrajectoryResult integrate_reduced(const MomentState& init, double t_begin,
                                          double I_w, const ChamberGeometry& geom,
                                          const PhysicalConstants& constants,
                                          const OdeSettings& settings,
                                          double averaging_window = 2e-6) {
  settings.validate();
  geom.validate();
  if (!(I_w > 0.0)) throw std::domain_error("integrate_reduced: I_w must be positive");
  const double t_end = geom.half_transit_time();
  if (!(t_begin < t_end))
    throw std::domain_error("integrate_reduced: t_begin must precede chamber exit");

  const PolarAzimuth n_angles = angles_from_unit(init.mu_n_hat);
  const double theta_n0 = n_angles.polar;
  if (std::sin(theta_n0) == 0.0)
    throw std::domain_error("integrate_reduced: nuclear moment exactly at a pole");

  const HyperfineFields hf = derived_hyperfine_fields(constants);
  detail::ReducedSystem sys;
  sys.gamma_e = constants.gamma_e;
  sys.gamma_n = constants.gamma_n;
  sys.B_e = hf.B_e;
  sys.B_n = hf.B_n;
  sys.B_y = field::quadrupole_gradient(I_w, geom) * geom.z_a;
  sys.dBz_dt = field::quadrupole_gradient(I_w, geom) * geom.v;
  sys.t_np = field::null_point(I_w, geom).t_np;
  sys.sin_tn = std::sin(theta_n0);
  sys.cos_tn = std::cos(theta_n0);
  sys.cot_tn = sys.cos_tn / sys.sin_tn;

  detail::ReducedState y{init.mu_e_hat.x, init.mu_e_hat.y, init.mu_e_hat.z,
                         n_angles.azimuth};

  TrajectoryResult out;
  out.theta_n0 = theta_n0;
  const double dt = settings.dense_output_step;
  const std::size_t n_est = static_cast<std::size_t>((t_end - t_begin) / dt) + 2;
  out.times.reserve(n_est);
  out.theta_e.reserve(n_est);
  out.phi_e.reserve(n_est);
  out.phi_n.reserve(n_est);

  const auto record = [&](double t, const detail::ReducedState& s) {
    const Vec3 mu{s[0], s[1], s[2]};
    const double n = mu.norm();
    out.times.push_back(t);
    out.theta_e.push_back(std::acos(std::clamp(s[2] / n, -1.0, 1.0)));
    out.phi_e.push_back((s[0] == 0.0 && s[1] == 0.0)
                            ? 0.0
                            : detail::wrap_two_pi(std::atan2(s[1], s[0])));
    out.phi_n.push_back(detail::wrap_two_pi(s[3]));
  };

  record(t_begin, y);
  long sample_idx = 1;

  radau::Controls ctl;
  ctl.rel_tol = settings.rel_tol;
  ctl.abs_tol = settings.abs_tol;
  ctl.max_step = settings.max_step;
  ctl.max_steps = settings.max_steps;

  const auto rhs = [&sys](double t, const detail::ReducedState& s,
                          detail::ReducedState& d) { sys.rhs(t, s, d); };
  const auto jac = [&sys](double t, const detail::ReducedState& s,
                          radau::Matrix<4>& J) { sys.jacobian(t, s, J); };

  const double slack = 1e-9 * dt;
  const auto on_step = [&](const radau::DenseStep<4>& step, detail::ReducedState& y1) {
    double ts = t_begin + static_cast<double>(sample_idx) * dt;
    while (ts <= step.t_end() + slack && ts <= t_end + slack) {
      record(ts, step.eval(ts));
      ++sample_idx;
      ts = t_begin + static_cast<double>(sample_idx) * dt;
    }
    // Keep the electron moment on the unit sphere.
    const double n = std::sqrt(y1[0] * y1[0] + y1[1] * y1[1] + y1[2] * y1[2]);
    y1[0] /= n;
    y1[1] /= n;
    y1[2] /= n;
  };

  const detail::ReducedState y_final =
      radau::integrate<4>(rhs, jac, t_begin, t_end, y, ctl, on_step);
  if (out.times.back() < t_end - 0.5 * dt) record(t_end, y_final);

  out.theta_e_final =
      std::clamp(final_polar_angle(out, averaging_window), 0.0, pi);
  return out;
}

/// Integrate one atom through the full chamber transit under the on-path
/// quadrupole field. The pipeline hands in theta_e = pi (the pre-null-point
/// adiabatic flip applied as an initial condition) and a sampled nuclear
/// orientation away from the poles.
inline TrajectoryResult integrate_atom(const MomentState& init, double I_w,
                                       const ChamberGeometry& geom,
                                       const PhysicalConstants& constants,
                                       const OdeSettings& settings,
                                       double averaging_window = 2e-6) {
  return integrate_reduced(init, -geom.half_transit_time(), I_w, geom, constants,
                           settings, averaging_window);
}

/// Dense full-system trajectory in a constant external field; validation
/// helper for the solver (Larmor precession, conservation checks).
struct FullTrajectory {
  std::vector<double> times;
  std::vector<MomentState> states;
};

inline FullTrajectory integrate_full(const MomentState& init, const Vec3& B_ext,
                                     double t0, double t1,
                                     const PhysicalConstants& constants,
                                     const HyperfineFields& hf,
                                     const OdeSettings& settings,
                                     double sample_step) {
  settings.validate();
  if (!(sample_step > 0.0))
    throw std::domain_error("integrate_full: sample_step must be positive");
  using S6 = radau::State<6>;
  const double ge = constants.gamma_e, gn = constants.gamma_n;

  const auto rhs = [&](double, const S6& y, S6& d) {
    const Vec3 e{y[0], y[1], y[2]}, n{y[3], y[4], y[5]};
    const Vec3 be = B_ext + hf.B_n * n;
    const Vec3 bn = B_ext + hf.B_e * e;
    const Vec3 de = ge * e.cross(be);
    const Vec3 dn = gn * n.cross(bn);
    d = {de.x, de.y, de.z, dn.x, dn.y, dn.z};
  };
  const auto jac = [&](double, const S6& y, radau::Matrix<6>& J) {
    const Vec3 e{y[0], y[1], y[2]}, n{y[3], y[4], y[5]};
    const Vec3 be = B_ext + hf.B_n * n;
    const Vec3 bn = B_ext + hf.B_e * e;
    const auto skew_into = [&](const Vec3& v, int r0, int c0, double scale) {
      J[r0 + 0][c0 + 0] = 0.0;
      J[r0 + 0][c0 + 1] = -scale * v.z;
      J[r0 + 0][c0 + 2] = scale * v.y;
      J[r0 + 1][c0 + 0] = scale * v.z;
      J[r0 + 1][c0 + 1] = 0.0;
      J[r0 + 1][c0 + 2] = -scale * v.x;
      J[r0 + 2][c0 + 0] = -scale * v.y;
      J[r0 + 2][c0 + 1] = scale * v.x;
      J[r0 + 2][c0 + 2] = 0.0;
    };
    // d(mu x B)/dmu = -skew(B); d(e x Bn n)/dn = B_n skew(e)
    skew_into(be, 0, 0, -ge);
    skew_into(e, 0, 3, ge * hf.B_n);
    skew_into(n, 3, 0, gn * hf.B_e);
    skew_into(bn, 3, 3, -gn);
  };

  S6 y{init.mu_e_hat.x, init.mu_e_hat.y, init.mu_e_hat.z,
       init.mu_n_hat.x, init.mu_n_hat.y, init.mu_n_hat.z};

  FullTrajectory out;
  const auto record = [&](double t, const S6& s) {
    out.times.push_back(t);
    out.states.push_back({{s[0], s[1], s[2]}, {s[3], s[4], s[5]}});
  };
  record(t0, y);
  long sample_idx = 1;

  radau::Controls ctl;
  ctl.rel_tol = settings.rel_tol;
  ctl.abs_tol = settings.abs_tol;
  ctl.max_step = settings.max_step;
  ctl.max_steps = settings.max_steps;

  const double slack = 1e-9 * sample_step;
  const auto on_step = [&](const radau::DenseStep<6>& step, S6&) {
    double ts = t0 + static_cast<double>(sample_idx) * sample_step;
    while (ts <= step.t_end() + slack && ts <= t1 + slack) {
      record(ts, step.eval(ts));
      ++sample_idx;
      ts = t0 + static_cast<double>(sample_idx) * sample_step;
    }
  };

  const S6 y_final = radau::integrate<6>(rhs, jac, t0, t1, y, ctl, on_step);
  if (out.times.back() < t1 - 0.5 * sample_step) record(t1, y_final);
  return out;
}

}  // namespace cqdsim::dynamics
