#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

// Adaptive implicit Runge-Kutta integrator of Radau IIA type, order 5
// (3 stages, stiffly accurate, L-stable), with collocation dense output.
// Follows the classic simplified-Newton implementation: one LU of the
// (3N x 3N) stage matrix per factorization, Jacobian and factorization reuse
// while Newton converges fast, embedded order-3 error estimate smoothed by
// (gamma0/h I - J)^-1, and a predictive step-size controller.
namespace cqdsim::radau {

struct Controls {
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
  int max_newton_iters = 8;
};

/// Thrown when the step size underflows or the step budget is exhausted.
/// Carries the time at which integration could no longer proceed.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double failure_time)
      : std::runtime_error(what), failure_time_(failure_time) {}
  double failure_time() const noexcept { return failure_time_; }

 private:
  double failure_time_;
};

namespace detail {

// Radau IIA (3 stages, order 5) tableau and error-estimate coefficients.
inline constexpr double c1 = 0.15505102572168219018;
inline constexpr double c2 = 0.64494897427831780982;
inline constexpr double c3 = 1.0;
inline constexpr double a11 = 0.19681547722366042587;
inline constexpr double a12 = -0.065535425850198388109;
inline constexpr double a13 = 0.02377097434822015242;
inline constexpr double a21 = 0.394424314739087277;
inline constexpr double a22 = 0.29207341166522846302;
inline constexpr double a23 = -0.041548752125997930198;
inline constexpr double a31 = 0.37640306270046727505;
inline constexpr double a32 = 0.51248582618842161384;
inline constexpr double a33 = 0.11111111111111111111;
// Real eigenvalue of A^-1 and the embedded-estimate weights.
inline constexpr double gamma0 = 3.6378342527444957322;
inline constexpr double d1 = -10.048809399827415562;
inline constexpr double d2 = 1.3821427331607488958;
inline constexpr double d3 = -0.33333333333333333333;

inline constexpr std::array<std::array<double, 3>, 3> a_mat{
    {{a11, a12, a13}, {a21, a22, a23}, {a31, a32, a33}}};
inline constexpr std::array<double, 3> c_nodes{c1, c2, c3};

// Dense LU with partial pivoting on a flat row-major matrix.
template <std::size_t M>
struct Lu {
  std::array<double, M * M> a{};
  std::array<int, M> piv{};

  void factor() {
    for (std::size_t k = 0; k < M; ++k) {
      std::size_t p = k;
      double amax = std::abs(a[k * M + k]);
      for (std::size_t i = k + 1; i < M; ++i) {
        const double v = std::abs(a[i * M + k]);
        if (v > amax) {
          amax = v;
          p = i;
        }
      }
      if (amax == 0.0) throw std::runtime_error("radau: singular iteration matrix");
      piv[k] = static_cast<int>(p);
      if (p != k)
        for (std::size_t j = 0; j < M; ++j) std::swap(a[k * M + j], a[p * M + j]);
      const double inv = 1.0 / a[k * M + k];
      for (std::size_t i = k + 1; i < M; ++i) {
        const double m = a[i * M + k] * inv;
        a[i * M + k] = m;
        if (m != 0.0)
          for (std::size_t j = k + 1; j < M; ++j) a[i * M + j] -= m * a[k * M + j];
      }
    }
  }

  void solve(std::array<double, M>& b) const {
    for (std::size_t k = 0; k < M; ++k) {
      const std::size_t p = static_cast<std::size_t>(piv[k]);
      if (p != k) std::swap(b[k], b[p]);
      for (std::size_t i = k + 1; i < M; ++i) b[i] -= a[i * M + k] * b[k];
    }
    for (std::size_t k = M; k-- > 0;) {
      for (std::size_t j = k + 1; j < M; ++j) b[k] -= a[k * M + j] * b[j];
      b[k] /= a[k * M + k];
    }
  }
};

}  // namespace detail

template <std::size_t N>
using State = std::array<double, N>;

template <std::size_t N>
using Matrix = std::array<std::array<double, N>, N>;

/// One accepted step with its collocation interpolant: the cubic through
/// (t0, y0) and the three stage values y0 + Z_i at the Radau nodes.
template <std::size_t N>
struct DenseStep {
  double t_begin = 0.0;
  double h = 0.0;
  State<N> y_begin{};
  std::array<State<N>, 3> z{};

  double t_end() const { return t_begin + h; }

  State<N> eval(double t) const {
    using namespace detail;
    const double th = (t - t_begin) / h;
    // Lagrange basis over nodes {0, c1, c2, c3} with zero value at 0.
    std::array<double, 3> L;
    for (int i = 0; i < 3; ++i) {
      const double ci = c_nodes[static_cast<std::size_t>(i)];
      const double cj = c_nodes[static_cast<std::size_t>((i + 1) % 3)];
      const double ck = c_nodes[static_cast<std::size_t>((i + 2) % 3)];
      L[static_cast<std::size_t>(i)] =
          th * (th - cj) * (th - ck) / (ci * (ci - cj) * (ci - ck));
    }
    State<N> out = y_begin;
    for (std::size_t r = 0; r < N; ++r)
      out[r] += L[0] * z[0][r] + L[1] * z[1][r] + L[2] * z[2][r];
    return out;
  }
};

/// Finite-difference Jacobian fallback.
template <std::size_t N, class Rhs>
struct NumericalJacobian {
  Rhs& rhs;
  void operator()(double t, const State<N>& y, Matrix<N>& jac) {
    State<N> f0, f1, yp;
    rhs(t, y, f0);
    for (std::size_t j = 0; j < N; ++j) {
      const double dy = std::sqrt(std::numeric_limits<double>::epsilon()) *
                        std::max(1e-5, std::abs(y[j]));
      yp = y;
      yp[j] += dy;
      rhs(t, yp, f1);
      for (std::size_t i = 0; i < N; ++i) jac[i][j] = (f1[i] - f0[i]) / dy;
    }
  }
};

// rhs:      rhs(t, y, dydt)
// jacobian: jacobian(t, y, J) with J[i][j] = d f_i / d y_j
// on_step:  on_step(const DenseStep<N>&, State<N>& y_end) after each accepted
//           step; may adjust y_end (e.g. renormalization) before it becomes
//           the next initial value.
template <std::size_t N, class Rhs, class Jacobian, class OnStep>
State<N> integrate(Rhs&& rhs, Jacobian&& jacobian, double t0, double t1, State<N> y,
                   const Controls& ctl, OnStep&& on_step) {
  using namespace detail;
  static_assert(N >= 1);
  if (!(t1 > t0)) throw std::invalid_argument("radau::integrate: requires t1 > t0");
  if (!(ctl.rel_tol > 0.0) || !(ctl.abs_tol > 0.0))
    throw std::invalid_argument("radau::integrate: tolerances must be positive");

  constexpr std::size_t M = 3 * N;
  const double span = t1 - t0;
  const double eps = std::numeric_limits<double>::epsilon();
  const double fnewt =
      std::max(10.0 * eps / ctl.rel_tol, std::min(0.03, std::sqrt(ctl.rel_tol)));

  const auto scaled_rms = [&](const State<N>& v, const State<N>& ref) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = ctl.abs_tol + ctl.rel_tol * std::abs(ref[i]);
      const double q = v[i] / sc;
      s += q * q;
    }
    return std::sqrt(s / static_cast<double>(N));
  };

  double t = t0;
  State<N> f0;
  rhs(t, y, f0);

  // Initial step: crude |y|/|y'| heuristic, clamped to the span.
  double h;
  {
    const double d0 = scaled_rms(y, y);
    const double dd1 = scaled_rms(f0, y);
    h = (dd1 > 1e-10) ? 0.01 * d0 / dd1 : 1e-6 * span;
    h = std::min({h, span, ctl.max_step});
    h = std::max(h, 1e4 * eps * span);
  }

  Matrix<N> jac{};
  Lu<M> newton_lu;
  Lu<N> err_lu;
  double h_factored = -1.0;
  bool need_jacobian = true;
  bool need_factor = true;
  bool have_dense = false;
  bool last_rejected = true;  // enables the refined error estimate on step 1
  DenseStep<N> dense;
  std::array<State<N>, 3> zstage{};
  double h_acc = 0.0, err_acc = 1.0;
  long n_steps = 0;

  const auto factor = [&]() {
    for (std::size_t bi = 0; bi < 3; ++bi)
      for (std::size_t bj = 0; bj < 3; ++bj) {
        const double w = -h * a_mat[bi][bj];
        for (std::size_t r = 0; r < N; ++r)
          for (std::size_t s = 0; s < N; ++s)
            newton_lu.a[(bi * N + r) * M + bj * N + s] = w * jac[r][s];
      }
    for (std::size_t i = 0; i < M; ++i) newton_lu.a[i * M + i] += 1.0;
    newton_lu.factor();
    const double g = gamma0 / h;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t s = 0; s < N; ++s) err_lu.a[r * N + s] = -jac[r][s];
    for (std::size_t r = 0; r < N; ++r) err_lu.a[r * N + r] += g;
    err_lu.factor();
    h_factored = h;
  };

  while (t1 - t > 4.0 * eps * std::max(std::abs(t), std::abs(t1))) {
    if (++n_steps > ctl.max_steps)
      throw IntegrationError("radau: step budget exhausted", t);
    h = std::min(h, t1 - t);
    const double h_min = std::max(16.0 * eps * std::abs(t), 1e-22 * std::max(span, 1.0));
    if (h < h_min) throw IntegrationError("radau: step size underflow", t);

    if (need_jacobian) {
      jacobian(t, y, jac);
      need_jacobian = false;
      need_factor = true;
    }
    if (need_factor || h != h_factored) factor();
    need_factor = false;

    // Stage predictor: extrapolate the previous collocation polynomial.
    if (have_dense) {
      for (std::size_t i = 0; i < 3; ++i) {
        const State<N> p = dense.eval(t + c_nodes[i] * h);
        for (std::size_t r = 0; r < N; ++r) zstage[i][r] = p[r] - y[r];
      }
    } else {
      for (auto& zi : zstage) zi.fill(0.0);
    }

    // Simplified Newton on the stage increments.
    bool converged = false;
    bool diverged = false;
    double dz_prev = -1.0, theta = 0.0;
    int iters = 0;
    std::array<State<N>, 3> fstage{};
    for (int it = 0; it < ctl.max_newton_iters; ++it) {
      ++iters;
      for (std::size_t i = 0; i < 3; ++i) {
        State<N> yi = y;
        for (std::size_t r = 0; r < N; ++r) yi[r] += zstage[i][r];
        rhs(t + c_nodes[i] * h, yi, fstage[i]);
      }
      std::array<double, M> g{};
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t r = 0; r < N; ++r) {
          double acc = -zstage[i][r];
          for (std::size_t j = 0; j < 3; ++j) acc += h * a_mat[i][j] * fstage[j][r];
          g[i * N + r] = acc;
        }
      newton_lu.solve(g);
      double dz = 0.0;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t r = 0; r < N; ++r) {
          zstage[i][r] += g[i * N + r];
          const double sc = ctl.abs_tol + ctl.rel_tol * std::abs(y[r]);
          const double q = g[i * N + r] / sc;
          dz += q * q;
        }
      dz = std::sqrt(dz / static_cast<double>(M));
      if (!std::isfinite(dz)) {
        diverged = true;
        break;
      }
      if (dz_prev >= 0.0) {
        theta = dz / dz_prev;
        if (theta >= 1.0) {
          diverged = true;
          break;
        }
        if (theta / (1.0 - theta) * dz <= fnewt) {
          converged = true;
          break;
        }
      } else if (dz <= 0.1 * fnewt) {
        converged = true;
        break;
      }
      dz_prev = dz;
    }

    if (!converged || diverged) {
      h *= 0.5;
      need_factor = true;
      if (theta > 0.0) need_jacobian = true;
      last_rejected = true;
      continue;
    }

    // Embedded error estimate, smoothed by (gamma0/h I - J)^-1.
    State<N> y1 = y;
    for (std::size_t r = 0; r < N; ++r) y1[r] += zstage[2][r];
    State<N> est;
    {
      std::array<double, N> tmp;
      for (std::size_t r = 0; r < N; ++r)
        tmp[r] = f0[r] +
                 (d1 * zstage[0][r] + d2 * zstage[1][r] + d3 * zstage[2][r]) / h;
      err_lu.solve(tmp);
      est = tmp;
    }
    State<N> ymax;
    for (std::size_t r = 0; r < N; ++r) ymax[r] = std::max(std::abs(y[r]), std::abs(y1[r]));
    double err = scaled_rms(est, ymax);
    if (err >= 1.0 && last_rejected) {
      // Re-estimate from the perturbed initial value (guards against an
      // estimate polluted by a stiff f0 right after a rejection).
      State<N> yp = y, fp;
      for (std::size_t r = 0; r < N; ++r) yp[r] += est[r];
      rhs(t, yp, fp);
      std::array<double, N> tmp;
      for (std::size_t r = 0; r < N; ++r)
        tmp[r] = fp[r] +
                 (d1 * zstage[0][r] + d2 * zstage[1][r] + d3 * zstage[2][r]) / h;
      err_lu.solve(tmp);
      err = scaled_rms(tmp, ymax);
    }

    const double it_damp = (2.0 * ctl.max_newton_iters + 1.0) /
                           (2.0 * ctl.max_newton_iters + iters);
    double fac = 0.9 * it_damp * std::pow(std::max(err, 1e-10), -0.25);

    if (err < 1.0) {
      // Accept.
      dense.t_begin = t;
      dense.h = h;
      dense.y_begin = y;
      dense.z = zstage;
      have_dense = true;
      on_step(dense, y1);
      t += h;
      y = y1;
      rhs(t, y, f0);

      if (h_acc > 0.0) {
        // Predictive (Gustafsson) controller, take the more cautious choice.
        const double fac_gus =
            0.9 * (h / h_acc) * std::pow(err_acc / (err * err), 0.25);
        fac = std::min(fac, fac_gus);
      }
      h_acc = h;
      err_acc = std::max(err, 1e-2);
      fac = std::clamp(fac, 0.125, 8.0);
      double h_new = std::min({h * fac, ctl.max_step, span});
      if (theta > 1e-3) need_jacobian = true;
      if (!need_jacobian && h_new >= h && h_new <= 1.2 * h) {
        h_new = h;  // keep the current factorization
      } else {
        need_factor = true;
      }
      h = h_new;
      last_rejected = false;
    } else {
      fac = std::clamp(fac, 0.125, 1.0);
      h *= std::min(fac, 0.9);
      need_factor = true;
      last_rejected = true;
    }
  }
  return y;
}

/// Convenience overload using the finite-difference Jacobian.
template <std::size_t N, class Rhs, class OnStep>
State<N> integrate_fd(Rhs&& rhs, double t0, double t1, const State<N>& y0,
                      const Controls& ctl, OnStep&& on_step) {
  NumericalJacobian<N, Rhs> jac{rhs};
  return integrate<N>(rhs, jac, t0, t1, y0, ctl, on_step);
}

}  // namespace cqdsim::radau
