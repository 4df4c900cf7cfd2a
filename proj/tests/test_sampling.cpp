#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cqdsim/sampling.hpp"

using namespace cqdsim;
using namespace cqdsim::sampling;
using Catch::Approx;

TEST_CASE("inverse-CDF mappings at the boundaries") {
  CHECK(isotropic_polar(0.0) == 0.0);
  CHECK(isotropic_polar(1.0) == Approx(pi));
  CHECK(post_sg1_polar(0.0) == 0.0);
  CHECK(post_sg1_polar(1.0) == Approx(pi));
}

TEST_CASE("post-SG1 mapping is the exact inverse of sin^4(theta/2)") {
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double zeta = (i + 0.5) / 1000.0;
    const double th = post_sg1_polar(zeta);
    const double s = std::sin(th / 2);
    worst = std::max(worst, std::abs(zeta - s * s * s * s));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("post-SG1 density values and normalization") {
  CHECK(post_sg1_pdf(0.0, true) == 0.0);
  CHECK(post_sg1_pdf(pi, true) == Approx(1.0 / two_pi));
  CHECK(post_sg1_pdf(0.0, false) == Approx(1.0 / two_pi));
  CHECK_THROWS_AS(post_sg1_pdf(-0.1, true), std::domain_error);
  CHECK_THROWS_AS(post_sg1_pdf(pi + 0.1, true), std::domain_error);

  SECTION("integrates to one over the sphere (both branches)") {
    // Simpson quadrature of pdf(theta) sin(theta) dtheta, times 2 pi.
    for (const bool up : {true, false}) {
      const int n = 20000;
      const double h = pi / n;
      double acc = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double th = i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * post_sg1_pdf(th, up) * std::sin(th);
      }
      acc *= h / 3.0 * two_pi;
      CHECK(acc == Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("streams are counter-based and order-independent") {
  RandomStream a(42, 7);
  RandomStream b(42, 7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  SECTION("different substreams differ") {
    RandomStream c(42, 8);
    int same = 0;
    RandomStream a2(42, 7);
    for (int i = 0; i < 64; ++i) same += (a2.next_u64() == c.next_u64());
    CHECK(same == 0);
  }

  SECTION("draw sequence is unaffected by other streams in flight") {
    RandomStream x(1, 1), y(1, 2);
    std::vector<double> interleaved;
    for (int i = 0; i < 10; ++i) {
      interleaved.push_back(x.next_unit());
      (void)y.next_unit();
    }
    RandomStream x2(1, 1);
    for (int i = 0; i < 10; ++i) REQUIRE(interleaved[i] == x2.next_unit());
  }

  SECTION("units are in [0,1)") {
    RandomStream s(987654321, 1234);
    for (int i = 0; i < 100000; ++i) {
      const double u = s.next_unit();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
    }
  }
}

TEST_CASE("isotropic ensemble moments at one million draws") {
  RandomStream s(42, 0);
  const int n = 1'000'000;
  double sum_cos = 0.0, sum_th = 0.0;
  for (int i = 0; i < n; ++i) {
    const PolarAzimuth pa = sample_isotropic(s);
    sum_cos += std::cos(pa.polar);
    sum_th += pa.polar;
  }
  CHECK(sum_cos / n == Approx(0.0).margin(3e-3));
  CHECK(sum_th / n == Approx(pi / 2).margin(3e-3));
}

TEST_CASE("post-SG1 ensemble at one million draws") {
  RandomStream s(42, 1);
  const int n = 1'000'000;
  std::vector<double> polar(n);
  double sum_cos = 0.0, sum_th = 0.0;
  std::vector<int> az_bins(64, 0);
  for (int i = 0; i < n; ++i) {
    const PolarAzimuth pa = sample_post_sg1(s);
    polar[static_cast<std::size_t>(i)] = pa.polar;
    sum_cos += std::cos(pa.polar);
    sum_th += pa.polar;
    ++az_bins[static_cast<std::size_t>(std::min(63.0, pa.azimuth / two_pi * 64.0))];
  }

  SECTION("mean polar angle and mean cosine") {
    CHECK(sum_th / n == Approx(5.0 * pi / 8.0).margin(3e-3));
    CHECK(sum_cos / n == Approx(-1.0 / 3.0).margin(3e-3));
  }

  SECTION("Kolmogorov-Smirnov against sin^4(theta/2)") {
    std::sort(polar.begin(), polar.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s2 = std::sin(polar[static_cast<std::size_t>(i)] / 2);
      const double cdf = s2 * s2 * s2 * s2;
      d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
      d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    CHECK(d < 2e-3);
  }

  SECTION("azimuth uniformity, chi-square over 64 bins") {
    const double expected = static_cast<double>(n) / 64.0;
    double chi2 = 0.0;
    for (const int c : az_bins) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 103.44237731987324);  // 0.999 quantile, 63 dof
  }
}
