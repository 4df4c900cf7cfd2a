#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "cqdsim/collapse.hpp"

using namespace cqdsim;
using namespace cqdsim::collapse;
using Catch::Approx;

TEST_CASE("branching rule") {
  const double thn = 5.0 * pi / 8.0;
  CHECK(branch(0.1, thn) == 0);
  CHECK(branch(3.0, thn) == 1);
  CHECK(branch(thn, thn) == 1);  // fixed tie rule
  CHECK_THROWS_AS(branch(-0.1, thn), std::domain_error);
  CHECK_THROWS_AS(branch(0.1, 3.5), std::domain_error);
}

TEST_CASE("branch is monotone in the final angle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, pi);
  for (int i = 0; i < 1000; ++i) {
    const double thn = u(rng);
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    CHECK(branch(a, thn) <= branch(b, thn));
  }
}

TEST_CASE("ties are measure-zero under continuous sampling") {
  // The tie rule only matters on exact equality, which continuous draws do
  // not produce: zero collisions across a million pairs.
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0.0, pi);
  int ties = 0;
  for (int i = 0; i < 1'000'000; ++i) ties += (u(rng) == u(rng));
  CHECK(ties == 0);
}

TEST_CASE("flip fraction") {
  const auto mk = [](int b) { return AtomOutcome{1.0, 2.0, b}; };

  SECTION("all flipped") {
    const std::vector<AtomOutcome> o(10, mk(1));
    const auto w = flip_fraction(o);
    CHECK(w.fraction == 1.0);
    CHECK(w.standard_error == 0.0);
  }
  SECTION("none flipped") {
    const std::vector<AtomOutcome> o(10, mk(0));
    const auto w = flip_fraction(o);
    CHECK(w.fraction == 0.0);
    CHECK(w.standard_error == 0.0);
  }
  SECTION("three of ten") {
    std::vector<AtomOutcome> o(10, mk(0));
    o[1] = o[4] = o[8] = mk(1);
    const auto w = flip_fraction(o);
    CHECK(w.fraction == Approx(0.3));
    CHECK(w.standard_error == Approx(0.14491376746189438).epsilon(1e-12));
  }
  SECTION("empty list is a domain error") {
    CHECK_THROWS_AS(flip_fraction({}), std::domain_error);
  }
  SECTION("permutation invariance and range") {
    std::mt19937_64 rng(11);
    std::vector<AtomOutcome> o;
    for (int i = 0; i < 257; ++i) o.push_back(mk(rng() % 2 == 0));
    const double w0 = flip_fraction(o).fraction;
    CHECK(w0 >= 0.0);
    CHECK(w0 <= 1.0);
    std::shuffle(o.begin(), o.end(), rng);
    CHECK(flip_fraction(o).fraction == w0);
  }
}
