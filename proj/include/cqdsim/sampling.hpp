#pragma once

#include <cstdint>

#include "cqdsim/core.hpp"

// Monte Carlo sampling of moment orientations. Streams are counter-based:
// the n-th draw of a given (seed, substream) pair is a pure function of
// (seed, substream, n), so ensembles are reproducible for any worker count
// and execution order.
namespace cqdsim::sampling {

namespace detail {
inline constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}
}  // namespace detail

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t substream)
      : seed_(seed), substream_(substream) {
    base_ = detail::mix64(seed + detail::golden);
    base_ = detail::mix64(base_ ^ detail::mix64(substream + 2 * detail::golden));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t substream() const { return substream_; }

  std::uint64_t next_u64() { return detail::mix64(base_ + (++counter_) * detail::golden); }

  /// Uniform draw in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::uint64_t substream_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// Inverse CDF of the isotropic polar distribution.
inline double isotropic_polar(double zeta) { return 2.0 * std::asin(std::sqrt(zeta)); }

/// Inverse CDF of the post-SG1 nuclear polar distribution, the exact inverse
/// of the CDF sin^4(theta/2).
inline double post_sg1_polar(double zeta) { return 2.0 * std::asin(std::pow(zeta, 0.25)); }

/// Uniform orientation on the sphere (oven ensemble).
inline PolarAzimuth sample_isotropic(RandomStream& stream) {
  const double polar = isotropic_polar(stream.next_unit());
  return {polar, two_pi * stream.next_unit()};
}

/// Nuclear-orientation density after SG1 collapses the electron moment:
/// (1 -+ cos polar) / 4 pi, with the minus sign for the branch collapsed to
/// +z (branch_up) and plus for the -z branch.
inline double post_sg1_pdf(double polar, bool branch_up) {
  if (polar < 0.0 || polar > pi) throw std::domain_error("post_sg1_pdf: polar outside [0, pi]");
  const double c = std::cos(polar);
  return (branch_up ? 1.0 - c : 1.0 + c) / (4.0 * pi);
}

/// Draw from the branch_up case of post_sg1_pdf.
inline PolarAzimuth sample_post_sg1(RandomStream& stream) {
  const double polar = post_sg1_polar(stream.next_unit());
  return {polar, two_pi * stream.next_unit()};
}

}  // namespace cqdsim::sampling
