#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cqdsim/core.hpp"

// Branching rule applied at the second Stern-Gerlach stage and ensemble
// flip-fraction statistics.
namespace cqdsim::collapse {

/// branch 0: detected polar angle 0 (no flip); branch 1: detected polar
/// angle pi (flip).
struct AtomOutcome {
  double theta_e_final = 0.0;
  double theta_n0 = 0.0;
  int branch = 0;
};

/// Compare the final electron polar angle against the initial nuclear polar
/// angle. Ties map to branch 1; equality is a measure-zero event under
/// continuous sampling and the rule is fixed for determinism.
inline int branch(double theta_e_final, double theta_n0) {
  if (!(theta_e_final >= 0.0 && theta_e_final <= pi))
    throw std::domain_error("branch: theta_e_final outside [0, pi]");
  if (!(theta_n0 >= 0.0 && theta_n0 <= pi))
    throw std::domain_error("branch: theta_n0 outside [0, pi]");
  return theta_e_final < theta_n0 ? 0 : 1;
}

struct FlipFraction {
  double fraction = 0.0;
  double standard_error = 0.0;
};

/// Fraction of branch-1 outcomes with its binomial standard error.
inline FlipFraction flip_fraction(const std::vector<AtomOutcome>& outcomes) {
  if (outcomes.empty()) throw std::domain_error("flip_fraction: empty outcome list");
  std::size_t flips = 0;
  for (const AtomOutcome& o : outcomes) flips += (o.branch == 1);
  const double n = static_cast<double>(outcomes.size());
  const double w = static_cast<double>(flips) / n;
  return {w, std::sqrt(w * (1.0 - w) / n)};
}

}  // namespace cqdsim::collapse
