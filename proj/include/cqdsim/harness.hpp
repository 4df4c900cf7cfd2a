#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cqdsim/analytic.hpp"
#include "cqdsim/collapse.hpp"
#include "cqdsim/core.hpp"
#include "cqdsim/dynamics.hpp"
#include "cqdsim/field.hpp"
#include "cqdsim/sampling.hpp"
#include "cqdsim/version.hpp"

// Sweep orchestration: current grids, parallel ensembles, reference-data
// ingestion, fit metrics and result emission. Emitted bytes are a pure
// function of (config, seed): substreams are keyed per atom and per current
// value, aggregation is order-independent, floats are printed at 12
// significant digits.
namespace cqdsim::harness {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct SweepConfig {
  std::vector<double> currents;     // A, strictly increasing
  int atoms_per_current = 15000;
  std::uint64_t seed = 0;
  ChamberGeometry geometry = ChamberGeometry::frisch_segre();
  PhysicalConstants constants = PhysicalConstants::potassium39();
  dynamics::OdeSettings ode{};
  double averaging_window = 2e-6;   // s
  std::string output_path = "results.csv";

  void validate() const {
    if (currents.empty()) throw std::domain_error("SweepConfig: empty current list");
    for (std::size_t i = 0; i < currents.size(); ++i) {
      if (!(currents[i] > 0.0))
        throw std::domain_error("SweepConfig: currents must be strictly positive");
      if (i > 0 && !(currents[i] > currents[i - 1]))
        throw std::domain_error("SweepConfig: currents must be sorted strictly ascending");
    }
    if (atoms_per_current < 1)
      throw std::domain_error("SweepConfig: atoms_per_current must be at least 1");
    if (!(averaging_window > 0.0))
      throw std::domain_error("SweepConfig: averaging_window must be positive");
    geometry.validate();
    constants.validate();
    ode.validate();
  }
};

/// Log-spaced grid over [lo, hi].
inline std::vector<double> log_spaced_currents(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi > lo) || count < 2)
    throw std::domain_error("log_spaced_currents: invalid range");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double ratio = hi / lo;
  for (int i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] =
        lo * std::pow(ratio, static_cast<double>(i) / (count - 1));
  out.back() = hi;
  return out;
}

/// 25 log-spaced currents over the published 0.01 A to 0.5 A range.
inline std::vector<double> default_current_grid() {
  return log_spaced_currents(0.01, 0.5, 25);
}

struct SweepRow {
  double current = 0.0;
  double w_num = 0.0;
  double w_num_stderr = 0.0;
  double w_ana = 0.0;
  int n_atoms = 0;   // atoms contributing to w_num
  int n_failed = 0;  // integration failures, excluded from w_num
  bool failed = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> r_squared_vs_reference;
  double wall_time_s = 0.0;  // informational; never emitted
  std::uint64_t seed = 0;
  int atoms_per_current = 0;
  dynamics::OdeSettings ode{};
  double averaging_window = 0.0;
};

struct ReferenceDataset {
  struct Row {
    double current = 0.0;
    double flip_fraction = 0.0;
  };
  std::vector<Row> rows;
};

namespace detail {

// Substreams are keyed on the current's bit pattern rather than its sweep
// index so removing one current leaves every other row bit-identical.
inline std::uint64_t atom_substream(double current, int atom_index) {
  return sampling::detail::mix64(std::bit_cast<std::uint64_t>(current)) +
         static_cast<std::uint64_t>(atom_index);
}

template <class Fn>
void parallel_for(int n, int n_threads, Fn&& fn) {
  if (n_threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n || failed.load()) break;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads - 1));
  for (int k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Deterministic per-atom pipeline: sample the post-SG1 nuclear orientation
/// and a uniform electron azimuth, integrate through the chamber from
/// theta_e = pi, apply the branching rule. Returns the outcome, or failure.
struct AtomResult {
  collapse::AtomOutcome outcome{};
  bool ok = false;
};

inline AtomResult simulate_atom(std::uint64_t seed, double current, int atom_index,
                                const ChamberGeometry& geom,
                                const PhysicalConstants& constants,
                                const dynamics::OdeSettings& ode,
                                double averaging_window) {
  sampling::RandomStream stream(seed, detail::atom_substream(current, atom_index));
  PolarAzimuth nuc = sampling::sample_post_sg1(stream);
  while (nuc.polar == 0.0) nuc = sampling::sample_post_sg1(stream);  // measure-zero redraw
  const double phi_e0 = two_pi * stream.next_unit();
  const MomentState init = MomentState::from_angles(pi, phi_e0, nuc.polar, nuc.azimuth);
  AtomResult r;
  try {
    const dynamics::TrajectoryResult traj =
        dynamics::integrate_atom(init, current, geom, constants, ode, averaging_window);
    r.outcome = {traj.theta_e_final, nuc.polar,
                 collapse::branch(traj.theta_e_final, nuc.polar)};
    r.ok = true;
  } catch (const dynamics::IntegrationError&) {
    r.ok = false;
  }
  return r;
}

/// Run the full sweep. Atoms within a current run in parallel across
/// `n_threads` workers (0 selects the hardware count); results are identical
/// for any worker count. A row is marked failed when more than 0.1% of its
/// atoms fail to integrate; failed atoms are excluded from the fraction.
inline SweepResult run_sweep(const SweepConfig& config, int n_threads = 0) {
  config.validate();
  if (n_threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    n_threads = hw > 0 ? static_cast<int>(hw) : 1;
  }
  const auto t_start = std::chrono::steady_clock::now();
  const HyperfineFields hf = derived_hyperfine_fields(config.constants);
  const analytic::ClosedFormCoefficients coeffs =
      analytic::coefficients(config.geometry, config.constants, hf);

  SweepResult result;
  result.seed = config.seed;
  result.atoms_per_current = config.atoms_per_current;
  result.ode = config.ode;
  result.averaging_window = config.averaging_window;
  result.rows.reserve(config.currents.size());

  const int n = config.atoms_per_current;
  std::vector<AtomResult> atoms(static_cast<std::size_t>(n));
  for (const double current : config.currents) {
    detail::parallel_for(n, n_threads, [&](int i) {
      atoms[static_cast<std::size_t>(i)] =
          simulate_atom(config.seed, current, i, config.geometry, config.constants,
                        config.ode, config.averaging_window);
    });
    SweepRow row;
    row.current = current;
    row.w_ana = analytic::w_analytic(current, coeffs);
    std::vector<collapse::AtomOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(n));
    for (const AtomResult& a : atoms) {
      if (a.ok)
        outcomes.push_back(a.outcome);
      else
        ++row.n_failed;
    }
    row.n_atoms = static_cast<int>(outcomes.size());
    row.failed = row.n_failed * 1000 > n || outcomes.empty();
    if (!outcomes.empty()) {
      const collapse::FlipFraction w = collapse::flip_fraction(outcomes);
      row.w_num = w.fraction;
      row.w_num_stderr = w.standard_error;
    } else {
      row.w_num = std::numeric_limits<double>::quiet_NaN();
      row.w_num_stderr = std::numeric_limits<double>::quiet_NaN();
    }
    result.rows.push_back(row);
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

/// Coefficient of determination of `model` against `data`, with the model
/// evaluated at the data currents (matched exactly, no interpolation).
inline double r_squared(const std::vector<std::pair<double, double>>& model,
                        const ReferenceDataset& data) {
  if (data.rows.size() < 2)
    throw std::domain_error("r_squared: need at least 2 reference points");
  double mean = 0.0;
  for (const auto& r : data.rows) mean += r.flip_fraction;
  mean /= static_cast<double>(data.rows.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& r : data.rows) {
    const double* w_model = nullptr;
    for (const auto& m : model) {
      if (std::abs(m.first - r.current) <= 1e-9 * std::max(1.0, std::abs(r.current))) {
        w_model = &m.second;
        break;
      }
    }
    if (w_model == nullptr)
      throw std::domain_error("r_squared: model not evaluated at reference current");
    ss_res += (*w_model - r.flip_fraction) * (*w_model - r.flip_fraction);
    ss_tot += (r.flip_fraction - mean) * (r.flip_fraction - mean);
  }
  if (ss_tot == 0.0) throw std::domain_error("r_squared: reference data has zero variance");
  return 1.0 - ss_res / ss_tot;
}

/// Two-column reference file: current in A, flip fraction. '#' lines and
/// blank lines are ignored; fields separated by a comma or whitespace.
inline ReferenceDataset load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_reference: cannot open " + path, 0);
  ReferenceDataset data;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    if (const auto hash = body.find('#'); hash != std::string::npos) body.resize(hash);
    for (char& ch : body)
      if (ch == ',' || ch == '\t' || ch == '\r') ch = ' ';
    std::istringstream fields(body);
    double current = 0.0, fraction = 0.0;
    if (!(fields >> current)) continue;  // blank or comment-only line
    std::string trailing;
    if (!(fields >> fraction) || (fields >> trailing)) {
      throw ParseError("load_reference: malformed row at line " + std::to_string(line_no),
                       line_no);
    }
    if (!(current > 0.0))
      throw ParseError("load_reference: nonpositive current at line " +
                           std::to_string(line_no),
                       line_no);
    if (!(fraction >= 0.0 && fraction <= 1.0))
      throw ParseError("load_reference: fraction outside [0, 1] at line " +
                           std::to_string(line_no),
                       line_no);
    for (const auto& r : data.rows)
      if (r.current == current)
        throw ParseError("load_reference: duplicate current at line " +
                             std::to_string(line_no),
                         line_no);
    data.rows.push_back({current, fraction});
  }
  if (data.rows.empty()) throw ParseError("load_reference: no data rows in " + path, line_no);
  std::sort(data.rows.begin(), data.rows.end(),
            [](const auto& a, const auto& b) { return a.current < b.current; });
  return data;
}

/// Fixed 12-significant-digit float formatting used for all emitted numbers.
inline std::string format_g12(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Render the results file: '#' metadata lines, one header, one row per
/// current. Byte output is deterministic for fixed inputs.
inline std::string render_results(const SweepResult& result) {
  std::ostringstream out;
  out << "# cqdsim sweep results\n";
  out << "# version: " << version << "\n";
  out << "# seed: " << result.seed << "\n";
  out << "# atoms_per_current: " << result.atoms_per_current << "\n";
  out << "# rel_tol: " << format_g12(result.ode.rel_tol) << "\n";
  out << "# abs_tol: " << format_g12(result.ode.abs_tol) << "\n";
  out << "# max_step: " << format_g12(result.ode.max_step) << "\n";
  out << "# dense_output_step: " << format_g12(result.ode.dense_output_step) << "\n";
  out << "# averaging_window: " << format_g12(result.averaging_window) << "\n";
  if (result.r_squared_vs_reference)
    out << "# r_squared_vs_reference: " << format_g12(*result.r_squared_vs_reference)
        << "\n";
  for (const SweepRow& row : result.rows)
    if (row.failed)
      out << "# failed_current: " << format_g12(row.current) << " (" << row.n_failed
          << " of " << row.n_failed + row.n_atoms << " atoms failed integration)\n";
  out << "current_A,W_num,W_num_stderr,W_ana,N\n";
  for (const SweepRow& row : result.rows)
    out << format_g12(row.current) << ',' << format_g12(row.w_num) << ','
        << format_g12(row.w_num_stderr) << ',' << format_g12(row.w_ana) << ','
        << row.n_atoms << "\n";
  return out.str();
}

inline void emit_results(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_results: cannot open " + path);
  out << render_results(result);
  if (!out) throw std::runtime_error("emit_results: write failed for " + path);
}

/// Parse a results file back into rows (used by the compare command and for
/// round-trip checks). Returns rows in file order.
inline std::vector<SweepRow> parse_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("parse_results: cannot open " + path, 0);
  std::vector<SweepRow> rows;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "current_A,W_num,W_num_stderr,W_ana,N")
        throw ParseError("parse_results: unexpected header at line " +
                             std::to_string(line_no),
                         line_no);
      header_seen = true;
      continue;
    }
    SweepRow row;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ws(line);
    std::string tok[5];
    if (!(ws >> tok[0] >> tok[1] >> tok[2] >> tok[3] >> tok[4]))
      throw ParseError("parse_results: malformed row at line " + std::to_string(line_no),
                       line_no);
    // strtod admits the nan/inf markers of failed rows, which stream
    // extraction does not.
    double* const fields[4] = {&row.current, &row.w_num, &row.w_num_stderr, &row.w_ana};
    for (int i = 0; i < 4; ++i) {
      char* end = nullptr;
      *fields[i] = std::strtod(tok[i].c_str(), &end);
      if (end == tok[i].c_str() || *end != '\0')
        throw ParseError("parse_results: malformed number at line " + std::to_string(line_no),
                         line_no);
    }
    try {
      row.n_atoms = std::stoi(tok[4]);
    } catch (const std::exception&) {
      throw ParseError("parse_results: malformed count at line " + std::to_string(line_no),
                       line_no);
    }
    rows.push_back(row);
  }
  if (!header_seen) throw ParseError("parse_results: missing header in " + path, line_no);
  return rows;
}

/// Emit (t, k) adiabaticity series per current over the chamber window;
/// infinities are written as "inf".
inline void adiabaticity_profile(const std::vector<double>& currents,
                                 const ChamberGeometry& geom,
                                 const PhysicalConstants& constants,
                                 const std::string& path, int samples_per_current = 2001) {
  if (currents.empty())
    throw std::domain_error("adiabaticity_profile: empty current list");
  for (const double c : currents)
    if (!(c > 0.0))
      throw std::domain_error("adiabaticity_profile: currents must be positive");
  if (samples_per_current < 2)
    throw std::domain_error("adiabaticity_profile: need at least 2 samples");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("adiabaticity_profile: cannot open " + path);
  out << "# cqdsim adiabaticity profile\n";
  out << "# version: " << version << "\n";
  out << "current_A,t_s,k\n";
  const double half = geom.half_transit_time();
  for (const double current : currents) {
    for (int i = 0; i < samples_per_current; ++i) {
      const double t =
          -half + 2.0 * half * static_cast<double>(i) / (samples_per_current - 1);
      out << format_g12(current) << ',' << format_g12(t) << ','
          << format_g12(field::adiabaticity(t, current, geom, constants)) << "\n";
    }
  }
  if (!out) throw std::runtime_error("adiabaticity_profile: write failed for " + path);
}

}  // namespace cqdsim::harness
