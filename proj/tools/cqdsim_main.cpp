// Command-line front end: current sweeps, the closed-form curve,
// adiabaticity profiles, and comparison against reference data.
//
// Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 numerical
// failure threshold exceeded.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cqdsim/config.hpp"
#include "cqdsim/harness.hpp"

namespace {

using namespace cqdsim;

struct CommonOpts {
  std::string config_path;
  std::vector<double> currents;
  int atoms = -1;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string reference;
  double rel_tol = -1.0;
  double abs_tol = -1.0;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_sim_opts) {
  cmd->add_option("--config", o.config_path, "JSON config file mirroring the sweep setup");
  cmd->add_option("--currents", o.currents, "explicit wire currents in A")
      ->delimiter(',');
  cmd->add_option("--out", o.out, "output file path");
  if (with_sim_opts) {
    cmd->add_option("--atoms", o.atoms, "atoms per current");
    cmd->add_option("--seed", o.seed, "ensemble seed");
    cmd->add_option("--reference", o.reference, "reference dataset (current, fraction)");
    cmd->add_option("--rel-tol", o.rel_tol, "integrator relative tolerance");
    cmd->add_option("--abs-tol", o.abs_tol, "integrator absolute tolerance");
    cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
  }
}

harness::SweepConfig build_config(const CommonOpts& o) {
  harness::SweepConfig cfg;
  if (!o.config_path.empty()) cfg = harness::load_config(o.config_path);
  if (!o.currents.empty()) cfg.currents = o.currents;
  if (cfg.currents.empty()) cfg.currents = harness::default_current_grid();
  if (o.atoms > 0) cfg.atoms_per_current = o.atoms;
  if (o.seed) cfg.seed = *o.seed;
  if (o.rel_tol > 0.0) cfg.ode.rel_tol = o.rel_tol;
  if (o.abs_tol > 0.0) cfg.ode.abs_tol = o.abs_tol;
  if (!o.out.empty()) cfg.output_path = o.out;
  return cfg;
}

int cmd_simulate(const CommonOpts& o) {
  harness::SweepConfig cfg = build_config(o);
  std::optional<harness::ReferenceDataset> ref;
  if (!o.reference.empty()) {
    ref = harness::load_reference(o.reference);
    if (o.currents.empty() && o.config_path.empty()) {
      cfg.currents.clear();
      for (const auto& r : ref->rows) cfg.currents.push_back(r.current);
    }
  }
  cfg.validate();

  harness::SweepResult result = harness::run_sweep(cfg, o.threads);
  if (ref) {
    std::vector<std::pair<double, double>> model;
    for (const auto& row : result.rows) model.emplace_back(row.current, row.w_num);
    result.r_squared_vs_reference = harness::r_squared(model, *ref);
  }
  harness::emit_results(result, cfg.output_path);

  std::cerr << "simulated " << result.rows.size() << " currents x "
            << cfg.atoms_per_current << " atoms in " << result.wall_time_s << " s\n";
  if (result.r_squared_vs_reference)
    std::cout << "R_squared_vs_reference: "
              << harness::format_g12(*result.r_squared_vs_reference) << "\n";
  std::cout << "wrote " << cfg.output_path << "\n";
  for (const auto& row : result.rows)
    if (row.failed) {
      std::cerr << "error: current " << row.current << " exceeded the failure threshold ("
                << row.n_failed << " failed atoms)\n";
      return 3;
    }
  return 0;
}

int cmd_analytic(const CommonOpts& o) {
  harness::SweepConfig cfg = build_config(o);
  cfg.validate();
  const auto hf = derived_hyperfine_fields(cfg.constants);
  const auto coeffs = analytic::coefficients(cfg.geometry, cfg.constants, hf);
  const std::string path = o.out.empty() ? "analytic.csv" : o.out;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# cqdsim closed-form flip fraction\n";
  out << "# version: " << version << "\n";
  out << "# c_r0: " << harness::format_g12(coeffs.c_r0) << "\n";
  out << "# c_rs: " << harness::format_g12(coeffs.c_rs) << "\n";
  out << "# c_rr: " << harness::format_g12(coeffs.c_rr) << "\n";
  out << "current_A,W_ana\n";
  for (const double I : cfg.currents)
    out << harness::format_g12(I) << ',' << harness::format_g12(analytic::w_analytic(I, coeffs))
        << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_adiabaticity(const CommonOpts& o, int samples) {
  harness::SweepConfig cfg = build_config(o);
  const std::string path = o.out.empty() ? "adiabaticity.csv" : o.out;
  harness::adiabaticity_profile(cfg.currents, cfg.geometry, cfg.constants, path, samples);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_compare(const std::string& results_path, const std::string& reference_path,
                const std::string& out_path) {
  const auto rows = harness::parse_results(results_path);
  const auto ref = harness::load_reference(reference_path);
  std::vector<std::pair<double, double>> num, ana;
  for (const auto& r : rows) {
    num.emplace_back(r.current, r.w_num);
    ana.emplace_back(r.current, r.w_ana);
  }
  const double r2_num = harness::r_squared(num, ref);
  const double r2_ana = harness::r_squared(ana, ref);
  std::ostringstream report;
  report << "# cqdsim comparison report\n";
  report << "# results: " << results_path << "\n";
  report << "# reference: " << reference_path << "\n";
  report << "metric,value\n";
  report << "R_squared_num," << harness::format_g12(r2_num) << "\n";
  report << "R_squared_ana," << harness::format_g12(r2_ana) << "\n";
  std::cout << report.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << report.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulator of spin flips in the Frisch-Segre "
               "multi-stage Stern-Gerlach experiment"};
  app.require_subcommand(1);

  CommonOpts sim_opts, ana_opts, adb_opts;
  int adb_samples = 2001;
  std::string cmp_results, cmp_reference, cmp_out;

  CLI::App* sim = app.add_subcommand("simulate", "run a Monte Carlo sweep over wire currents");
  add_common(sim, sim_opts, true);

  CLI::App* ana = app.add_subcommand("analytic", "emit the closed-form flip-fraction curve");
  add_common(ana, ana_opts, false);

  CLI::App* adb = app.add_subcommand("adiabaticity", "emit adiabaticity profiles along the beam");
  add_common(adb, adb_opts, false);
  adb->add_option("--samples", adb_samples, "samples per current");

  CLI::App* cmp = app.add_subcommand("compare", "coefficient of determination against reference data");
  cmp->add_option("--results", cmp_results, "results file from 'simulate'")->required();
  cmp->add_option("--reference", cmp_reference, "reference dataset")->required();
  cmp->add_option("--out", cmp_out, "write the report here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_opts);
    if (ana->parsed()) return cmd_analytic(ana_opts);
    if (adb->parsed()) return cmd_adiabaticity(adb_opts, adb_samples);
    if (cmp->parsed()) return cmd_compare(cmp_results, cmp_reference, cmp_out);
  } catch (const harness::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const radau::IntegrationError& e) {
    std::cerr << "error: " << e.what() << " at t = " << e.failure_time() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
