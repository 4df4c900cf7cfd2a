#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "cqdsim/harness.hpp"

// JSON config file mirroring SweepConfig. Currents may be given either as an
// explicit array or as {"min", "max", "count", "spacing": "log"|"linear"}.
namespace cqdsim::harness {

inline SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_config: cannot open " + path, 0);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("load_config: " + std::string(e.what()), 0);
  }

  SweepConfig cfg;
  try {
    if (j.contains("currents")) {
      const auto& cur = j.at("currents");
      if (cur.is_array()) {
        cfg.currents = cur.get<std::vector<double>>();
      } else {
        const double lo = cur.at("min").get<double>();
        const double hi = cur.at("max").get<double>();
        const int count = cur.at("count").get<int>();
        const std::string spacing = cur.value("spacing", "log");
        if (spacing == "log") {
          cfg.currents = log_spaced_currents(lo, hi, count);
        } else if (spacing == "linear") {
          cfg.currents.resize(static_cast<std::size_t>(count));
          for (int i = 0; i < count; ++i)
            cfg.currents[static_cast<std::size_t>(i)] =
                lo + (hi - lo) * static_cast<double>(i) / (count - 1);
        } else {
          throw ParseError("load_config: unknown currents.spacing '" + spacing + "'", 0);
        }
      }
    } else {
      cfg.currents = default_current_grid();
    }
    cfg.atoms_per_current = j.value("atoms_per_current", cfg.atoms_per_current);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      cfg.geometry.z_a = g.value("z_a", cfg.geometry.z_a);
      cfg.geometry.d = g.value("d", cfg.geometry.d);
      cfg.geometry.v = g.value("v", cfg.geometry.v);
      cfg.geometry.B_r = g.value("B_r", cfg.geometry.B_r);
    }
    if (j.contains("ode")) {
      const auto& o = j.at("ode");
      cfg.ode.rel_tol = o.value("rel_tol", cfg.ode.rel_tol);
      cfg.ode.abs_tol = o.value("abs_tol", cfg.ode.abs_tol);
      cfg.ode.max_step = o.value("max_step", cfg.ode.max_step);
      cfg.ode.dense_output_step = o.value("dense_output_step", cfg.ode.dense_output_step);
    }
    cfg.averaging_window = j.value("averaging_window", cfg.averaging_window);
    cfg.output_path = j.value("output", cfg.output_path);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_config: " + std::string(e.what()), 0);
  }
  cfg.validate();
  return cfg;
}

}  // namespace cqdsim::harness
