#pragma once

#include "vibrato/common.hpp"
#include "vibrato/design_field.hpp"
#include "vibrato/grid.hpp"
#include "vibrato/materials.hpp"
#include "vibrato/mma.hpp"
#include "vibrato/signal.hpp"
#include "vibrato/spectrum.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace vibrato {

/// Frequency interval in Hz, inclusive at both ends. Edges must sit on DFT
/// bins.
struct HzBand {
  double lo = 0.0;
  double hi = 0.0;
};

enum class InitialDesignType { Cosine, Empty, File };

/// One scenario: mesh, physics, time stepping, excitation, filter bands and
/// optimizer settings. Defaults are the paper-scale values.
struct ScenarioConfig {
  // mesh
  double h_e = 2e-3;
  int ny = 50;
  int inlet_elems = 50;
  int design_elems = 150;
  int outlet_elems = 50;

  MaterialParams materials;

  // time
  double dt = 2e-5;
  int steps = 1000;

  SignalSpec signal;

  double filter_radius = 8e-3;

  std::vector<HzBand> pass_bands = {{1000.0, 2500.0}};
  std::vector<HzBand> stop_bands = {{2550.0, 4000.0}};
  double stop_target = 1e-3;  // b; the pass target a is 1

  InitialDesignType initial_type = InitialDesignType::Cosine;
  InitialDesignParams initial;
  std::string initial_path;

  // optimizer
  int iterations = 400;
  MmaSettings mma;
  bool scale_by_initial = false;

  // output
  int snapshot_every = 50;
  bool dump_matrices = false;
  bool write_trace = false;

  double total_time() const { return steps * dt; }
  double delta_f() const { return 1.0 / total_time(); }

  DuctMesh make_mesh() const {
    return DuctMesh(inlet_elems, design_elems, outlet_elems, ny, h_e);
  }

  std::vector<BinRange> pass_bins() const { return to_bins(pass_bands); }
  std::vector<BinRange> stop_bins() const { return to_bins(stop_bands); }

  std::vector<BinRange> to_bins(const std::vector<HzBand>& bands) const {
    std::vector<BinRange> out;
    const double df = delta_f();
    for (const auto& band : bands) {
      const double blo = band.lo / df, bhi = band.hi / df;
      require(std::abs(blo - std::round(blo)) < 1e-9 &&
                  std::abs(bhi - std::round(bhi)) < 1e-9,
              "config: band edge not divisible by the bin width " + fmt_hz(df));
      BinRange r{static_cast<int>(std::round(blo)), static_cast<int>(std::round(bhi))};
      require(r.lo >= 0 && r.lo <= r.hi, "config: empty or negative band");
      require(r.hi <= steps / 2, "config: band exceeds the Nyquist bin");
      out.push_back(r);
    }
    return out;
  }

  void validate() const {
    require(dt > 0.0, "config: dt must be positive");
    require(steps >= 2, "config: need at least 2 time steps");
    require(h_e > 0.0, "config: element size must be positive");
    require(stop_target > 0.0, "config: stop target b must be positive");
    require(filter_radius >= 0.0, "config: filter radius must be >= 0");
    require(materials.alpha_void > 0.0, "config: contrast must be positive");
    const auto pass = pass_bins();
    const auto stop = stop_bins();
    for (const auto& p : pass)
      for (const auto& s : stop)
        require(s.hi < p.lo || s.lo > p.hi,
                "config: pass and stop bands overlap at the bin level");
  }

 private:
  static std::string fmt_hz(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
};

namespace detail {

using IniMap = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline IniMap parse_ini(const std::string& text) {
  IniMap map;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', "config: malformed section at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config: expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    require(!section.empty() && !key.empty(),
            "config: key outside a section at line " + std::to_string(lineno));
    map[section + "." + key] = trim(line.substr(eq + 1));
  }
  return map;
}

inline std::vector<HzBand> parse_bands(const std::string& text) {
  std::vector<HzBand> bands;
  if (trim(text).empty()) return bands;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    require(colon != std::string::npos, "config: band must be lo:hi, got '" + item + "'");
    bands.push_back({std::stod(trim(item.substr(0, colon))),
                     std::stod(trim(item.substr(colon + 1)))});
  }
  return bands;
}

inline std::string format_bands(const std::vector<HzBand>& bands) {
  std::string out;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    std::ostringstream os;
    os << bands[i].lo << ":" << bands[i].hi;
    out += os.str() + (i + 1 < bands.size() ? "," : "");
  }
  return out;
}

}  // namespace detail

inline std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "[mesh]\n";
  o << "h_e = " << c.h_e << "\n";
  o << "ny = " << c.ny << "\n";
  o << "inlet_elems = " << c.inlet_elems << "\n";
  o << "design_elems = " << c.design_elems << "\n";
  o << "outlet_elems = " << c.outlet_elems << "\n";
  o << "\n[materials]\n";
  o << "E_s = " << c.materials.E_s << "\n";
  o << "nu = " << c.materials.nu << "\n";
  o << "rho_s = " << c.materials.rho_s << "\n";
  o << "c_a = " << c.materials.c_a << "\n";
  o << "rho_a = " << c.materials.rho_a << "\n";
  o << "alpha_void = " << c.materials.alpha_void << "\n";
  o << "zeta = " << c.materials.zeta << "\n";
  o << "f1_hz = " << c.materials.omega1 / (2.0 * M_PI) << "\n";
  o << "f2_hz = " << c.materials.omega2 / (2.0 * M_PI) << "\n";
  o << "\n[time]\n";
  o << "dt = " << c.dt << "\n";
  o << "steps = " << c.steps << "\n";
  o << "\n[signal]\n";
  o << "type = "
    << (c.signal.type == SignalType::WhiteNoise
            ? "white"
            : (c.signal.type == SignalType::Sine ? "sine" : "file"))
    << "\n";
  o << "seed = " << c.signal.seed << "\n";
  o << "amplitude = " << c.signal.amplitude << "\n";
  o << "frequency_hz = " << c.signal.frequency_hz << "\n";
  o << "path = " << c.signal.path << "\n";
  o << "\n[filter]\n";
  o << "radius = " << c.filter_radius << "\n";
  o << "\n[bands]\n";
  o << "pass = " << detail::format_bands(c.pass_bands) << "\n";
  o << "stop = " << detail::format_bands(c.stop_bands) << "\n";
  o << "stop_target = " << c.stop_target << "\n";
  o << "\n[initial]\n";
  o << "type = "
    << (c.initial_type == InitialDesignType::Cosine
            ? "cosine"
            : (c.initial_type == InitialDesignType::Empty ? "empty" : "file"))
    << "\n";
  o << "r1 = " << c.initial.r1 << "\n";
  o << "r2 = " << c.initial.r2 << "\n";
  o << "lx = " << c.initial.lx << "\n";
  o << "ly = " << c.initial.ly << "\n";
  o << "threshold = " << c.initial.threshold << "\n";
  o << "path = " << c.initial_path << "\n";
  o << "\n[mma]\n";
  o << "iterations = " << c.iterations << "\n";
  o << "asy_init = " << c.mma.asy_init << "\n";
  o << "asy_decr = " << c.mma.asy_decr << "\n";
  o << "asy_incr = " << c.mma.asy_incr << "\n";
  o << "penalty_c = " << c.mma.constraint_c << "\n";
  o << "move_limit = " << c.mma.move_limit << "\n";
  o << "scale_by_initial = " << (c.scale_by_initial ? 1 : 0) << "\n";
  o << "\n[output]\n";
  o << "snapshot_every = " << c.snapshot_every << "\n";
  o << "dump_matrices = " << (c.dump_matrices ? 1 : 0) << "\n";
  o << "write_trace = " << (c.write_trace ? 1 : 0) << "\n";
  return o.str();
}

inline ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig c;
  auto map = detail::parse_ini(text);
  auto take = [&](const std::string& key) -> std::string* {
    auto it = map.find(key);
    return it == map.end() ? nullptr : &it->second;
  };
  auto get_d = [&](const std::string& key, double& dst) {
    if (auto* v = take(key)) {
      dst = std::stod(*v);
      map.erase(key);
    }
  };
  auto get_i = [&](const std::string& key, int& dst) {
    if (auto* v = take(key)) {
      dst = std::stoi(*v);
      map.erase(key);
    }
  };
  auto get_b = [&](const std::string& key, bool& dst) {
    if (auto* v = take(key)) {
      dst = (*v == "1" || *v == "true" || *v == "yes");
      map.erase(key);
    }
  };
  auto get_s = [&](const std::string& key, std::string& dst) {
    if (auto* v = take(key)) {
      dst = *v;
      map.erase(key);
    }
  };

  get_d("mesh.h_e", c.h_e);
  get_i("mesh.ny", c.ny);
  get_i("mesh.inlet_elems", c.inlet_elems);
  get_i("mesh.design_elems", c.design_elems);
  get_i("mesh.outlet_elems", c.outlet_elems);

  get_d("materials.E_s", c.materials.E_s);
  get_d("materials.nu", c.materials.nu);
  get_d("materials.rho_s", c.materials.rho_s);
  get_d("materials.c_a", c.materials.c_a);
  get_d("materials.rho_a", c.materials.rho_a);
  get_d("materials.alpha_void", c.materials.alpha_void);
  get_d("materials.zeta", c.materials.zeta);
  double f1 = c.materials.omega1 / (2.0 * M_PI), f2 = c.materials.omega2 / (2.0 * M_PI);
  get_d("materials.f1_hz", f1);
  get_d("materials.f2_hz", f2);
  c.materials.omega1 = 2.0 * M_PI * f1;
  c.materials.omega2 = 2.0 * M_PI * f2;

  get_d("time.dt", c.dt);
  get_i("time.steps", c.steps);

  std::string sigtype;
  get_s("signal.type", sigtype);
  if (!sigtype.empty()) {
    if (sigtype == "white") c.signal.type = SignalType::WhiteNoise;
    else if (sigtype == "sine") c.signal.type = SignalType::Sine;
    else if (sigtype == "file") c.signal.type = SignalType::File;
    else require(false, "config: unknown signal type '" + sigtype + "'");
  }
  if (auto* v = take("signal.seed")) {
    c.signal.seed = std::stoull(*v);
    map.erase("signal.seed");
  }
  get_d("signal.amplitude", c.signal.amplitude);
  get_d("signal.frequency_hz", c.signal.frequency_hz);
  get_s("signal.path", c.signal.path);

  get_d("filter.radius", c.filter_radius);

  if (auto* v = take("bands.pass")) {
    c.pass_bands = detail::parse_bands(*v);
    map.erase("bands.pass");
  }
  if (auto* v = take("bands.stop")) {
    c.stop_bands = detail::parse_bands(*v);
    map.erase("bands.stop");
  }
  get_d("bands.stop_target", c.stop_target);

  std::string inittype;
  get_s("initial.type", inittype);
  if (!inittype.empty()) {
    if (inittype == "cosine") c.initial_type = InitialDesignType::Cosine;
    else if (inittype == "empty") c.initial_type = InitialDesignType::Empty;
    else if (inittype == "file") c.initial_type = InitialDesignType::File;
    else require(false, "config: unknown initial design type '" + inittype + "'");
  }
  get_i("initial.r1", c.initial.r1);
  get_i("initial.r2", c.initial.r2);
  get_d("initial.lx", c.initial.lx);
  get_d("initial.ly", c.initial.ly);
  get_d("initial.threshold", c.initial.threshold);
  get_s("initial.path", c.initial_path);

  get_i("mma.iterations", c.iterations);
  get_d("mma.asy_init", c.mma.asy_init);
  get_d("mma.asy_decr", c.mma.asy_decr);
  get_d("mma.asy_incr", c.mma.asy_incr);
  get_d("mma.penalty_c", c.mma.constraint_c);
  get_d("mma.move_limit", c.mma.move_limit);
  get_b("mma.scale_by_initial", c.scale_by_initial);

  get_i("output.snapshot_every", c.snapshot_every);
  get_b("output.dump_matrices", c.dump_matrices);
  get_b("output.write_trace", c.write_trace);

  if (!map.empty())
    require(false, "config: unknown key '" + map.begin()->first + "'");
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Built-in scenarios. The *-paper presets use the full 12500-element setup;
/// the *-coarse presets are desk-scale (30x15 elements, 200 steps, 250 Hz
/// bins) with band edges snapped to bins.
inline ScenarioConfig preset_config(const std::string& name) {
  ScenarioConfig c;  // defaults are the paper low-pass setup
  auto coarse_mesh = [&]() {
    c.h_e = 1.0 / 150.0;
    c.ny = 15;
    c.inlet_elems = 6;
    c.design_elems = 18;
    c.outlet_elems = 6;
    c.steps = 200;
    c.iterations = 100;
    c.snapshot_every = 25;
  };

  if (name == "lowpass-paper") {
    // defaults
  } else if (name == "highpass-paper") {
    c.pass_bands = {{2500.0, 4000.0}};
    c.stop_bands = {{1000.0, 2450.0}};
  } else if (name == "bandpass-paper") {
    c.pass_bands = {{2500.0, 4000.0}};
    c.stop_bands = {{1000.0, 2450.0}, {4050.0, 5500.0}};
    c.iterations = 800;
  } else if (name == "bandstop-paper") {
    c.pass_bands = {{1000.0, 2450.0}, {4050.0, 5500.0}};
    c.stop_bands = {{2500.0, 4000.0}};
    c.iterations = 800;
  } else if (name == "lowpass-validation") {
    c.pass_bands = {{500.0, 2000.0}};
    c.stop_bands = {{2050.0, 3500.0}};
    c.stop_target = 1e-4;
  } else if (name == "lowpass-coarse") {
    coarse_mesh();
    c.pass_bands = {{1000.0, 2500.0}};
    c.stop_bands = {{2750.0, 4000.0}};
  } else if (name == "highpass-coarse") {
    coarse_mesh();
    c.pass_bands = {{2750.0, 4000.0}};
    c.stop_bands = {{1000.0, 2500.0}};
  } else if (name == "empty-coarse") {
    coarse_mesh();
    c.pass_bands = {{1000.0, 2500.0}};
    c.stop_bands = {{2750.0, 4000.0}};
    c.initial_type = InitialDesignType::Empty;
    c.iterations = 0;
  } else if (name == "transport") {
    c.h_e = 0.01;
    c.ny = 10;
    c.inlet_elems = 10;
    c.design_elems = 30;
    c.outlet_elems = 10;
    c.steps = 200;
    c.filter_radius = 0.0;
    c.signal.type = SignalType::Sine;
    c.signal.frequency_hz = 2000.0;
    c.pass_bands.clear();
    c.stop_bands.clear();
    c.initial_type = InitialDesignType::Empty;
    c.iterations = 0;
    c.write_trace = true;
  } else {
    require(false, "unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

inline std::uint64_t config_hash(const ScenarioConfig& c) {
  return fnv1a64(serialize_config(c));
}

/// Hash of everything the baseline run depends on (mesh, physics, time grid
/// and excitation); bands, filter and optimizer settings do not enter.
inline std::uint64_t baseline_key(const ScenarioConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << c.h_e << "|" << c.ny << "|" << c.inlet_elems << "|" << c.design_elems << "|"
    << c.outlet_elems << "|" << c.materials.E_s << "|" << c.materials.nu << "|"
    << c.materials.rho_s << "|" << c.materials.c_a << "|" << c.materials.rho_a << "|"
    << c.materials.alpha_void << "|" << c.materials.zeta << "|" << c.materials.omega1
    << "|" << c.materials.omega2 << "|" << c.dt << "|" << c.steps << "|"
    << static_cast<int>(c.signal.type) << "|" << c.signal.seed << "|" << c.signal.amplitude
    << "|" << c.signal.frequency_hz << "|" << c.signal.path;
  return fnv1a64(o.str());
}

}  // namespace vibrato
