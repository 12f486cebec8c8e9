#include "vibrato/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset = "lowpass-coarse";
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int iterations = -1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "scenario config file (ini)");
  cmd->add_option("--preset", opts.preset, "built-in scenario preset");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "input signal seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--iterations", opts.iterations, "override iteration cap");
  cmd->add_option("--threads", opts.threads, "worker threads for element loops");
}

vibrato::ScenarioConfig make_config(const CommonOpts& opts) {
  vibrato::ScenarioConfig cfg = opts.config_path.empty()
                                    ? vibrato::preset_config(opts.preset)
                                    : vibrato::load_config(opts.config_path);
  if (opts.seed_set) cfg.signal.seed = opts.seed;
  if (opts.iterations >= 0) cfg.iterations = opts.iterations;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transient vibroacoustic simulation and acoustic filter optimization"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string design_path;
  int gv_count = 20;
  double gv_step = 1e-6;

  auto* simulate = app.add_subcommand(
      "simulate", "forward transient solve of a design; writes transmission reports");
  add_common(simulate, opts);
  simulate->add_option("--design", design_path, "design snapshot (point-scalar vtk of s)");

  auto* optimize =
      app.add_subcommand("optimize", "run the fixed-iteration filter optimization");
  add_common(optimize, opts);

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "compare adjoint gradients against central finite differences");
  add_common(gradcheck, opts);
  gradcheck->add_option("--vars", gv_count, "number of random design variables");
  gradcheck->add_option("--step", gv_step, "finite difference step");

  auto* harmonic = app.add_subcommand(
      "harmonic", "time-harmonic transmission sweep over the band frequencies");
  add_common(harmonic, opts);
  harmonic->add_option("--design", design_path, "design snapshot (point-scalar vtk of s)");

  auto* baseline =
      app.add_subcommand("baseline", "compute and cache the empty-duct baseline");
  add_common(baseline, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    const vibrato::ScenarioConfig cfg = make_config(opts);

    auto design_from_file = [&](vibrato::Pipeline& pipe) -> vibrato::Vector {
      if (design_path.empty()) return pipe.initial_design_vector();
      const vibrato::Vector nodal =
          vibrato::read_structured_scalars(design_path, pipe.mesh());
      vibrato::Vector s(pipe.mesh().num_design_nodes());
      const auto& dn = pipe.mesh().design_nodes();
      for (std::size_t k = 0; k < dn.size(); ++k) s[k] = nodal[dn[k]];
      return s;
    };

    if (simulate->parsed()) {
      vibrato::Pipeline pipe(cfg, opts.out, opts.threads);
      vibrato::Vector s = design_from_file(pipe);
      auto cfg2 = cfg;
      cfg2.iterations = 0;
      vibrato::run_scenario(cfg2, opts.out, opts.threads, false);
      auto fr = pipe.analyze(pipe.chain().physical_field(s));
      std::cout << "phi1 = " << fr->phi1 << "\nphi2 = " << fr->phi2 << "\n";
    } else if (optimize->parsed()) {
      vibrato::run_scenario(cfg, opts.out, opts.threads, true);
      std::cout << "artifacts written to " << opts.out << "\n";
    } else if (gradcheck->parsed()) {
      vibrato::Pipeline pipe(cfg, opts.out, opts.threads);
      const auto rows = pipe.fd_gradient_check(gv_count, gv_step);
      vibrato::CsvWriter csv({"variable", "adjoint", "fd", "rel_error"});
      double worst = 0.0;
      for (const auto& r : rows) {
        csv.row({static_cast<double>(r.variable), r.adjoint, r.fd, r.rel_error});
        worst = std::max(worst, r.rel_error);
      }
      csv.save(opts.out + "/fd_check.csv");
      std::cout << "max relative error over " << rows.size() << " variables: " << worst
                << "\n";
    } else if (harmonic->parsed()) {
      vibrato::Pipeline pipe(cfg, opts.out, opts.threads);
      vibrato::Vector s = design_from_file(pipe);
      auto fr = pipe.analyze(pipe.chain().physical_field(s));
      const auto freqs = pipe.band_frequencies();
      const vibrato::Vector sh =
          pipe.harmonic_transmission(pipe.chain().physical_field(s), freqs);
      vibrato::CsvWriter csv({"f_hz", "S_transient", "S_harmonic"});
      for (std::size_t i = 0; i < freqs.size(); ++i) {
        const int bin = static_cast<int>(std::round(freqs[i] / cfg.delta_f()));
        csv.row({freqs[i], fr->S[bin], sh[static_cast<Eigen::Index>(i)]});
      }
      csv.save(opts.out + "/harmonic.csv");
      std::cout << "harmonic sweep written to " << opts.out << "/harmonic.csv\n";
    } else if (baseline->parsed()) {
      vibrato::Pipeline pipe(cfg, opts.out, opts.threads);
      pipe.baseline_trace();
      std::cout << "baseline cached under " << opts.out << "/cache\n";
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
