#pragma once

#include "vibrato/adjoint.hpp"
#include "vibrato/assembly.hpp"
#include "vibrato/common.hpp"
#include "vibrato/config.hpp"
#include "vibrato/design_field.hpp"
#include "vibrato/grid.hpp"
#include "vibrato/io.hpp"
#include "vibrato/linear_solver.hpp"
#include "vibrato/newmark.hpp"
#include "vibrato/signal.hpp"
#include "vibrato/spectrum.hpp"

#include <Eigen/SparseLU>

#include <complex>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace vibrato {

/// One full design evaluation: geometry, matrices, transient history and the
/// windowed outlet spectrum. Heap-held so the internal references stay
/// stable.
struct ForwardResult {
  Vector sbar;
  Discretization disc;
  std::unique_ptr<SystemMatrices> sys;
  std::unique_ptr<TransientSolver> solver;
  StateHistory hist;
  ComplexVector spec;  // windowed outlet spectrum, length nsteps
  Vector S;            // transmission per bin (empty until baseline known)
  double phi1 = 0.0, phi2 = 0.0;
};

/// Scenario driver: owns the mesh, the design chain, the excitation and the
/// cached baseline, and provides forward solves, adjoint gradients, the
/// optimization loop, the FD gradient check and the time-harmonic
/// cross-check.
class Pipeline {
 public:
  Pipeline(const ScenarioConfig& cfg, std::string out_dir, int nthreads = 1)
      : cfg_(cfg),
        mesh_(cfg.make_mesh()),
        chain_(mesh_, cfg.filter_radius),
        out_dir_(std::move(out_dir)),
        nthreads_(nthreads) {
    cfg_.validate();
    nm_.dt = cfg_.dt;
    pin_ = sample_signal(cfg_.signal, cfg_.steps, cfg_.dt);
    dpin_ = time_derivative(pin_, cfg_.dt);
    ensure_dir(out_dir_);
  }

  const ScenarioConfig& config() const { return cfg_; }
  const DuctMesh& mesh() const { return mesh_; }
  const DesignChain& chain() const { return chain_; }
  const NewmarkParams& newmark() const { return nm_; }
  const Vector& input_signal() const { return pin_; }

  Vector initial_design_vector() const {
    switch (cfg_.initial_type) {
      case InitialDesignType::Cosine: return initial_design(mesh_, cfg_.initial);
      case InitialDesignType::Empty: return Vector::Zero(mesh_.num_design_nodes());
      case InitialDesignType::File: {
        const Vector nodal = read_structured_scalars(cfg_.initial_path, mesh_);
        Vector s(mesh_.num_design_nodes());
        const auto& dn = mesh_.design_nodes();
        for (std::size_t k = 0; k < dn.size(); ++k) s[k] = nodal[dn[k]];
        return s;
      }
    }
    return Vector();
  }

  /// Transient solve of one level-set field; fills the transmission and
  /// constraint values against the (cached) baseline.
  std::unique_ptr<ForwardResult> analyze(const Vector& sbar) {
    auto fr = std::make_unique<ForwardResult>();
    fr->sbar = sbar;
    fr->disc = discretize(mesh_, sbar, nthreads_);
    fr->sys = std::make_unique<SystemMatrices>(
        assemble_system(mesh_, fr->disc, cfg_.materials, nthreads_));
    effective_stiffness(*fr->sys, nm_.a3(), nm_.a6());
    fr->solver = std::make_unique<TransientSolver>(*fr->sys, nm_);
    fr->hist = fr->solver->run(dpin_, cfg_.steps);
    fr->spec = windowed_spectrum(fr->hist.outlet_trace.head(cfg_.steps));

    const ComplexVector& base = baseline_spectrum();
    fr->S = transmission(fr->spec, base);
    fr->phi1 = constraint_value(fr->S, cfg_.pass_bins(), 1.0);
    fr->phi2 = constraint_value(fr->S, cfg_.stop_bins(), cfg_.stop_target);
    return fr;
  }

  /// Adjoint gradients of both constraints with respect to the design
  /// variables, sharing one set of element derivative blocks and the forward
  /// factorization.
  std::pair<Vector, Vector> gradients(const ForwardResult& fr) {
    AdjointSolver adj(mesh_, *fr.sys, *fr.solver, fr.disc, cfg_.materials, fr.sbar,
                      nthreads_);
    const ComplexVector& base = baseline_spectrum();
    const Vector seed1 =
        constraint_seed(fr.S, fr.spec, base, cfg_.pass_bins(), 1.0);
    const Vector seed2 =
        constraint_seed(fr.S, fr.spec, base, cfg_.stop_bins(), cfg_.stop_target);
    const Vector g1 = chain_.chain_rule(adj.sensitivity(fr.hist, seed1));
    const Vector g2 = chain_.chain_rule(adj.sensitivity(fr.hist, seed2));
    return {g1, g2};
  }

  /// Baseline outlet trace of the empty duct under the identical excitation,
  /// cached on disk keyed by mesh/materials/time/signal.
  const Vector& baseline_trace() {
    if (baseline_trace_.size() == 0) {
      const std::string dir = out_dir_ + "/cache";
      ensure_dir(dir);
      std::ostringstream name;
      name << dir << "/baseline_" << std::hex << baseline_key(cfg_) << ".txt";
      if (!load_baseline(name.str())) {
        const Vector sbar = chain_.empty_field();
        Discretization disc = discretize(mesh_, sbar, nthreads_);
        SystemMatrices sys = assemble_system(mesh_, disc, cfg_.materials, nthreads_);
        effective_stiffness(sys, nm_.a3(), nm_.a6());
        TransientSolver ts(sys, nm_);
        const StateHistory hist = ts.run(dpin_, cfg_.steps);
        baseline_trace_ = hist.outlet_trace;
        store_baseline(name.str());
      }
      baseline_spec_ = windowed_spectrum(baseline_trace_.head(cfg_.steps));
      std::vector<BinRange> active = cfg_.pass_bins();
      const auto stop = cfg_.stop_bins();
      active.insert(active.end(), stop.begin(), stop.end());
      check_baseline_strength(baseline_spec_, active);
    }
    return baseline_trace_;
  }

  const ComplexVector& baseline_spectrum() {
    baseline_trace();
    return baseline_spec_;
  }

  struct IterationRecord {
    int iter;
    double z, phi1, phi2, max_ds;
  };

  /// Fixed-iteration optimization loop: forward solve, two adjoint sweeps,
  /// design chain rule, MMA update. Returns the final design variables and
  /// logs one record per iteration.
  Vector run_optimization(std::vector<IterationRecord>* log = nullptr,
                          bool write_artifacts = true) {
    Vector s = initial_design_vector();
    const int n = static_cast<int>(s.size());
    MmaOptimizer mma(Vector::Zero(n), Vector::Ones(n), 2, cfg_.mma);
    const Vector df0 = Vector::Zero(n);

    double scale1 = 1.0, scale2 = 1.0;
    CsvWriter itcsv({"iter", "z", "phi1", "phi2", "max_ds"});

    for (int it = 1; it <= cfg_.iterations; ++it) {
      auto fr = analyze(chain_.physical_field(s));
      auto [g1, g2] = gradients(*fr);
      if (cfg_.scale_by_initial && it == 1) {
        scale1 = fr->phi1 > 0.0 ? 1.0 / fr->phi1 : 1.0;
        scale2 = fr->phi2 > 0.0 ? 1.0 / fr->phi2 : 1.0;
      }
      Vector fval(2);
      fval << fr->phi1 * scale1, fr->phi2 * scale2;
      Eigen::MatrixXd dfdx(2, n);
      dfdx.row(0) = scale1 * g1.transpose();
      dfdx.row(1) = scale2 * g2.transpose();

      Vector snew = mma.update(s, df0, fval, dfdx);
      if (!snew.allFinite()) {
        std::cerr << "mma: subproblem returned non-finite iterate, keeping design\n";
        snew = s;
      }
      const double max_ds = (snew - s).cwiseAbs().maxCoeff();
      if (log) log->push_back({it, mma.z(), fr->phi1, fr->phi2, max_ds});
      itcsv.row({static_cast<double>(it), mma.z(), fr->phi1, fr->phi2, max_ds});
      if (write_artifacts && cfg_.snapshot_every > 0 && it % cfg_.snapshot_every == 0)
        write_design_snapshots(s, it);
      s = snew;
    }

    if (write_artifacts) {
      itcsv.save(out_dir_ + "/iterations.csv");
      write_design_snapshots(s, cfg_.iterations);
    }
    return s;
  }

  /// Central-difference check of the adjoint gradient on a subset of design
  /// variables. The base design is nudged `step` away from the box bounds so
  /// the two-sided probe stays feasible.
  struct FdCheckRow {
    int variable;
    double adjoint, fd, rel_error;
  };

  std::vector<FdCheckRow> fd_gradient_check(int num_vars, double step,
                                            std::uint64_t select_seed = 7,
                                            bool use_stop_constraint = true) {
    Vector s0 = initial_design_vector();
    for (int i = 0; i < s0.size(); ++i) s0[i] = std::min(std::max(s0[i], step), 1.0 - step);

    auto fr = analyze(chain_.physical_field(s0));
    auto [g1, g2] = gradients(*fr);
    const Vector& g = use_stop_constraint ? g2 : g1;
    const double gmax = g.cwiseAbs().maxCoeff();

    Xoshiro256 rng(select_seed);
    std::vector<FdCheckRow> rows;
    for (int k = 0; k < num_vars; ++k) {
      const int j = static_cast<int>(rng.next() % static_cast<std::uint64_t>(s0.size()));
      Vector sp = s0, sm = s0;
      sp[j] += step;
      sm[j] -= step;
      const auto frp = analyze(chain_.physical_field(sp));
      const auto frm = analyze(chain_.physical_field(sm));
      const double fp = use_stop_constraint ? frp->phi2 : frp->phi1;
      const double fm = use_stop_constraint ? frm->phi2 : frm->phi1;
      const double fd = (fp - fm) / (2.0 * step);
      const double floor = std::max(1e-6 * gmax, 1e-300);
      const double rel =
          std::abs(g[j] - fd) / std::max({std::abs(g[j]), std::abs(fd), floor});
      rows.push_back({j, g[j], fd, rel});
    }
    return rows;
  }

  /// Time-harmonic solve (K + i w C - w^2 M) v = i w g at the given
  /// frequencies, on the same cut-element matrices as the transient run.
  /// Returns |outlet(design)| / |outlet(empty)| per frequency.
  Vector harmonic_transmission(const Vector& sbar, const std::vector<double>& freqs_hz) {
    const Vector empty = harmonic_outlet_magnitude(chain_.empty_field(), freqs_hz);
    const Vector design = harmonic_outlet_magnitude(sbar, freqs_hz);
    Vector S(design.size());
    for (Eigen::Index i = 0; i < S.size(); ++i)
      S[i] = design[i] / std::max(empty[i], 1e-300);
    return S;
  }

  /// Band bin center frequencies of the scenario (pass then stop).
  std::vector<double> band_frequencies() const {
    std::vector<double> f;
    for (const auto& bands : {cfg_.pass_bins(), cfg_.stop_bins()})
      for (const auto& b : bands)
        for (int m = b.lo; m <= b.hi; ++m) f.push_back(m * cfg_.delta_f());
    return f;
  }

  void write_design_snapshots(const Vector& s, int iter) {
    std::ostringstream tag;
    tag << out_dir_ << "/design_" << std::setfill('0') << std::setw(6) << iter;
    Vector s_nodal = Vector::Zero(mesh_.num_nodes());
    const auto& dn = mesh_.design_nodes();
    for (std::size_t k = 0; k < dn.size(); ++k) s_nodal[dn[k]] = s[k];
    write_structured_scalars(tag.str() + "_s.vtk", mesh_, s_nodal, "design", false);
    write_structured_scalars(tag.str() + "_sbar.vtk", mesh_, chain_.physical_field(s),
                             "levelset", false);
  }

  const std::string& out_dir() const { return out_dir_; }

 private:
  Vector harmonic_outlet_magnitude(const Vector& sbar, const std::vector<double>& freqs_hz) {
    const Discretization disc = discretize(mesh_, sbar, nthreads_);
    const SystemMatrices sys = assemble_system(mesh_, disc, cfg_.materials, nthreads_);
    Vector out(static_cast<Eigen::Index>(freqs_hz.size()));
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
      const double w = 2.0 * M_PI * freqs_hz[i];
      ComplexSparseMatrix Z =
          sys.K.cast<std::complex<double>>() +
          std::complex<double>(0.0, w) * sys.C.cast<std::complex<double>>() -
          std::complex<double>(w * w, 0.0) * sys.M.cast<std::complex<double>>();
      Eigen::SparseLU<ComplexSparseMatrix> lu;
      lu.compute(Z);
      require(lu.info() == Eigen::Success,
              "harmonic: factorization failed at f = " + std::to_string(freqs_hz[i]));
      ComplexVector rhs =
          std::complex<double>(0.0, w) * sys.inlet_shape.cast<std::complex<double>>();
      for (int d = 0; d < sys.ndof; ++d)
        if (sys.clamped[d]) rhs[d] = 0.0;
      const ComplexVector v = lu.solve(rhs);
      out[static_cast<Eigen::Index>(i)] =
          std::abs(sys.outlet_weights.cast<std::complex<double>>().dot(v));
    }
    return out;
  }

  bool load_baseline(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) return false;
    int n = 0;
    double dt = 0.0;
    in >> n >> dt;
    if (n != cfg_.steps + 1 || dt != cfg_.dt) return false;
    Vector trace(n);
    for (int k = 0; k < n; ++k)
      if (!(in >> trace[k])) return false;
    baseline_trace_ = trace;
    return true;
  }

  void store_baseline(const std::string& path) const {
    std::ostringstream out;
    out << baseline_trace_.size() << " " << fmt17(cfg_.dt) << "\n";
    for (Eigen::Index k = 0; k < baseline_trace_.size(); ++k)
      out << fmt17(baseline_trace_[k]) << "\n";
    write_file_atomic(path, out.str());
  }

  ScenarioConfig cfg_;
  DuctMesh mesh_;
  DesignChain chain_;
  std::string out_dir_;
  int nthreads_;
  NewmarkParams nm_;
  Vector pin_, dpin_;
  Vector baseline_trace_;
  ComplexVector baseline_spec_;
};

/// Per-bin target used for reporting: 1 in pass bands, b in stop bands,
/// 0 elsewhere.
inline double band_target(const ScenarioConfig& cfg, int bin) {
  for (const auto& b : cfg.pass_bins())
    if (b.contains(bin)) return 1.0;
  for (const auto& b : cfg.stop_bins())
    if (b.contains(bin)) return cfg.stop_target;
  return 0.0;
}

/// Full scenario run: baseline (cached), optional optimization, final
/// transmission/SPL reports, iteration log and design snapshots.
inline void run_scenario(const ScenarioConfig& cfg, const std::string& out_dir,
                         int nthreads = 1, bool optimize = true) {
  Pipeline pipe(cfg, out_dir, nthreads);

  Vector s = pipe.initial_design_vector();
  if (optimize && cfg.iterations > 0) s = pipe.run_optimization();

  auto fr = pipe.analyze(pipe.chain().physical_field(s));
  const ComplexVector& base = pipe.baseline_spectrum();

  CsvWriter spec_csv({"f_hz", "S", "S_target", "spl_design_db", "spl_empty_db"});
  for (int m = 0; m <= cfg.steps / 2; ++m) {
    spec_csv.row({m * cfg.delta_f(), fr->S[m], band_target(cfg, m),
                  spl_db(std::abs(fr->spec[m])), spl_db(std::abs(base[m]))});
  }
  spec_csv.save(out_dir + "/transmission.csv");

  CsvWriter sig_csv({"f_hz", "magnitude"});
  const ComplexVector sig_spec = dft(Vector(pipe.input_signal().head(cfg.steps)));
  for (int m = 0; m <= cfg.steps / 2; ++m)
    sig_csv.row({m * cfg.delta_f(), std::abs(sig_spec[m])});
  sig_csv.save(out_dir + "/signal_spectrum.csv");

  if (cfg.write_trace) {
    CsvWriter trace_csv({"t", "p_outlet"});
    for (int n = 0; n <= cfg.steps; ++n)
      trace_csv.row({n * cfg.dt, fr->hist.outlet_trace[n]});
    trace_csv.save(out_dir + "/trace.csv");
  }

  if (cfg.dump_matrices) {
    dump_matrix(out_dir + "/matrix_M.txt", fr->sys->M);
    dump_matrix(out_dir + "/matrix_C.txt", fr->sys->C);
    dump_matrix(out_dir + "/matrix_K.txt", fr->sys->K);
  }

  Vector phases(pipe.mesh().num_elems());
  for (int e = 0; e < pipe.mesh().num_elems(); ++e)
    phases[e] = fr->disc.phases[e] == Phase::Solid
                    ? 1.0
                    : (fr->disc.phases[e] == Phase::Cut ? 0.5 : 0.0);
  write_structured_scalars(out_dir + "/classification.vtk", pipe.mesh(), phases,
                           "classification", true);
  pipe.write_design_snapshots(s, cfg.iterations);

  std::ostringstream manifest;
  manifest << "config_hash " << std::hex << config_hash(cfg) << "\n";
  manifest << std::dec << "steps " << cfg.steps << "\n";
  manifest << "dt " << fmt17(cfg.dt) << "\n";
  manifest << "seed " << cfg.signal.seed << "\n";
  manifest << "phi1 " << fmt17(fr->phi1) << "\n";
  manifest << "phi2 " << fmt17(fr->phi2) << "\n";
  write_file_atomic(out_dir + "/manifest.txt", manifest.str());
}

}  // namespace vibrato
