#pragma once

#include "vibrato/assembly.hpp"
#include "vibrato/common.hpp"
#include "vibrato/linear_solver.hpp"

#include <cmath>

namespace vibrato {

/// Implicit Newmark parameters. The default beta = 1/4, gamma = 1/2 family
/// is unconditionally stable and conserves the discrete energy of undamped
/// linear systems.
struct NewmarkParams {
  double beta = 0.25;
  double gamma = 0.5;
  double dt = 2e-5;

  double a1() const { return 1.0 - gamma / beta; }
  double a2() const { return (1.0 - gamma / (2.0 * beta)) * dt; }
  double a3() const { return gamma / (beta * dt); }
  double a4() const { return 1.0 / (beta * dt); }
  double a5() const { return 1.0 / (2.0 * beta) - 1.0; }
  double a6() const { return 1.0 / (beta * dt * dt); }
};

/// Full trajectory of the coupled state (v, v-dot, v-ddot) for n = 0..N plus
/// the outlet pressure trace. The whole history is kept in memory for the
/// reverse adjoint sweep.
struct StateHistory {
  double dt = 0.0;
  std::vector<Vector> v, vd, vdd;
  Vector outlet_trace;  // length nsteps()+1; the spectrum uses the first nsteps() samples

  int nsteps() const { return static_cast<int>(v.size()) - 1; }
};

/// One Newmark step: solves Khat v^n = hhat^n, then recovers the time
/// derivatives from the update formulas.
inline void newmark_step(const FactorizedOperator& khat, const SparseMatrix& M,
                         const SparseMatrix& C, const NewmarkParams& nm, const Vector& h,
                         const Vector& v0, const Vector& vd0, const Vector& vdd0, Vector& v1,
                         Vector& vd1, Vector& vdd1) {
  const Vector hhat = h + M * (nm.a4() * vd0 + nm.a5() * vdd0 + nm.a6() * v0) +
                      C * (-nm.a1() * vd0 - nm.a2() * vdd0 + nm.a3() * v0);
  v1 = khat.solve(hhat);
  vd1 = nm.a1() * vd0 + nm.a2() * vdd0 + nm.a3() * (v1 - v0);
  vdd1 = -nm.a4() * vd0 - nm.a5() * vdd0 + nm.a6() * (v1 - v0);
}

/// Owns the factorizations of Khat and M for one assembled design and runs
/// the time loop. The same factorizations serve the adjoint's transpose
/// solves.
class TransientSolver {
 public:
  TransientSolver(const SystemMatrices& sys, const NewmarkParams& nm)
      : sys_(sys), nm_(nm) {
    require(sys_.Khat.rows() == sys_.ndof, "transient: effective stiffness not built");
    khat_.compute(sys_.Khat, sys_.clamped);
    mass_.compute(sys_.M, sys_.clamped);
  }

  const FactorizedOperator& khat_solver() const { return khat_; }
  const FactorizedOperator& mass_solver() const { return mass_; }
  const NewmarkParams& params() const { return nm_; }

  /// Runs nsteps steps from zero initial conditions. load_deriv holds
  /// dp_in/dt sampled at t_0..t_nsteps; the load is h^n = inlet_shape *
  /// load_deriv[n].
  StateHistory run(const Vector& load_deriv, int nsteps) const {
    require(load_deriv.size() >= nsteps + 1, "transient: load samples shorter than run");
    StateHistory hist;
    hist.dt = nm_.dt;
    hist.v.resize(nsteps + 1);
    hist.vd.resize(nsteps + 1);
    hist.vdd.resize(nsteps + 1);
    hist.outlet_trace.resize(nsteps + 1);

    hist.v[0] = Vector::Zero(sys_.ndof);
    hist.vd[0] = Vector::Zero(sys_.ndof);
    hist.vdd[0] = mass_.solve(sys_.inlet_shape * load_deriv[0]);
    hist.outlet_trace[0] = sys_.outlet_weights.dot(hist.v[0]);

    for (int n = 1; n <= nsteps; ++n) {
      const Vector h = sys_.inlet_shape * load_deriv[n];
      newmark_step(khat_, sys_.M, sys_.C, nm_, h, hist.v[n - 1], hist.vd[n - 1],
                   hist.vdd[n - 1], hist.v[n], hist.vd[n], hist.vdd[n]);
      require(std::isfinite(hist.v[n].norm()), "transient: solution diverged (NaN) at step " +
                                                   std::to_string(n));
      hist.outlet_trace[n] = sys_.outlet_weights.dot(hist.v[n]);
    }
    return hist;
  }

  /// Relative step residuals r1, r2, r3 of the stored history at step
  /// n >= 1. r1 is normalized by the effective load; r2 and r3 live in
  /// velocity and acceleration units, so each is normalized by the
  /// magnitudes of its own terms. All three vanish to solver precision; the
  /// adjoint relies on that identity.
  std::array<double, 3> step_residuals(const StateHistory& h, const Vector& load_deriv,
                                       int n) const {
    const Vector hn = sys_.inlet_shape * load_deriv[n];
    const Vector hhat = hn +
                        sys_.M * (nm_.a4() * h.vd[n - 1] + nm_.a5() * h.vdd[n - 1] +
                                  nm_.a6() * h.v[n - 1]) +
                        sys_.C * (-nm_.a1() * h.vd[n - 1] - nm_.a2() * h.vdd[n - 1] +
                                  nm_.a3() * h.v[n - 1]);
    Vector hhat_masked = hhat;
    for (int d = 0; d < sys_.ndof; ++d)
      if (sys_.clamped[d]) hhat_masked[d] = 0.0;

    const Vector r1 = sys_.Khat * h.v[n] - hhat_masked;
    const Vector r2 = h.vd[n] - nm_.a1() * h.vd[n - 1] - nm_.a2() * h.vdd[n - 1] -
                      nm_.a3() * (h.v[n] - h.v[n - 1]);
    const Vector r3 = h.vdd[n] + nm_.a4() * h.vd[n - 1] + nm_.a5() * h.vdd[n - 1] -
                      nm_.a6() * (h.v[n] - h.v[n - 1]);

    const double s1 = std::max(hhat_masked.norm(), 1e-300);
    const double s2 = std::max(h.vd[n].norm() + std::abs(nm_.a1()) * h.vd[n - 1].norm() +
                                   std::abs(nm_.a2()) * h.vdd[n - 1].norm() +
                                   nm_.a3() * (h.v[n].norm() + h.v[n - 1].norm()),
                               1e-300);
    const double s3 = std::max(h.vdd[n].norm() + nm_.a4() * h.vd[n - 1].norm() +
                                   nm_.a5() * h.vdd[n - 1].norm() +
                                   nm_.a6() * (h.v[n].norm() + h.v[n - 1].norm()),
                               1e-300);
    return {r1.norm() / s1, r2.norm() / s2, r3.norm() / s3};
  }

 private:
  const SystemMatrices& sys_;
  NewmarkParams nm_;
  FactorizedOperator khat_;
  FactorizedOperator mass_;
};

}  // namespace vibrato
