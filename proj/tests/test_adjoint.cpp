#include "vibrato/adjoint.hpp"
#include "vibrato/assembly.hpp"
#include "vibrato/newmark.hpp"
#include "vibrato/signal.hpp"
#include "vibrato/spectrum.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vibrato;

namespace {

struct SmallSetup {
  DuctMesh mesh;
  MaterialParams mat;
  Vector sbar;
  Discretization disc;
  SystemMatrices sys;
  NewmarkParams nm;
  std::unique_ptr<TransientSolver> solver;
  Vector dpin;

  SmallSetup(int steps, bool with_cuts, std::uint64_t seed = 1)
      : mesh(2, 6, 2, 5, 2e-3) {
    nm.dt = 2e-5;
    sbar = Vector::Constant(mesh.num_nodes(), -0.5 * mesh.h());
    if (with_cuts) {
      for (int k : mesh.design_nodes()) {
        const double x = mesh.node_x(k), y = mesh.node_y(k);
        sbar[k] = 0.4 * mesh.h() * std::sin(900.0 * x + 0.3) * std::cos(700.0 * y - 0.2);
      }
    }
    disc = discretize(mesh, sbar);
    if (with_cuts) REQUIRE(disc.num_cut() > 0);
    sys = assemble_system(mesh, disc, mat);
    effective_stiffness(sys, nm.a3(), nm.a6());
    solver = std::make_unique<TransientSolver>(sys, nm);
    SignalSpec sig;
    sig.seed = seed;
    dpin = time_derivative(sample_signal(sig, steps, nm.dt), nm.dt);
  }
};

Vector random_vec(int n, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.next_symmetric();
  return v;
}

}  // namespace

TEST_CASE("reverse sweep equals a dense transpose solve of the block system") {
  const int steps = 12;
  SmallSetup s(steps, false);
  const int nd = s.sys.ndof;
  const int block = 3 * nd;
  const int total = (steps + 1) * block;

  const Eigen::MatrixXd M = Eigen::MatrixXd(s.sys.M);
  const Eigen::MatrixXd C = Eigen::MatrixXd(s.sys.C);
  const Eigen::MatrixXd Khat = Eigen::MatrixXd(s.sys.Khat);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nd, nd);
  const double a1 = s.nm.a1(), a2 = s.nm.a2(), a3 = s.nm.a3(), a4 = s.nm.a4(),
               a5 = s.nm.a5(), a6 = s.nm.a6();

  Eigen::MatrixXd A(block, block), B(block, block), A0(block, block);
  A.setZero();
  B.setZero();
  A0.setZero();
  // A: current-step jacobian of (r1, r2, r3) wrt (v, vd, vdd)
  A.block(0, 0, nd, nd) = Khat;
  A.block(nd, 0, nd, nd) = -a3 * I;
  A.block(nd, nd, nd, nd) = I;
  A.block(2 * nd, 0, nd, nd) = -a6 * I;
  A.block(2 * nd, 2 * nd, nd, nd) = I;
  // B: previous-step jacobian
  B.block(0, 0, nd, nd) = -(a6 * M + a3 * C);
  B.block(0, nd, nd, nd) = -(a4 * M - a1 * C);
  B.block(0, 2 * nd, nd, nd) = a2 * C - a5 * M;
  B.block(nd, 0, nd, nd) = a3 * I;
  B.block(nd, nd, nd, nd) = -a1 * I;
  B.block(nd, 2 * nd, nd, nd) = -a2 * I;
  B.block(2 * nd, 0, nd, nd) = a6 * I;
  B.block(2 * nd, nd, nd, nd) = a4 * I;
  B.block(2 * nd, 2 * nd, nd, nd) = a5 * I;
  // A0: initial conditions, with the mass solve in the acceleration row
  A0.block(0, 0, nd, nd) = I;
  A0.block(nd, nd, nd, nd) = I;
  A0.block(2 * nd, 2 * nd, nd, nd) = M;

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(total, total);
  J.block(0, 0, block, block) = A0;
  for (int n = 1; n <= steps; ++n) {
    J.block(n * block, n * block, block, block) = A;
    J.block(n * block, (n - 1) * block, block, block) = B;
  }

  const Vector seed_trace = random_vec(steps, 5);
  Vector rhs = Vector::Zero(total);
  for (int n = 0; n < steps; ++n)
    rhs.segment(n * block, nd) = -seed_trace[n] * s.sys.outlet_weights;

  const Vector dense_lambda = J.transpose().partialPivLu().solve(rhs);

  const StateHistory hist = s.solver->run(s.dpin, steps);
  AdjointSolver adj(s.mesh, s.sys, *s.solver, s.disc, s.mat, s.sbar);
  AdjointTrace rec;
  adj.sensitivity(hist, seed_trace, &rec);

  double scale = dense_lambda.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (int n = 0; n <= steps; ++n) {
    worst = std::max(worst,
                     (rec.lam[n] - dense_lambda.segment(n * block, nd)).cwiseAbs().maxCoeff());
    worst = std::max(
        worst,
        (rec.lamd[n] - dense_lambda.segment(n * block + nd, nd)).cwiseAbs().maxCoeff());
    worst = std::max(
        worst,
        (rec.lamdd[n] - dense_lambda.segment(n * block + 2 * nd, nd)).cwiseAbs().maxCoeff());
  }
  CHECK(worst / scale < 1e-10);

  SECTION("transpose identity against the forward jacobian") {
    const Vector du = random_vec(total, 6);
    Vector lam_stack(total);
    for (int n = 0; n <= steps; ++n) {
      lam_stack.segment(n * block, nd) = rec.lam[n];
      lam_stack.segment(n * block + nd, nd) = rec.lamd[n];
      lam_stack.segment(n * block + 2 * nd, nd) = rec.lamdd[n];
    }
    const double lhs = (J * du).dot(lam_stack);
    const double rhs_dot = du.dot(rhs);  // J^T lam = rhs by construction
    CHECK_THAT(lhs, Catch::Matchers::WithinRel(rhs_dot, 1e-10));
  }
}

TEST_CASE("zero seeds give zero multipliers and zero sensitivity") {
  const int steps = 8;
  SmallSetup s(steps, true);
  const StateHistory hist = s.solver->run(s.dpin, steps);
  AdjointSolver adj(s.mesh, s.sys, *s.solver, s.disc, s.mat, s.sbar);
  AdjointTrace rec;
  const Vector g = adj.sensitivity(hist, Vector::Zero(steps), &rec);
  CHECK(g.norm() == 0.0);
  for (const auto& l : rec.lam) CHECK(l.norm() == 0.0);
}

TEST_CASE("adjoint sensitivity is linear in the seed") {
  const int steps = 10;
  SmallSetup s(steps, true);
  const StateHistory hist = s.solver->run(s.dpin, steps);
  AdjointSolver adj(s.mesh, s.sys, *s.solver, s.disc, s.mat, s.sbar);

  const Vector s1 = random_vec(steps, 31);
  const Vector s2 = random_vec(steps, 32);
  const Vector g1 = adj.sensitivity(hist, s1);
  const Vector g2 = adj.sensitivity(hist, s2);
  const Vector g12 = adj.sensitivity(hist, 2.0 * s1 - 0.5 * s2);
  CHECK((2.0 * g1 - 0.5 * g2 - g12).norm() <= 1e-10 * g12.norm());
}

TEST_CASE("element matrix derivative") {
  MaterialParams mat;
  const double h = 2e-3;

  SECTION("uncut elements have zero derivative") {
    const std::array<double, 4> corners = {0.3 * h, 0.2 * h, 0.25 * h, 0.4 * h};
    for (int j = 0; j < 4; ++j) {
      const CornerDerivative d = element_matrix_derivative(corners, mat, h, j);
      CHECK_FALSE(d.one_sided);
      CHECK(d.d.K.norm() == 0.0);
      CHECK(d.d.M.norm() == 0.0);
    }
  }

  SECTION("straight-cut solid area derivative matches the analytic formula") {
    const double a = 0.3 * h, b = 0.2 * h;
    const std::array<double, 4> corners = {a, a, -b, -b};
    // solid mass sum per direction = rho ((1 - alpha) A_solid + alpha h^2);
    // left crossing height h*v0/(b + v0) gives dA/dv0 = h^2 b / (2 (b+v0)^2)
    const double dA = h * h * b / (2.0 * (b + a) * (b + a));
    const CornerDerivative d = element_matrix_derivative(corners, mat, h, 0);
    double mass_sum = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) mass_sum += d.d.M(2 * i, 2 * j);
    const double expect = mat.rho_s * (1.0 - mat.alpha_void) * dA;
    CHECK_THAT(mass_sum, Catch::Matchers::WithinRel(expect, 1e-6));
    CHECK_FALSE(d.one_sided);
  }

  SECTION("mirrored configurations give mirrored derivative blocks") {
    const std::array<double, 4> corners = {0.35 * h, -0.15 * h, -0.3 * h, 0.22 * h};
    const std::array<double, 4> mirrored = {corners[1], corners[0], corners[3], corners[2]};
    // reflection x -> h - x swaps local nodes 0<->1 and 3<->2 and flips u_x
    const std::array<int, 4> nodemap = {1, 0, 3, 2};
    auto dofmap = [&](int i) {
      if (i >= 8) return 8 + nodemap[i - 8];
      return 2 * nodemap[i / 2] + (i % 2);
    };
    auto sign = [&](int i) { return (i < 8 && i % 2 == 0) ? -1.0 : 1.0; };

    for (int j = 0; j < 4; ++j) {
      const CornerDerivative d = element_matrix_derivative(corners, mat, h, j);
      const CornerDerivative dm =
          element_matrix_derivative(mirrored, mat, h, nodemap[j]);
      double worst = 0.0;
      for (int i = 0; i < 12; ++i)
        for (int k = 0; k < 12; ++k) {
          const double expect = sign(i) * sign(k) * d.d.K(i, k);
          worst = std::max(worst, std::abs(dm.d.K(dofmap(i), dofmap(k)) - expect));
        }
      CHECK(worst <= 1e-6 * d.d.K.cwiseAbs().maxCoeff());
    }
  }

  SECTION("topology change within the step falls back to one-sided") {
    const std::array<double, 4> corners = {1e-7 * h, -0.3 * h, -0.4 * h, -0.2 * h};
    const CornerDerivative d = element_matrix_derivative(corners, mat, h, 0);
    CHECK(d.one_sided);
    CHECK(d.d.K.norm() > 0.0);
  }
}

TEST_CASE("level-set sensitivity matches finite differences of the pipeline core") {
  // perturb one nodal level-set value directly: this isolates the adjoint
  // and the element derivatives from the design chain
  const int steps = 60;
  SmallSetup s(steps, true);
  const StateHistory hist = s.solver->run(s.dpin, steps);

  // synthetic objective: Phi = sum over a band of |windowed spectrum|^2
  // relative to a fixed baseline-free target, reusing the production seed
  const ComplexVector base = ComplexVector::Constant(steps, std::complex<double>(3.0, 0.0));
  const std::vector<BinRange> bands = {{2, 5}};
  const double tau = 0.7;

  auto phi_of = [&](const Vector& sbar) {
    Discretization disc = discretize(s.mesh, sbar);
    SystemMatrices sys = assemble_system(s.mesh, disc, s.mat);
    effective_stiffness(sys, s.nm.a3(), s.nm.a6());
    TransientSolver ts(sys, s.nm);
    const StateHistory h2 = ts.run(s.dpin, steps);
    const ComplexVector spec = windowed_spectrum(h2.outlet_trace.head(steps));
    return constraint_value(transmission(spec, base), bands, tau);
  };

  const ComplexVector spec = windowed_spectrum(hist.outlet_trace.head(steps));
  const Vector S = transmission(spec, base);
  const Vector seed = constraint_seed(S, spec, base, bands, tau);

  AdjointSolver adj(s.mesh, s.sys, *s.solver, s.disc, s.mat, s.sbar);
  const Vector g = adj.sensitivity(hist, seed);

  // pick interface-adjacent nodes (nonzero rows of g)
  int checked = 0;
  const double gmax = g.cwiseAbs().maxCoeff();
  REQUIRE(gmax > 0.0);
  for (int k = 0; k < s.mesh.num_nodes() && checked < 6; ++k) {
    if (std::abs(g[k]) < 0.3 * gmax) continue;
    ++checked;
    const double delta = 1e-6 * s.mesh.h();
    Vector sp = s.sbar, sm = s.sbar;
    sp[k] += delta;
    sm[k] -= delta;
    const double fd = (phi_of(sp) - phi_of(sm)) / (2.0 * delta);
    CHECK_THAT(g[k], Catch::Matchers::WithinRel(fd, 1e-3));
  }
  CHECK(checked >= 3);

  SECTION("sensitivity support is confined to cut-element corners") {
    std::vector<char> cut_corner(s.mesh.num_nodes(), 0);
    for (int e : s.disc.cut_elems)
      for (int node : s.mesh.elem_nodes(e)) cut_corner[node] = 1;
    for (int k = 0; k < s.mesh.num_nodes(); ++k)
      if (!cut_corner[k]) CHECK(g[k] == 0.0);
  }
}
