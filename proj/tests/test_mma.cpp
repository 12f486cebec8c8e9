#include "vibrato/mma.hpp"
#include "vibrato/signal.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vibrato;

namespace {

Vector vec1(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

}  // namespace

TEST_CASE("zero constraint gradients leave the iterate stationary") {
  // the subproblem is flat here, so the achievable accuracy is set by the
  // interior-point barrier floor; tighten it for this check
  const int n = 12;
  MmaSettings set;
  set.epsimin = 1e-11;
  MmaOptimizer mma(Vector::Zero(n), Vector::Ones(n), 2, set);
  Vector x = Vector::Constant(n, 0.37);
  Vector fval(2);
  fval << 3.0, 7.0;
  const Vector xnew =
      mma.update(x, Vector::Zero(n), fval, Eigen::MatrixXd::Zero(2, n));
  CHECK((xnew - x).cwiseAbs().maxCoeff() < 1e-6);

  SECTION("and the bound variable tracks the worst constraint") {
    CHECK_THAT(mma.z(), Catch::Matchers::WithinAbs(7.0, 0.1));
  }
}

TEST_CASE("one-variable subproblem matches an independent dual solve") {
  // single variable, single constraint with a linear model; the oracle
  // rebuilds the published subproblem data and minimizes it by golden
  // section with y and z eliminated analytically
  MmaSettings set;
  set.epsimin = 1e-11;
  MmaOptimizer mma(vec1(0.0), vec1(1.0), 1, set);

  const double xval = 0.4;
  const double df0 = 1.3;   // explicit objective slope
  const double dfdx = -2.0; // constraint slope
  const double fval = 0.5;  // constraint value (violated: needs z or movement)

  Vector g(1);
  g[0] = df0;
  Eigen::MatrixXd dg(1, 1);
  dg(0, 0) = dfdx;
  const Vector got = mma.update(vec1(xval), g, vec1(fval), dg);

  // oracle: subproblem construction per the moving-asymptote scheme
  const double low = xval - set.asy_init * 1.0;
  const double upp = xval + set.asy_init * 1.0;
  const double alfa = std::max(low + set.albefa * (xval - low), 0.0);
  const double beta = std::min(upp - set.albefa * (upp - xval), 1.0);
  const double ux1 = upp - xval, xl1 = xval - low;
  double p0 = std::max(df0, 0.0), q0 = std::max(-df0, 0.0);
  const double pq0 = 0.001 * (p0 + q0) + set.raa0 / 1.0;
  p0 = (p0 + pq0) * ux1 * ux1;
  q0 = (q0 + pq0) * xl1 * xl1;
  double P = std::max(dfdx, 0.0), Q = std::max(-dfdx, 0.0);
  const double PQ = 0.001 * (P + Q) + set.raa0 / 1.0;
  P = (P + PQ) * ux1 * ux1;
  Q = (Q + PQ) * xl1 * xl1;
  const double b = P / ux1 + Q / xl1 - fval;

  auto total = [&](double x) {
    const double g0 = p0 / (upp - x) + q0 / (x - low);
    const double g1 = P / (upp - x) + Q / (x - low);
    // with c large the elastic variable stays zero; z = max(0, g1 - b)
    return g0 + set.a0 * std::max(0.0, g1 - b);
  };
  double lo = alfa, hi = beta;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  while (hi - lo > 1e-13) {
    const double x1 = hi - gr * (hi - lo);
    const double x2 = lo + gr * (hi - lo);
    if (total(x1) < total(x2)) hi = x2;
    else lo = x1;
  }
  const double oracle = 0.5 * (lo + hi);
  CHECK_THAT(got[0], Catch::Matchers::WithinAbs(oracle, 1e-8));
}

TEST_CASE("oscillation shrinks the asymptote interval by the decrease factor") {
  MmaSettings set;
  MmaOptimizer mma(vec1(0.0), vec1(1.0), 1, set);
  Vector g = vec1(0.0);
  Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(1, 1);
  dg(0, 0) = 0.4;
  const Vector f = vec1(1.0);

  mma.update(vec1(0.5), g, f, dg);   // iter 1: asyinit
  mma.update(vec1(0.6), g, f, dg);   // iter 2: asyinit around 0.6
  const double low2 = mma.lower_asymptote()[0];
  const double upp2 = mma.upper_asymptote()[0];
  CHECK_THAT(low2, Catch::Matchers::WithinAbs(0.1, 1e-12));
  CHECK_THAT(upp2, Catch::Matchers::WithinAbs(1.1, 1e-12));

  SECTION("sign reversal contracts by 0.7") {
    mma.update(vec1(0.55), g, f, dg);  // (0.55-0.6)(0.6-0.5) < 0
    CHECK_THAT(mma.lower_asymptote()[0],
               Catch::Matchers::WithinAbs(0.55 - set.asy_decr * (0.6 - low2), 1e-12));
    CHECK_THAT(mma.upper_asymptote()[0],
               Catch::Matchers::WithinAbs(0.55 + set.asy_decr * (upp2 - 0.6), 1e-12));
  }

  SECTION("monotone progress expands by 1.2") {
    mma.update(vec1(0.7), g, f, dg);  // (0.7-0.6)(0.6-0.5) > 0
    CHECK_THAT(mma.lower_asymptote()[0],
               Catch::Matchers::WithinAbs(0.7 - set.asy_incr * (0.6 - low2), 1e-12));
  }
}

TEST_CASE("iterates always satisfy the box constraints") {
  const int n = 30;
  MmaOptimizer mma(Vector::Zero(n), Vector::Ones(n), 2);
  Xoshiro256 rng(55);
  Vector x = Vector::Constant(n, 0.5);
  for (int it = 0; it < 8; ++it) {
    Vector fval(2);
    fval << 5.0 * rng.next_double(), 5.0 * rng.next_double();
    Eigen::MatrixXd dg(2, n);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < n; ++j) dg(i, j) = 10.0 * rng.next_symmetric();
    x = mma.update(x, Vector::Zero(n), fval, dg);
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() <= 1.0);
  }
}

TEST_CASE("uniform scaling of the constraints barely moves the subproblem argmin") {
  const int n = 20;
  Xoshiro256 rng(66);
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = 0.2 + 0.6 * rng.next_double();
  Vector fval(2);
  fval << 2.0, 3.0;
  Eigen::MatrixXd dg(2, n);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < n; ++j) dg(i, j) = rng.next_symmetric();

  MmaOptimizer a(Vector::Zero(n), Vector::Ones(n), 2);
  MmaOptimizer b(Vector::Zero(n), Vector::Ones(n), 2);
  const double kappa = 8.0;
  const Vector xa = a.update(x, Vector::Zero(n), fval, dg);
  const Vector xb =
      b.update(x, Vector::Zero(n), Vector(kappa * fval), Eigen::MatrixXd(kappa * dg));
  // exact invariance is broken only by the fixed internal regularization of
  // the approximation coefficients (~1e-4 for O(1) gradients)
  CHECK((xa - xb).cwiseAbs().maxCoeff() < 2e-4);
}

TEST_CASE("updates are deterministic") {
  const int n = 10;
  Vector x = Vector::Constant(n, 0.4);
  Vector fval(2);
  fval << 1.0, 2.0;
  Eigen::MatrixXd dg(2, n);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < n; ++j) dg(i, j) = std::sin(3.0 * i + j);

  MmaOptimizer a(Vector::Zero(n), Vector::Ones(n), 2);
  MmaOptimizer b(Vector::Zero(n), Vector::Ones(n), 2);
  const Vector xa = a.update(x, Vector::Zero(n), fval, dg);
  const Vector xb = b.update(x, Vector::Zero(n), fval, dg);
  CHECK((xa - xb).cwiseAbs().maxCoeff() == 0.0);
}
