#pragma once

#include "vibrato/common.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace vibrato {

struct MmaSettings {
  double asy_init = 0.5;
  double asy_decr = 0.7;
  double asy_incr = 1.2;
  double a0 = 1.0;
  double constraint_a = 1.0;  // a_i: ties each constraint to the bound variable z
  double constraint_c = 1000.0;
  double constraint_d = 0.0;
  double move_limit = 0.0;  // fraction of the box per iteration; <= 0 disables
  double raa0 = 1e-5;
  double albefa = 0.1;
  double epsimin = 1e-7;
};

/// Method of Moving Asymptotes (Svanberg 1987) with the internal bound
/// variable z, so that min z s.t. f_i <= z is expressed through a_i = 1 and
/// no explicit box on z. The convex subproblem is solved by the standard
/// primal-dual interior-point iteration.
class MmaOptimizer {
 public:
  MmaOptimizer(Vector xmin, Vector xmax, int num_constraints, MmaSettings settings = {})
      : xmin_(std::move(xmin)),
        xmax_(std::move(xmax)),
        m_(num_constraints),
        set_(settings) {
    n_ = static_cast<int>(xmin_.size());
    require(xmax_.size() == n_, "mma: bound size mismatch");
    require((xmax_.array() > xmin_.array()).all(), "mma: empty box");
    low_ = xmin_;
    upp_ = xmax_;
  }

  int iteration() const { return iter_; }
  double z() const { return z_; }
  const Vector& y() const { return y_; }
  const Vector& lower_asymptote() const { return low_; }
  const Vector& upper_asymptote() const { return upp_; }

  /// One design update. fval and dfdx hold the m constraint values and their
  /// gradients (rows of dfdx); df0dx is the explicit objective gradient (zero
  /// when the objective is the bound variable alone).
  Vector update(const Vector& xval, const Vector& df0dx, const Vector& fval,
                const Eigen::MatrixXd& dfdx) {
    require(xval.size() == n_ && df0dx.size() == n_, "mma: variable size mismatch");
    require(fval.size() == m_ && dfdx.rows() == m_ && dfdx.cols() == n_,
            "mma: constraint size mismatch");
    require(df0dx.allFinite() && fval.allFinite() && dfdx.allFinite(),
            "mma: non-finite constraint data");
    ++iter_;

    using Arr = Eigen::ArrayXd;
    const Arr x = xval.array();
    const Arr xmin = xmin_.array();
    const Arr xmax = xmax_.array();
    const Arr range = xmax - xmin;

    if (iter_ <= 2) {
      low_ = (x - set_.asy_init * range).matrix();
      upp_ = (x + set_.asy_init * range).matrix();
    } else {
      const Arr zzz = (x - xold1_.array()) * (xold1_.array() - xold2_.array());
      Arr factor = Arr::Ones(n_);
      for (int i = 0; i < n_; ++i) {
        if (zzz[i] > 0.0) factor[i] = set_.asy_incr;
        else if (zzz[i] < 0.0) factor[i] = set_.asy_decr;
      }
      Arr low = x - factor * (xold1_.array() - low_.array());
      Arr upp = x + factor * (upp_.array() - xold1_.array());
      low = low.max(x - 10.0 * range).min(x - 0.01 * range);
      upp = upp.min(x + 10.0 * range).max(x + 0.01 * range);
      low_ = low.matrix();
      upp_ = upp.matrix();
    }

    Arr alfa = (low_.array() + set_.albefa * (x - low_.array())).max(xmin);
    Arr beta = (upp_.array() - set_.albefa * (upp_.array() - x)).min(xmax);
    if (set_.move_limit > 0.0) {
      alfa = alfa.max(x - set_.move_limit * range);
      beta = beta.min(x + set_.move_limit * range);
    }

    const Arr xmami = range.max(1e-5);
    const Arr ux1 = upp_.array() - x;
    const Arr xl1 = x - low_.array();
    const Arr ux2 = ux1 * ux1;
    const Arr xl2 = xl1 * xl1;

    Arr p0 = df0dx.array().max(0.0);
    Arr q0 = (-df0dx.array()).max(0.0);
    const Arr pq0 = 0.001 * (p0 + q0) + set_.raa0 / xmami;
    p0 = (p0 + pq0) * ux2;
    q0 = (q0 + pq0) * xl2;

    Eigen::MatrixXd P(m_, n_), Q(m_, n_);
    for (int i = 0; i < m_; ++i) {
      const Arr g = dfdx.row(i).transpose().array();
      const Arr pi = g.max(0.0);
      const Arr qi = (-g).max(0.0);
      const Arr pq = 0.001 * (pi + qi) + set_.raa0 / xmami;
      P.row(i) = ((pi + pq) * ux2).matrix().transpose();
      Q.row(i) = ((qi + pq) * xl2).matrix().transpose();
    }
    Vector b = P * (1.0 / ux1).matrix() + Q * (1.0 / xl1).matrix() - fval;

    const Vector a = Vector::Constant(m_, set_.constraint_a);
    const Vector c = Vector::Constant(m_, set_.constraint_c);
    const Vector d = Vector::Constant(m_, set_.constraint_d);

    Vector xnew = subsolv(alfa.matrix(), beta.matrix(), p0.matrix(), q0.matrix(), P, Q, a, b,
                          c, d);

    xold2_ = (iter_ >= 2) ? xold1_ : xval;
    xold1_ = xval;
    return xnew;
  }

 private:
  /// Primal-dual Newton iteration on the MMA subproblem's KKT system,
  /// following the reference algorithm: outer loop shrinks the barrier
  /// epsilon, inner loop drives the residual below 0.9*epsilon with a
  /// fraction-to-boundary line search.
  Vector subsolv(const Vector& alfa, const Vector& beta, const Vector& p0, const Vector& q0,
                 const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q, const Vector& a,
                 const Vector& b, const Vector& c, const Vector& d) {
    using Arr = Eigen::ArrayXd;
    const Arr low = low_.array(), upp = upp_.array();

    Arr x = 0.5 * (alfa.array() + beta.array());
    Vector y = Vector::Ones(m_);
    double z = 1.0;
    Vector lam = Vector::Ones(m_);
    Arr xsi = (1.0 / (x - alfa.array())).max(1.0);
    Arr eta = (1.0 / (beta.array() - x)).max(1.0);
    Vector mu = (0.5 * c.array()).max(1.0).matrix();
    double zet = 1.0;
    Vector s = Vector::Ones(m_);

    double epsi = 1.0;
    while (epsi > set_.epsimin) {
      auto residuals = [&](const Arr& xc, const Vector& yc, double zc, const Vector& lamc,
                           const Arr& xsic, const Arr& etac, const Vector& muc, double zetc,
                           const Vector& sc, double* out_max) -> double {
        const Arr ux1 = upp - xc, xl1 = xc - low;
        const Arr ux2 = ux1 * ux1, xl2 = xl1 * xl1;
        const Arr plam = p0.array() + (P.transpose() * lamc).array();
        const Arr qlam = q0.array() + (Q.transpose() * lamc).array();
        const Vector gvec = P * (1.0 / ux1).matrix() + Q * (1.0 / xl1).matrix();
        const Arr rex = plam / ux2 - qlam / xl2 - xsic + etac;
        const Vector rey = c + d.cwiseProduct(yc) - muc - lamc;
        const double rez = set_.a0 - zetc - a.dot(lamc);
        const Vector relam = gvec - a * zc - yc + sc - b;
        const Arr rexsi = xsic * (xc - alfa.array()) - epsi;
        const Arr reeta = etac * (beta.array() - xc) - epsi;
        const Vector remu = muc.cwiseProduct(yc) - Vector::Constant(m_, epsi);
        const double rezet = zetc * zc - epsi;
        const Vector res = lamc.cwiseProduct(sc) - Vector::Constant(m_, epsi);

        double sq = rex.square().sum() + rey.squaredNorm() + rez * rez +
                    relam.squaredNorm() + rexsi.square().sum() + reeta.square().sum() +
                    remu.squaredNorm() + rezet * rezet + res.squaredNorm();
        double mx = std::max({rex.abs().maxCoeff(), rey.cwiseAbs().maxCoeff(),
                              std::abs(rez), relam.cwiseAbs().maxCoeff(),
                              rexsi.abs().maxCoeff(), reeta.abs().maxCoeff(),
                              remu.cwiseAbs().maxCoeff(), std::abs(rezet),
                              res.cwiseAbs().maxCoeff()});
        if (out_max) *out_max = mx;
        return std::sqrt(sq);
      };

      double residumax = 0.0;
      double residunorm = residuals(x, y, z, lam, xsi, eta, mu, zet, s, &residumax);

      int ittt = 0;
      while (residumax > 0.9 * epsi && ittt < 200) {
        ++ittt;
        const Arr ux1 = upp - x, xl1 = x - low;
        const Arr ux2 = ux1 * ux1, xl2 = xl1 * xl1;
        const Arr ux3 = ux1 * ux2, xl3 = xl1 * xl2;
        const Arr plam = p0.array() + (P.transpose() * lam).array();
        const Arr qlam = q0.array() + (Q.transpose() * lam).array();
        const Vector gvec = P * (1.0 / ux1).matrix() + Q * (1.0 / xl1).matrix();
        Eigen::MatrixXd GG(m_, n_);
        for (int i = 0; i < m_; ++i)
          GG.row(i) = (P.row(i).transpose().array() / ux2 -
                       Q.row(i).transpose().array() / xl2)
                          .matrix()
                          .transpose();

        const Arr delx =
            plam / ux2 - qlam / xl2 - epsi / (x - alfa.array()) + epsi / (beta.array() - x);
        const Vector dely =
            c + d.cwiseProduct(y) - lam - epsi * y.cwiseInverse();
        const double delz = set_.a0 - a.dot(lam) - epsi / z;
        const Vector dellam = gvec - a * z - y - b + epsi * lam.cwiseInverse();

        Arr diagx = plam / ux3 + qlam / xl3;
        diagx = 2.0 * diagx + xsi / (x - alfa.array()) + eta / (beta.array() - x);
        const Vector diagy = d + mu.cwiseQuotient(y);
        const Vector diaglam = s.cwiseQuotient(lam);
        const Vector diaglamyi = diaglam + diagy.cwiseInverse();

        Vector dx(n_), dlam(m_);
        double dz = 0.0;
        if (m_ < n_) {
          const Vector blam =
              dellam + dely.cwiseQuotient(diagy) - GG * (delx / diagx).matrix();
          Eigen::MatrixXd AA(m_ + 1, m_ + 1);
          AA.topLeftCorner(m_, m_) =
              Eigen::MatrixXd(diaglamyi.asDiagonal()) +
              GG * (1.0 / diagx).matrix().asDiagonal() * GG.transpose();
          AA.topRightCorner(m_, 1) = a;
          AA.bottomLeftCorner(1, m_) = a.transpose();
          AA(m_, m_) = -zet / z;
          Vector bb(m_ + 1);
          bb.head(m_) = blam;
          bb[m_] = delz;
          const Vector solut = AA.fullPivLu().solve(bb);
          dlam = solut.head(m_);
          dz = solut[m_];
          dx = (-delx / diagx).matrix() - (GG.transpose() * dlam).cwiseQuotient(diagx.matrix());
        } else {
          const Vector diaglamyiinv = diaglamyi.cwiseInverse();
          const Vector dellamyi = dellam + dely.cwiseQuotient(diagy);
          Eigen::MatrixXd AA(n_ + 1, n_ + 1);
          AA.topLeftCorner(n_, n_) =
              Eigen::MatrixXd(diagx.matrix().asDiagonal()) +
              GG.transpose() * diaglamyiinv.asDiagonal() * GG;
          const Vector axz = -GG.transpose() * a.cwiseProduct(diaglamyiinv);
          AA.topRightCorner(n_, 1) = axz;
          AA.bottomLeftCorner(1, n_) = axz.transpose();
          AA(n_, n_) = zet / z + a.dot(a.cwiseProduct(diaglamyiinv));
          Vector bb(n_ + 1);
          bb.head(n_) = -(delx.matrix() + GG.transpose() * dellamyi.cwiseProduct(diaglamyiinv));
          bb[n_] = -(delz - a.dot(dellamyi.cwiseProduct(diaglamyiinv)));
          const Vector solut = AA.fullPivLu().solve(bb);
          dx = solut.head(n_);
          dz = solut[n_];
          dlam = (GG * dx).cwiseProduct(diaglamyiinv) -
                 dz * a.cwiseProduct(diaglamyiinv) + dellamyi.cwiseProduct(diaglamyiinv);
        }

        const Vector dy = (-dely + dlam).cwiseQuotient(diagy);
        const Arr dxa = dx.array();
        const Arr dxsi =
            -xsi + epsi / (x - alfa.array()) - (xsi * dxa) / (x - alfa.array());
        const Arr deta =
            -eta + epsi / (beta.array() - x) + (eta * dxa) / (beta.array() - x);
        const Vector dmu =
            -mu + epsi * y.cwiseInverse() - mu.cwiseProduct(dy).cwiseQuotient(y);
        const double dzet = -zet + epsi / z - zet * dz / z;
        const Vector ds =
            -s + epsi * lam.cwiseInverse() - s.cwiseProduct(dlam).cwiseQuotient(lam);

        // fraction-to-boundary step bound
        double stminv = 1.0;
        auto bound = [&stminv](double dv, double v) {
          stminv = std::max(stminv, -1.01 * dv / v);
        };
        for (int i = 0; i < m_; ++i) {
          bound(dy[i], y[i]);
          bound(dlam[i], lam[i]);
          bound(dmu[i], mu[i]);
          bound(ds[i], s[i]);
        }
        bound(dz, z);
        bound(dzet, zet);
        for (int i = 0; i < n_; ++i) {
          bound(dxsi[i], xsi[i]);
          bound(deta[i], eta[i]);
          bound(dxa[i], x[i] - alfa[i]);
          bound(-dxa[i], beta[i] - x[i]);
        }
        double steg = 1.0 / stminv;

        const Arr xold = x;
        const Vector yold = y, lamold = lam, muold = mu, sold = s;
        const Arr xsiold = xsi, etaold = eta;
        const double zold = z, zetold = zet;

        double resinew = 2.0 * residunorm;
        int itto = 0;
        while (resinew > residunorm && itto < 50) {
          ++itto;
          x = xold + steg * dxa;
          y = yold + steg * dy;
          z = zold + steg * dz;
          lam = lamold + steg * dlam;
          xsi = xsiold + steg * dxsi;
          eta = etaold + steg * deta;
          mu = muold + steg * dmu;
          zet = zetold + steg * dzet;
          s = sold + steg * ds;
          resinew = residuals(x, y, z, lam, xsi, eta, mu, zet, s, &residumax);
          steg *= 0.5;
        }
        residunorm = resinew;
      }
      epsi *= 0.1;
    }

    z_ = z;
    y_ = y;
    lam_ = lam;
    return x.matrix();
  }

  Vector xmin_, xmax_;
  int m_ = 0;
  int n_ = 0;
  MmaSettings set_;
  int iter_ = 0;
  Vector low_, upp_;
  Vector xold1_, xold2_;
  double z_ = 0.0;
  Vector y_, lam_;
};

}  // namespace vibrato
