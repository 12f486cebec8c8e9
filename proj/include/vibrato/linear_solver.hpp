#pragma once

#include "vibrato/common.hpp"

#include <Eigen/SparseLU>

#include <memory>

namespace vibrato {

/// Sparse LU factorization reused across many solves, with transpose-solve
/// support for the adjoint. Right-hand sides are masked on clamped DOFs so
/// Dirichlet values come out exactly zero, and one step of iterative
/// refinement runs whenever the relative residual exceeds 1e-10.
class FactorizedOperator {
 public:
  FactorizedOperator() = default;

  void compute(const SparseMatrix& A, const std::vector<char>& clamped) {
    A_ = A;
    clamped_ = clamped;
    lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
    lu_->compute(A_);
    require(lu_->info() == Eigen::Success, "linear solver: factorization failed");
  }

  bool valid() const { return lu_ != nullptr; }
  const SparseMatrix& matrix() const { return A_; }

  Vector solve(const Vector& rhs) const {
    Vector b = masked(rhs);
    Vector x = lu_->solve(b);
    const double bn = b.norm();
    if (bn > 0.0) {
      const Vector r = b - A_ * x;
      if (r.norm() > 1e-10 * bn) x += lu_->solve(r);
    }
    return x;
  }

  Vector solve_transpose(const Vector& rhs) const {
    Vector b = masked(rhs);
    Vector x = lu_->transpose().solve(b);
    const double bn = b.norm();
    if (bn > 0.0) {
      const Vector r = b - A_.transpose() * x;
      if (r.norm() > 1e-10 * bn) x += lu_->transpose().solve(r);
    }
    return x;
  }

 private:
  Vector masked(const Vector& rhs) const {
    Vector b = rhs;
    for (std::size_t d = 0; d < clamped_.size(); ++d)
      if (clamped_[d]) b[static_cast<Eigen::Index>(d)] = 0.0;
    return b;
  }

  SparseMatrix A_;
  std::vector<char> clamped_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
};

}  // namespace vibrato
