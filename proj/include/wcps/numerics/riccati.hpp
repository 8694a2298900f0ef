#pragma once

#include <cmath>

#include "wcps/numerics/eig.hpp"
#include "wcps/numerics/linalg.hpp"

namespace wcps::numerics {

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

struct DareSolution {
  Matrix P;  // stabilizing Riccati solution
  Matrix F;  // u = F x
  int iterations = 0;
};

// Riccati residual Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA − P.
inline Matrix dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                            const Matrix& P) {
  const Matrix At = A.transpose();
  const Matrix Bt = B.transpose();
  const Matrix BtPA = Bt * P * A;
  const Matrix gain = solve(R + Bt * P * B, BtPA);
  return Q + At * P * A - BtPA.transpose() * gain - P;
}

// Value iteration on the discrete algebraic Riccati equation
//   P ← Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA
// starting from P = Q. Stops when the max-norm change between iterates drops
// below tol·max(1, ‖P‖max); the relative scaling keeps the test meaningful
// for plants whose cost-to-go is large.
inline DareSolution dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                               const DareOptions& opts = {}) {
  const std::size_t n = A.rows();
  const std::size_t m = B.cols();
  require(A.is_square(), ErrorKind::kInvalidInput, "A must be square");
  require(B.rows() == n, ErrorKind::kInvalidInput, "B rows must match A");
  require(Q.rows() == n && Q.cols() == n, ErrorKind::kInvalidInput, "Q must be n x n");
  require(R.rows() == m && R.cols() == m, ErrorKind::kInvalidInput, "R must be m x m");
  require(is_symmetric(Q, 1e-10) && is_positive_semidefinite(Q), ErrorKind::kInvalidInput,
          "Q must be symmetric positive semidefinite");
  require(is_symmetric(R, 1e-10) && is_positive_definite(R), ErrorKind::kInvalidInput,
          "R must be symmetric positive definite");

  const Matrix At = A.transpose();
  const Matrix Bt = B.transpose();
  Matrix P = Q.symmetrized();
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Matrix BtPA = Bt * P * A;
    const Lu lu(R + Bt * P * B);
    if (lu.singular()) fail(ErrorKind::kConditioning, "R + BᵀPB is singular");
    Matrix next = (Q + At * P * A - BtPA.transpose() * lu.solve(BtPA)).symmetrized();
    if (!next.all_finite()) fail(ErrorKind::kDiverged, "Riccati iterate became non-finite");
    const double change = (next - P).max_abs();
    P = std::move(next);
    if (change <= opts.tol * std::max(1.0, P.max_abs())) {
      const Lu final_lu(R + Bt * P * B);
      if (final_lu.singular()) fail(ErrorKind::kConditioning, "R + BᵀPB is singular");
      Matrix F = -final_lu.solve(Bt * P * A);
      return DareSolution{std::move(P), std::move(F), it};
    }
  }
  fail(ErrorKind::kDiverged,
       "Riccati iteration did not converge in " + std::to_string(opts.max_iter) + " iterations");
}

}  // namespace wcps::numerics
