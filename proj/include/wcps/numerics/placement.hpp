#pragma once

#include <complex>
#include <vector>

#include "wcps/numerics/linalg.hpp"

namespace wcps::numerics {

using Complex = std::complex<double>;

// Real coefficients c of the monic polynomial Π(z − pᵢ), highest power first:
// z^n + c[1] z^{n-1} + ... + c[n]. Rejects pole lists not closed under
// conjugation.
inline std::vector<double> characteristic_polynomial(const std::vector<Complex>& poles) {
  constexpr double kPairTol = 1e-9;
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i]) continue;
    const double scale = std::max(1.0, std::abs(poles[i]));
    if (std::abs(poles[i].imag()) <= kPairTol * scale) {
      used[i] = true;
      continue;
    }
    bool matched = false;
    for (std::size_t j = i + 1; j < poles.size() && !matched; ++j) {
      if (!used[j] && std::abs(poles[j] - std::conj(poles[i])) <= kPairTol * scale) {
        used[i] = used[j] = true;
        matched = true;
      }
    }
    require(matched, ErrorKind::kInvalidInput, "pole list is not closed under conjugation");
  }

  std::vector<Complex> coeffs{1.0};
  for (const auto& p : poles) {
    std::vector<Complex> next(coeffs.size() + 1, 0.0);
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      next[k] += coeffs[k];
      next[k + 1] -= p * coeffs[k];
    }
    coeffs = std::move(next);
  }
  std::vector<double> real(coeffs.size());
  for (std::size_t k = 0; k < coeffs.size(); ++k) real[k] = coeffs[k].real();
  return real;
}

// p(A) by Horner's rule.
inline Matrix polynomial_of_matrix(const std::vector<double>& coeffs, const Matrix& A) {
  Matrix result = Matrix::zeros(A.rows(), A.cols());
  const Matrix I = Matrix::identity(A.rows());
  for (double c : coeffs) result = result * A + I * c;
  return result;
}

inline Matrix controllability_matrix(const Matrix& A, const Matrix& b) {
  const std::size_t n = A.rows();
  Matrix C(n, n * b.cols());
  Matrix col = b;
  for (std::size_t k = 0; k < n; ++k) {
    C.set_block(0, k * b.cols(), col);
    col = A * col;
  }
  return C;
}

// Single-input pole placement by Ackermann's formula:
//   F = −[0 … 0 1] C⁻¹ p(A),  C = [b, Ab, …, A^{n−1}b],
// so that A + bF has the desired characteristic polynomial p.
inline Matrix ackermann_place(const Matrix& A, const Matrix& b, const std::vector<Complex>& poles) {
  const std::size_t n = A.rows();
  require(A.is_square(), ErrorKind::kInvalidInput, "A must be square");
  require(b.rows() == n && b.cols() == 1, ErrorKind::kInvalidInput,
          "pole placement requires a single-input n x 1 b");
  require(poles.size() == n, ErrorKind::kInvalidInput,
          "need exactly " + std::to_string(n) + " poles, got " + std::to_string(poles.size()));
  const auto coeffs = characteristic_polynomial(poles);

  const Matrix C = controllability_matrix(A, b);
  // Columns of C scale like powers of ‖A‖; equilibrate before judging rank.
  Matrix Cs = C;
  std::vector<double> col_scale(n, 1.0);
  for (std::size_t c = 0; c < n; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m = std::max(m, std::abs(C(r, c)));
    require(m > 0.0, ErrorKind::kUncontrollable, "controllability matrix has a zero column");
    col_scale[c] = m;
    for (std::size_t r = 0; r < n; ++r) Cs(r, c) /= m;
  }
  const Lu lu(Cs.transpose());
  require(!lu.singular(1e-12), ErrorKind::kUncontrollable,
          "controllability matrix is numerically singular");
  // Row vector r = e_nᵀ C⁻¹ solves Cᵀ rᵀ = e_n; with C = Cs·D, r = e_nᵀ D⁻¹ Cs⁻¹
  // hence Csᵀ rᵀ = D⁻¹ e_n.
  Matrix rhs(n, 1);
  rhs(n - 1, 0) = 1.0 / col_scale[n - 1];
  const Matrix last_row = lu.solve(rhs).transpose();
  return -(last_row * polynomial_of_matrix(coeffs, A));
}

}  // namespace wcps::numerics
