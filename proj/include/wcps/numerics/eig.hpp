#pragma once

#include <algorithm>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "wcps/numerics/matrix.hpp"

namespace wcps::numerics {

// Largest dimension accepted by eig.
inline constexpr std::size_t kEigMaxDimension = 256;

// Eigenvalues of a real square matrix via Eigen's real Schur based solver.
// Sorted by descending magnitude, ties broken by real then imaginary part.
inline std::vector<std::complex<double>> eig(const Matrix& a) {
  require(a.is_square(), ErrorKind::kInvalidInput, "eig of non-square matrix " + a.shape());
  require(a.rows() <= kEigMaxDimension, ErrorKind::kInvalidInput,
          "eig dimension exceeds cap of " + std::to_string(kEigMaxDimension));
  const auto n = static_cast<Eigen::Index>(a.rows());
  if (n == 0) return {};
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = a(r, c);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  require(solver.info() == Eigen::Success, ErrorKind::kDiverged, "eigenvalue iteration failed");
  std::vector<std::complex<double>> values(solver.eigenvalues().begin(),
                                           solver.eigenvalues().end());
  std::sort(values.begin(), values.end(), [](const auto& x, const auto& y) {
    if (std::abs(x) != std::abs(y)) return std::abs(x) > std::abs(y);
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  return values;
}

inline double spectral_radius(const Matrix& a) {
  double r = 0.0;
  for (const auto& v : eig(a)) r = std::max(r, std::abs(v));
  return r;
}

}  // namespace wcps::numerics
