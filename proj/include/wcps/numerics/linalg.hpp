#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "wcps/numerics/matrix.hpp"

namespace wcps::numerics {

// LU factorization with partial pivoting, PA = LU.
class Lu {
 public:
  explicit Lu(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    require(lu_.is_square(), ErrorKind::kInvalidInput, "LU of non-square matrix");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    scale_ = lu_.max_abs();
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(perm_[k], perm_[p]);
      }
      const double pivot = lu_(k, k);
      min_pivot_ = std::min(min_pivot_, std::abs(pivot));
      if (pivot == 0.0) continue;
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) / pivot;
        lu_(i, k) = f;
        if (f == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  // Smallest pivot magnitude relative to the largest input entry.
  double relative_min_pivot() const {
    return scale_ == 0.0 ? 0.0 : min_pivot_ / scale_;
  }

  bool singular(double rel_tol = 1e-13) const { return relative_min_pivot() <= rel_tol; }

  Matrix solve(const Matrix& b) const {
    const std::size_t n = lu_.rows();
    require(b.rows() == n, ErrorKind::kInvalidInput, "LU solve shape mismatch");
    require(min_pivot_ > 0.0, ErrorKind::kConditioning, "singular matrix in LU solve");
    Matrix x(n, b.cols());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) x(i, j) = b(perm_[i], j);
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = x(i, j);
        for (std::size_t k = 0; k < i; ++k) s -= lu_(i, k) * x(k, j);
        x(i, j) = s;
      }
      for (std::size_t ii = n; ii-- > 0;) {
        double s = x(ii, j);
        for (std::size_t k = ii + 1; k < n; ++k) s -= lu_(ii, k) * x(k, j);
        x(ii, j) = s / lu_(ii, ii);
      }
    }
    return x;
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double scale_ = 0.0;
  double min_pivot_ = std::numeric_limits<double>::infinity();
};

inline Matrix solve(const Matrix& a, const Matrix& b) { return Lu(a).solve(b); }

inline Matrix inverse(const Matrix& a) { return Lu(a).solve(Matrix::identity(a.rows())); }

// Lower Cholesky factor of a symmetric positive definite matrix, or nullopt.
inline std::optional<Matrix> cholesky(const Matrix& a) {
  require(a.is_square(), ErrorKind::kInvalidInput, "Cholesky of non-square matrix");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return std::nullopt;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline bool is_positive_definite(const Matrix& a) { return cholesky(a).has_value(); }

inline bool is_symmetric(const Matrix& a, double tol = 0.0) {
  if (!a.is_square()) return false;
  const double scale = std::max(1.0, a.max_abs());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = r + 1; c < a.cols(); ++c)
      if (std::abs(a(r, c) - a(c, r)) > tol * scale) return false;
  return true;
}

// Square-root factor L with L·Lᵀ = A for a symmetric PSD matrix, using
// Cholesky with diagonal pivoting. Pivots below tol·max(diag) are treated as
// zero; a remaining negative pivot below -tol·max(diag) means A is not PSD and
// yields nullopt.
inline std::optional<Matrix> psd_factor(const Matrix& a, double tol = 1e-12) {
  require(a.is_square(), ErrorKind::kInvalidInput, "PSD factor of non-square matrix");
  const std::size_t n = a.rows();
  Matrix work = a.symmetrized();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(work(i, i)));
  Matrix l(n, n);
  if (scale == 0.0) {
    // A zero diagonal forces every entry of a PSD matrix to vanish.
    return work.max_abs() == 0.0 ? std::optional<Matrix>(l) : std::nullopt;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  // Right-looking pivoted Cholesky on the permuted matrix.
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (work(perm[i], perm[i]) > work(perm[p], perm[p])) p = i;
    std::swap(perm[k], perm[p]);
    const std::size_t pk = perm[k];
    const double d = work(pk, pk);
    if (d <= tol * scale) {
      for (std::size_t i = k; i < n; ++i) {
        if (work(perm[i], perm[i]) < -tol * scale) return std::nullopt;
        for (std::size_t j = k; j < n; ++j)
          if (std::abs(work(perm[i], perm[j])) > std::sqrt(tol) * scale) return std::nullopt;
      }
      break;
    }
    const double root = std::sqrt(d);
    l(pk, k) = root;
    for (std::size_t i = k + 1; i < n; ++i) l(perm[i], k) = work(perm[i], pk) / root;
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j)
        work(perm[i], perm[j]) -= l(perm[i], k) * l(perm[j], k);
  }
  return l;
}

inline bool is_positive_semidefinite(const Matrix& a, double tol = 1e-12) {
  return psd_factor(a, tol).has_value();
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c)
          k(i * b.rows() + r, j * b.cols() + c) = a(i, j) * b(r, c);
  return k;
}

inline Matrix matrix_power(const Matrix& a, unsigned k) {
  Matrix result = Matrix::identity(a.rows());
  for (unsigned i = 0; i < k; ++i) result = result * a;
  return result;
}

// Matrix exponential by scaling and squaring around a truncated Taylor
// series. The series stops once a term's max-norm falls below 1e-12 times the
// partial sum's.
inline constexpr double kExpmSeriesTolerance = 1e-12;

inline Matrix expm(const Matrix& a) {
  require(a.is_square(), ErrorKind::kInvalidInput, "expm of non-square matrix");
  const std::size_t n = a.rows();
  const double norm = a.norm_inf();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix scaled_a = a * std::ldexp(1.0, -squarings);

  Matrix sum = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k < 64; ++k) {
    term = term * scaled_a * (1.0 / k);
    sum += term;
    if (term.max_abs() <= kExpmSeriesTolerance * std::max(1.0, sum.max_abs())) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

}  // namespace wcps::numerics
