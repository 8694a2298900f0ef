#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "wcps/numerics/linalg.hpp"

namespace wcps::numerics {

struct CpTerm {
  double weight = 0.0;
  Matrix M;
};

// Completely positive map X ↦ Σ wᵢ MᵢᵀXMᵢ on d×d matrices. It is the adjoint
// of the second-moment recursion Z ↦ Σ wᵢ MᵢZMᵢᵀ of a linear system with
// uncorrelated multiplicative noise, and shares its spectrum.
class CpMap {
 public:
  explicit CpMap(std::vector<CpTerm> terms) : terms_(std::move(terms)) {
    require(!terms_.empty(), ErrorKind::kInvalidInput, "CP map needs at least one term");
    dim_ = terms_.front().M.rows();
    for (const auto& t : terms_) {
      require(t.M.is_square() && t.M.rows() == dim_, ErrorKind::kInvalidInput,
              "CP map terms must be square and of equal dimension");
      require(t.weight >= 0.0 && std::isfinite(t.weight), ErrorKind::kInvalidInput,
              "CP map weights must be finite and nonnegative");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<CpTerm>& terms() const noexcept { return terms_; }

  Matrix operator()(const Matrix& X) const {
    Matrix out(dim_, dim_);
    for (const auto& t : terms_) {
      if (t.weight == 0.0) continue;
      out += (t.M.transpose() * X * t.M) * t.weight;
    }
    return out;
  }

 private:
  std::vector<CpTerm> terms_;
  std::size_t dim_ = 0;
};

// Matrix of a CP map restricted to symmetric d×d matrices, in the coordinates
// "upper triangle of X, row by row". Column (a,b) holds T(E_ab + E_ba) (or
// T(E_aa) on the diagonal), so coords(T(X)) = L·coords(X).
class SymmetricRepresentation {
 public:
  explicit SymmetricRepresentation(const CpMap& map) : d_(map.dim()) {
    const std::size_t s = size();
    L_ = Matrix(s, s);
    std::size_t col = 0;
    for (std::size_t a = 0; a < d_; ++a) {
      for (std::size_t b = a; b < d_; ++b, ++col) {
        Matrix E(d_, d_);
        E(a, b) = 1.0;
        E(b, a) = 1.0;
        const Vector y = coords(map(E));
        for (std::size_t r = 0; r < s; ++r) L_(r, col) = y[r];
      }
    }
  }

  std::size_t dim() const noexcept { return d_; }
  std::size_t size() const noexcept { return d_ * (d_ + 1) / 2; }
  const Matrix& matrix() const noexcept { return L_; }

  Vector coords(const Matrix& X) const {
    Vector v;
    v.reserve(size());
    for (std::size_t a = 0; a < d_; ++a)
      for (std::size_t b = a; b < d_; ++b) v.push_back(0.5 * (X(a, b) + X(b, a)));
    return v;
  }

  Matrix from_coords(const Vector& v) const {
    Matrix X(d_, d_);
    std::size_t i = 0;
    for (std::size_t a = 0; a < d_; ++a)
      for (std::size_t b = a; b < d_; ++b, ++i) X(a, b) = X(b, a) = v[i];
    return X;
  }

 private:
  std::size_t d_;
  Matrix L_;
};

struct SpectralRadiusOptions {
  double tol = 1e-12;          // residual target ‖T(X) − ρX‖_F ≤ tol·ρ of the refinement
  int max_squarings = 200;     // K = 2^j never needs more than this in double range
  int refine_iterations = 5000;
};

struct SpectralRadiusResult {
  double rho = 0.0;
  Matrix eigenvector;  // PSD, unit Frobenius norm
  int iterations = 0;  // squarings plus refinement steps
  bool refined = false;
};

namespace detail {

using WideMatrix = std::vector<long double>;

inline WideMatrix wide_square(const WideMatrix& a, std::size_t s) {
  WideMatrix out(s * s, 0.0L);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t k = 0; k < s; ++k) {
      const long double aik = a[i * s + k];
      if (aik == 0.0L) continue;
      for (std::size_t j = 0; j < s; ++j) out[i * s + j] += aik * a[k * s + j];
    }
  return out;
}

}  // namespace detail

// Spectral radius of a CP map by power iteration from the identity.
//
// Phase 1 uses ρ = lim ‖T^K(I)‖^{1/K}. For a positive map every symmetric X
// satisfies ‖T^K(X)‖ ≤ c‖X‖·‖T^K(I)‖, so the limit is exact even when the
// dominant eigenvalue is defective, complex-peripheral or nearly repeated,
// where one-step iteration stalls. K doubles every step by squaring the
// representation L, normalized, with the scale kept in log form:
//   L^{2^j} = s_j·N_j,   log ρ_j = (log s_j + log ‖N_j·coords(I)‖) / 2^j.
// Squaring is done in extended precision: with an ill-conditioned Perron
// root the rounding bias grows with the square of its condition number.
//
// Phase 2 polishes the result with one-step iteration X ← (T + ρI)X from
// the phase-1 iterate (the shift damps peripheral rotation) and keeps it
// when the residual test passes; otherwise the phase-1 value stands.
inline SpectralRadiusResult cp_map_spectral_radius_detail(const CpMap& map,
                                                          const SpectralRadiusOptions& opts = {}) {
  const SymmetricRepresentation rep(map);
  const std::size_t s = rep.size();
  const Vector v0 = rep.coords(Matrix::identity(rep.dim()));
  detail::WideMatrix N(rep.matrix().data().begin(), rep.matrix().data().end());
  long double log_scale = 0.0L;
  double rho = -1.0;
  Vector y(s);
  int stable_steps = 0, j = 0;
  for (;; ++j) {
    require(j <= opts.max_squarings, ErrorKind::kDiverged,
            "spectral radius estimate did not settle within " +
                std::to_string(opts.max_squarings) + " squarings");
    if (j > 0) N = detail::wide_square(N, s);
    long double nmax = 0.0L;
    for (long double e : N) nmax = std::max(nmax, std::abs(e));
    if (nmax == 0.0L) return {0.0, Matrix(rep.dim(), rep.dim()), j, false};
    if (!std::isfinite(static_cast<double>(std::log(nmax))))
      fail(ErrorKind::kNumerical, "operator squaring overflowed");
    for (long double& e : N) e /= nmax;
    log_scale = (j > 0 ? 2.0L * log_scale : 0.0L) + std::log(nmax);
    long double ymax = 0.0L;
    for (std::size_t r = 0; r < s; ++r) {
      long double acc = 0.0L;
      for (std::size_t c = 0; c < s; ++c) acc += N[r * s + c] * v0[c];
      y[r] = static_cast<double>(acc);
      ymax = std::max(ymax, std::abs(acc));
    }
    if (ymax == 0.0L) return {0.0, Matrix(rep.dim(), rep.dim()), j, false};
    const double next =
        static_cast<double>(std::exp(std::ldexp(log_scale + std::log(ymax), -j)));
    stable_steps = std::abs(next - rho) <= 1e-15 * next ? stable_steps + 1 : 0;
    rho = next;
    if (stable_steps >= 2) break;
  }

  Matrix X = rep.from_coords(y);
  X *= 1.0 / X.norm_fro();
  SpectralRadiusResult out{rho, X, j, false};
  double est = rho;
  for (int it = 0; it < opts.refine_iterations; ++it) {
    const Matrix TX = map(X).symmetrized();
    est = dot(X, TX);
    if ((TX - X * est).norm_fro() <= opts.tol * std::max(est, 1e-300)) {
      out.rho = est;
      out.eigenvector = X;
      out.iterations += it + 1;
      out.refined = true;
      break;
    }
    Matrix next = TX + X * est;
    const double norm = next.norm_fro();
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    X = next * (1.0 / norm);
  }
  return out;
}

inline double cp_map_spectral_radius(const CpMap& map, const SpectralRadiusOptions& opts = {}) {
  return cp_map_spectral_radius_detail(map, opts).rho;
}

struct LyapunovOptions {
  double rel_tol = 1e-16;
  int max_doublings = 200;
  SpectralRadiusOptions radius{};
  // Skips the radius computation when the caller already has it.
  std::optional<double> known_rho{};
};

// Unique solution of P = T(P) + Q for a CP map with spectral radius below one,
// the series Σ_k T^k(Q) summed by doubling:
//   p ← p + G·p,  G ← G²   (G = L initially)
// so after j steps p holds the first 2^j terms. P is symmetric and, for
// Q ≻ 0, positive definite.
inline Matrix solve_cp_lyapunov(const CpMap& map, const Matrix& Q, const LyapunovOptions& opts = {}) {
  require(Q.is_square() && Q.rows() == map.dim(), ErrorKind::kInvalidInput,
          "Q must match the CP map dimension");
  require(is_symmetric(Q, 1e-12), ErrorKind::kInvalidInput, "Q must be symmetric");
  require(is_positive_definite(Q), ErrorKind::kInvalidInput, "Q must be positive definite");
  const double rho = opts.known_rho ? *opts.known_rho : cp_map_spectral_radius(map, opts.radius);
  require(rho < 1.0, ErrorKind::kInfeasible,
          "CP map spectral radius " + std::to_string(rho) + " >= 1, no certificate exists");

  const SymmetricRepresentation rep(map);
  Vector p = rep.coords(Q);
  Matrix G = rep.matrix();
  for (int j = 0; j <= opts.max_doublings; ++j) {
    const Vector tail = G * p;
    double tail_max = 0.0, p_max = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tail_max = std::max(tail_max, std::abs(tail[i]));
      p_max = std::max(p_max, std::abs(p[i]));
    }
    if (!std::isfinite(tail_max)) fail(ErrorKind::kNumerical, "Lyapunov doubling overflowed");
    if (tail_max <= opts.rel_tol * p_max) {
      Matrix P = rep.from_coords(p);
      require(is_positive_definite(P), ErrorKind::kNumerical,
              "Lyapunov solution failed the positive definiteness check");
      return P;
    }
    p = add(p, tail);
    G = G * G;
  }
  fail(ErrorKind::kDiverged, "Lyapunov doubling did not converge");
}

}  // namespace wcps::numerics
