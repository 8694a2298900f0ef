#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wcps/numerics.hpp"
#include "wcps/plant.hpp"

namespace wcps::stability {

// Closed loop of plant, remote predictor/controller and ZOH actuator as a
// linear system with random transition matrix, z = (x, x̂, u, û):
//
//   ⎡ A     0        B      0    ⎤
//   ⎢ θA    (1−θ)A   0      B    ⎥
//   ⎢ 0     φFA      (1−φ)I φFB  ⎥
//   ⎣ 0     FA       0      FB   ⎦
//
// Substituting θ = μ_θ(1−δ_θ), φ = μ_φ(1−δ_φ) with zero-mean δ splits it as
// Ã = Ã₀ + δ_θ·Ã₁ + δ_φ·Ã₂, Var δ = 1/μ − 1.
inline Matrix closed_loop_matrix(const Matrix& A, const Matrix& B, const Matrix& F, double theta,
                                 double phi) {
  const std::size_t n = A.rows(), m = B.cols();
  const Matrix FA = F * A, FB = F * B;
  Matrix t(2 * n + 2 * m, 2 * n + 2 * m);
  const std::size_t x = 0, xh = n, u = 2 * n, uh = 2 * n + m;
  t.set_block(x, x, A);
  t.set_block(x, u, B);
  t.set_block(xh, x, A * theta);
  t.set_block(xh, xh, A * (1.0 - theta));
  t.set_block(xh, uh, B);
  t.set_block(u, xh, FA * phi);
  t.set_block(u, u, Matrix::identity(m) * (1.0 - phi));
  t.set_block(u, uh, FB * phi);
  t.set_block(uh, xh, FA);
  t.set_block(uh, uh, FB);
  return t;
}

struct AugmentedSystem {
  Matrix A, B, F;
  double mu_theta = 1.0, mu_phi = 1.0;
  Matrix A0, A1, A2;
  double sigma2_1 = 0.0, sigma2_2 = 0.0;

  std::size_t n() const noexcept { return A.rows(); }
  std::size_t m() const noexcept { return B.cols(); }
  std::size_t dim() const noexcept { return A0.rows(); }

  // Realization for one round.
  Matrix sample(bool theta, bool phi) const {
    return closed_loop_matrix(A, B, F, theta ? 1.0 : 0.0, phi ? 1.0 : 0.0);
  }

  numerics::CpMap second_moment_map() const {
    return numerics::CpMap({{1.0, A0}, {sigma2_1, A1}, {sigma2_2, A2}});
  }
};

// Two-point law of δ: 1 with probability 1−μ (message lost), 1−1/μ with
// probability μ (delivered).
inline double delta_of(bool delivered, double mu) { return delivered ? 1.0 - 1.0 / mu : 1.0; }

inline AugmentedSystem assemble_augmented(const Matrix& A, const Matrix& B, const Matrix& F,
                                          double mu_theta, double mu_phi) {
  require(A.is_square() && B.rows() == A.rows(), ErrorKind::kInvalidInput,
          "plant dimensions inconsistent");
  require(F.rows() == B.cols() && F.cols() == A.rows(), ErrorKind::kInvalidInput,
          "gain F must be m x n");
  require(mu_theta > 0.0 && mu_theta <= 1.0 && mu_phi > 0.0 && mu_phi <= 1.0,
          ErrorKind::kInvalidInput,
          "delivery probabilities must lie in (0, 1]; with mu = 0 no message is ever delivered "
          "and the loop is open, analyze the plant's own stability instead");
  const std::size_t n = A.rows(), m = B.cols();
  AugmentedSystem s{A, B, F, mu_theta, mu_phi, {}, {}, {}, 1.0 / mu_theta - 1.0,
                    1.0 / mu_phi - 1.0};
  s.A0 = closed_loop_matrix(A, B, F, mu_theta, mu_phi);
  const std::size_t d = 2 * n + 2 * m;
  s.A1 = Matrix(d, d);
  s.A1.set_block(n, 0, A * -mu_theta);
  s.A1.set_block(n, n, A * mu_theta);
  s.A2 = Matrix(d, d);
  const Matrix FA = F * A, FB = F * B;
  s.A2.set_block(2 * n, n, FA * -mu_phi);
  s.A2.set_block(2 * n, 2 * n, Matrix::identity(m) * mu_phi);
  s.A2.set_block(2 * n, 2 * n + m, FB * -mu_phi);
  return s;
}

inline AugmentedSystem assemble_augmented(const plant::SystemModel& model, const Matrix& F,
                                          double mu_theta, double mu_phi) {
  return assemble_augmented(model.A(), model.B(), F, mu_theta, mu_phi);
}

// ---- verdict ----------------------------------------------------------------

enum class MssStatus { kStable, kMarginal, kUnstable };

inline std::string_view to_string(MssStatus s) {
  switch (s) {
    case MssStatus::kStable: return "stable";
    case MssStatus::kMarginal: return "marginal";
    case MssStatus::kUnstable: return "unstable";
  }
  return "unstable";
}

struct MssVerdict {
  bool is_mss = false;
  double rho = 0.0;  // spectral radius of the second-moment operator
  MssStatus status = MssStatus::kUnstable;
  std::optional<Matrix> certificate;  // P with Ã₀ᵀPÃ₀ − P + Σσ²ᵢÃᵢᵀPÃᵢ = −I
};

struct MssOptions {
  double tol = 1e-9;
  numerics::SpectralRadiusOptions radius{};
  bool want_certificate = true;
};

inline double mss_radius(const AugmentedSystem& aug, const numerics::SpectralRadiusOptions& opts = {}) {
  return numerics::cp_map_spectral_radius(aug.second_moment_map(), opts);
}

// Left-hand side of the Lyapunov inequality for a candidate P.
inline Matrix lyapunov_lhs(const AugmentedSystem& aug, const Matrix& P) {
  return aug.second_moment_map()(P) - P;
}

inline MssVerdict check_mss(const AugmentedSystem& aug, const MssOptions& opts = {}) {
  MssVerdict v;
  const auto map = aug.second_moment_map();
  v.rho = numerics::cp_map_spectral_radius(map, opts.radius);
  if (v.rho < 1.0 - opts.tol) {
    v.status = MssStatus::kStable;
  } else if (v.rho <= 1.0 + opts.tol) {
    v.status = MssStatus::kMarginal;
  }
  v.is_mss = v.status == MssStatus::kStable;
  if (v.is_mss && opts.want_certificate) {
    numerics::LyapunovOptions lo;
    lo.known_rho = v.rho;
    v.certificate = numerics::solve_cp_lyapunov(map, Matrix::identity(aug.dim()), lo);
  }
  return v;
}

// ---- critical delivery probability ----------------------------------------------

enum class LossChannel { kTheta, kPhi, kBothEqual };

struct CriticalOptions {
  LossChannel channel = LossChannel::kBothEqual;
  double tol = 1e-6;       // on μ
  double mu_lo = 1e-3;     // lower end of the search interval
  double other_mu = 1.0;   // the fixed probability when only one channel varies
  int grid_points = 32;    // monotonicity scan resolution
  numerics::SpectralRadiusOptions radius{};
};

struct CriticalResult {
  double mu_star = 0.0;
  double rho_at_lo = 0.0;
  double rho_at_one = 0.0;
  int bisection_steps = 0;
};

inline double radius_at(const Matrix& A, const Matrix& B, const Matrix& F, double mu,
                        const CriticalOptions& o) {
  double mt = mu, mp = mu;
  if (o.channel == LossChannel::kTheta) mp = o.other_mu;
  if (o.channel == LossChannel::kPhi) mt = o.other_mu;
  return mss_radius(assemble_augmented(A, B, F, mt, mp), o.radius);
}

// Boundary μ* where ρ crosses 1 on [μ_lo, 1]. A grid scan first checks that
// the verdict switches exactly once; bisection then refines the crossing
// cell down to tol.
inline CriticalResult critical_probability(const Matrix& A, const Matrix& B, const Matrix& F,
                                           const CriticalOptions& o = {}) {
  require(o.mu_lo > 0.0 && o.mu_lo < 1.0, ErrorKind::kInvalidInput, "mu_lo must lie in (0, 1)");
  require(o.tol > 0.0, ErrorKind::kInvalidInput, "tol must be positive");
  require(o.grid_points >= 2, ErrorKind::kInvalidInput, "grid needs at least two points");
  require(o.other_mu > 0.0 && o.other_mu <= 1.0, ErrorKind::kInvalidInput,
          "other_mu must lie in (0, 1]");
  CriticalResult r;
  r.rho_at_one = radius_at(A, B, F, 1.0, o);
  r.rho_at_lo = radius_at(A, B, F, o.mu_lo, o);
  if (!(r.rho_at_one < 1.0) || r.rho_at_lo < 1.0)
    fail(ErrorKind::kBracket, "no stability crossing on [" + std::to_string(o.mu_lo) +
                                  ", 1]: rho(mu_lo) = " + std::to_string(r.rho_at_lo) +
                                  ", rho(1) = " + std::to_string(r.rho_at_one));

  // Grid from μ_lo to 1; verdicts must read unstable...unstable, stable...stable.
  double lo = o.mu_lo, hi = 1.0;
  bool seen_stable = false;
  for (int i = 1; i < o.grid_points; ++i) {
    const double mu = o.mu_lo + (1.0 - o.mu_lo) * i / o.grid_points;
    const bool stable = radius_at(A, B, F, mu, o) < 1.0;
    if (stable && !seen_stable) {
      hi = mu;
      seen_stable = true;
    } else if (!stable && seen_stable) {
      fail(ErrorKind::kAnalysis, "stability verdict is not monotone in mu (unstable again at mu = " +
                                     std::to_string(mu) + ")");
    } else if (!stable) {
      lo = mu;
    }
  }

  while (hi - lo > o.tol) {
    const double mid = 0.5 * (lo + hi);
    (radius_at(A, B, F, mid, o) < 1.0 ? hi : lo) = mid;
    ++r.bisection_steps;
  }
  r.mu_star = 0.5 * (lo + hi);
  return r;
}

inline CriticalResult critical_probability(const plant::SystemModel& model, const Matrix& F,
                                           const CriticalOptions& o = {}) {
  return critical_probability(model.A(), model.B(), F, o);
}

}  // namespace wcps::stability
