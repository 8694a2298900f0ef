#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "wcps/numerics.hpp"
#include "wcps/plant.hpp"

namespace wcps::controller {

// Remote predictor/controller. The controller sees y(k−1) one round late and
// its command takes one more round to reach the actuator, so it keeps
//   x_hat       x̂(k), the predicted current state
//   u_hat       û(k), the command sent last round (now arriving at the plant)
//   u_hat_prev  û(k−1), the command that produced x(k) if it was delivered
class ControllerState {
 public:
  ControllerState(Matrix A, Matrix B, Matrix F)
      : A_(std::move(A)), B_(std::move(B)), F_(std::move(F)) {
    require(A_.is_square() && B_.rows() == A_.rows(), ErrorKind::kInvalidInput,
            "controller model dimensions inconsistent");
    require(F_.rows() == B_.cols() && F_.cols() == A_.rows(), ErrorKind::kInvalidInput,
            "gain F must be m x n");
    x_hat_.assign(A_.rows(), 0.0);
    u_hat_.assign(B_.cols(), 0.0);
    u_hat_prev_.assign(B_.cols(), 0.0);
  }

  ControllerState(const plant::SystemModel& model, Matrix F)
      : ControllerState(model.A(), model.B(), std::move(F)) {}

  std::size_t n() const noexcept { return A_.rows(); }
  std::size_t m() const noexcept { return B_.cols(); }
  const Matrix& A() const noexcept { return A_; }
  const Matrix& B() const noexcept { return B_; }
  const Matrix& F() const noexcept { return F_; }
  const Vector& x_hat() const noexcept { return x_hat_; }
  const Vector& u_hat() const noexcept { return u_hat_; }
  const Vector& u_hat_prev() const noexcept { return u_hat_prev_; }

  void set_x_hat(Vector v) { x_hat_ = checked(std::move(v), n(), "x_hat"); }
  void set_u_hat(Vector v) { u_hat_ = checked(std::move(v), m(), "u_hat"); }
  void set_u_hat_prev(Vector v) { u_hat_prev_ = checked(std::move(v), m(), "u_hat_prev"); }

 private:
  static Vector checked(Vector v, std::size_t size, const char* what) {
    require(v.size() == size, ErrorKind::kInvalidInput, std::string(what) + " has wrong dimension");
    for (double e : v) require(std::isfinite(e), ErrorKind::kNumerical, std::string(what) + " not finite");
    return v;
  }

  Matrix A_, B_, F_;
  Vector x_hat_, u_hat_, u_hat_prev_;
};

// x̂(k) = θ·A·y(k−1) + (1−θ)·A·x̂(k−1) + B·û(k−1)
inline const Vector& predict(ControllerState& s, bool theta,
                             const std::optional<Vector>& y_prev = std::nullopt) {
  require(theta == y_prev.has_value(), ErrorKind::kContractViolation,
          theta ? "theta = 1 but no measurement was delivered"
                : "measurement supplied with theta = 0");
  const Vector& base = theta ? *y_prev : s.x_hat();
  require(base.size() == s.n(), ErrorKind::kInvalidInput, "measurement has wrong dimension");
  s.set_x_hat(add(s.A() * base, s.B() * s.u_hat_prev()));
  return s.x_hat();
}

// û(k+1) = F·(A·x̂(k) + B·û(k)); shifts û(k) into the previous-input slot.
inline const Vector& compute_input(ControllerState& s) {
  Vector next = s.F() * add(s.A() * s.x_hat(), s.B() * s.u_hat());
  s.set_u_hat_prev(s.u_hat());
  s.set_u_hat(std::move(next));
  return s.u_hat();
}

// ---- gain design ----------------------------------------------------------

struct PolePlacement {
  std::vector<numerics::Complex> poles;

  friend bool operator==(const PolePlacement&, const PolePlacement&) = default;
};

struct Lqr {
  Matrix Q;
  Matrix R;

  friend bool operator==(const Lqr&, const Lqr&) = default;
};

using DesignMethod = std::variant<PolePlacement, Lqr>;

inline Matrix design_stabilizing_gain(const plant::SystemModel& model, const DesignMethod& method,
                                      const numerics::DareOptions& dare = {}) {
  Matrix F = std::visit(
      [&](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PolePlacement>) {
          return numerics::ackermann_place(model.A(), model.B(), m.poles);
        } else {
          return numerics::dare_solve(model.A(), model.B(), m.Q, m.R, dare).F;
        }
      },
      method);
  const double rho = numerics::spectral_radius(model.A() + model.B() * F);
  require(rho < 1.0, ErrorKind::kInvalidInput,
          "designed gain is not stabilizing: rho(A+BF) = " + std::to_string(rho));
  return F;
}

// ---- synchronization design ---------------------------------------------------

struct SyncWeights {
  std::vector<Matrix> Q_list;  // per-agent state weights, PSD
  std::vector<Matrix> R_list;  // per-agent input weights, PD
  Matrix Q_sync;               // penalty on pairwise state differences, PSD
};

// Block gain for u_i = Σ_j F_ij x_j.
struct SyncGains {
  Matrix F;
  std::vector<std::size_t> state_offset, input_offset;
  std::vector<std::size_t> n, m;

  std::size_t agents() const noexcept { return n.size(); }
  Matrix block(std::size_t i, std::size_t j) const {
    return F.block(input_offset[i], state_offset[j], m[i], n[j]);
  }
};

// Augmented state weight: Q_i + (N−1)·Q_sync on the diagonal, −Q_sync off
// it. Equals Σ_i xᵢᵀQᵢxᵢ + Σ_{i<j} (xᵢ−xⱼ)ᵀQ_sync(xᵢ−xⱼ); for two agents this
// is the familiar [[Q₁+Q_s, −Q_s], [−Q_s, Q₂+Q_s]].
inline Matrix sync_state_weight(const SyncWeights& w) {
  const std::size_t N = w.Q_list.size();
  require(N >= 2, ErrorKind::kInvalidInput, "synchronization needs at least two agents");
  const std::size_t d = w.Q_sync.rows();
  require(w.Q_sync.is_square(), ErrorKind::kInvalidInput, "Q_sync must be square");
  for (const auto& q : w.Q_list)
    require(q.rows() == d && q.cols() == d, ErrorKind::kInvalidInput,
            "all Q_i must match Q_sync's dimension");
  Matrix Q(N * d, N * d);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      const Matrix blk = i == j ? w.Q_list[i] + w.Q_sync * double(N - 1) : -w.Q_sync;
      Q.set_block(i * d, j * d, blk);
    }
  }
  return Q;
}

inline SyncGains design_sync_gains(std::span<const plant::SystemModel> models, const SyncWeights& w,
                                   const numerics::DareOptions& dare = {}) {
  const std::size_t N = models.size();
  require(N >= 2, ErrorKind::kInvalidInput, "synchronization needs at least two agents");
  require(w.Q_list.size() == N && w.R_list.size() == N, ErrorKind::kInvalidInput,
          "need one Q_i and one R_i per agent");
  for (const auto& mdl : models)
    require(mdl.n() == models[0].n(), ErrorKind::kInvalidInput,
            "synchronized agents must share the state dimension");
  require(numerics::is_symmetric(w.Q_sync, 1e-10), ErrorKind::kInvalidInput,
          "Q_sync must be symmetric");

  const Matrix Q = sync_state_weight(w);
  require(numerics::is_symmetric(Q, 1e-10) && numerics::is_positive_semidefinite(Q),
          ErrorKind::kInvalidInput, "augmented synchronization weight is not PSD");

  SyncGains g;
  std::vector<Matrix> As, Bs;
  std::size_t xo = 0, uo = 0;
  for (std::size_t i = 0; i < N; ++i) {
    require(w.R_list[i].rows() == models[i].m() && w.R_list[i].cols() == models[i].m(),
            ErrorKind::kInvalidInput, "R_i must be m_i x m_i");
    As.push_back(models[i].A());
    Bs.push_back(models[i].B());
    g.n.push_back(models[i].n());
    g.m.push_back(models[i].m());
    g.state_offset.push_back(xo);
    g.input_offset.push_back(uo);
    xo += models[i].n();
    uo += models[i].m();
  }
  const Matrix R = block_diagonal(w.R_list);
  g.F = numerics::dare_solve(block_diagonal(As), block_diagonal(Bs), Q, R, dare).F;
  return g;
}

}  // namespace wcps::controller
