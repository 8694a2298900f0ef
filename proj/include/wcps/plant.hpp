#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "wcps/numerics.hpp"
#include "wcps/rng.hpp"

namespace wcps::plant {

// Discrete-time LTI plant
//   x(k+1) = A x(k) + B u(k) + v(k),  v ~ N(0, Σ_proc)
//   y(k)   = x(k) + w(k),             w ~ N(0, Σ_meas)
// with optional per-channel input saturation and state abort bounds.
class SystemModel {
 public:
  SystemModel() = default;

  SystemModel(Matrix A, Matrix B, Matrix sigma_proc, Matrix sigma_meas,
              std::optional<Vector> input_limit = std::nullopt,
              std::optional<Vector> state_abort_bounds = std::nullopt)
      : A_(std::move(A)),
        B_(std::move(B)),
        sigma_proc_(std::move(sigma_proc)),
        sigma_meas_(std::move(sigma_meas)),
        input_limit_(std::move(input_limit)),
        state_abort_bounds_(std::move(state_abort_bounds)) {
    const std::size_t n = A_.rows();
    require(A_.is_square() && n > 0, ErrorKind::kInvalidInput, "A must be square and non-empty");
    require(B_.rows() == n && B_.cols() > 0, ErrorKind::kInvalidInput, "B must be n x m, m > 0");
    require(sigma_proc_.rows() == n && sigma_proc_.cols() == n, ErrorKind::kInvalidInput,
            "process noise covariance must be n x n");
    require(sigma_meas_.rows() == n && sigma_meas_.cols() == n, ErrorKind::kInvalidInput,
            "measurement noise covariance must be n x n");
    require(numerics::is_symmetric(sigma_proc_, 1e-12) && numerics::is_symmetric(sigma_meas_, 1e-12),
            ErrorKind::kInvalidInput, "noise covariances must be symmetric");
    auto proc = numerics::psd_factor(sigma_proc_);
    auto meas = numerics::psd_factor(sigma_meas_);
    require(proc && meas, ErrorKind::kInvalidInput, "noise covariances must be PSD");
    proc_factor_ = std::move(*proc);
    meas_factor_ = std::move(*meas);
    if (input_limit_) {
      require(input_limit_->size() == B_.cols(), ErrorKind::kInvalidInput,
              "input_limit needs one entry per input channel");
      for (double l : *input_limit_)
        require(l > 0.0, ErrorKind::kInvalidInput, "input_limit entries must be positive");
    }
    if (state_abort_bounds_) {
      require(state_abort_bounds_->size() == n, ErrorKind::kInvalidInput,
              "state_abort_bounds needs one entry per state");
      for (double l : *state_abort_bounds_)
        require(l > 0.0, ErrorKind::kInvalidInput, "state_abort_bounds entries must be positive");
    }
  }

  static SystemModel noiseless(Matrix A, Matrix B) {
    const std::size_t n = A.rows();
    return SystemModel(std::move(A), std::move(B), Matrix(n, n), Matrix(n, n));
  }

  std::size_t n() const noexcept { return A_.rows(); }
  std::size_t m() const noexcept { return B_.cols(); }
  const Matrix& A() const noexcept { return A_; }
  const Matrix& B() const noexcept { return B_; }
  const Matrix& sigma_proc() const noexcept { return sigma_proc_; }
  const Matrix& sigma_meas() const noexcept { return sigma_meas_; }
  const Matrix& proc_factor() const noexcept { return proc_factor_; }
  const Matrix& meas_factor() const noexcept { return meas_factor_; }
  const std::optional<Vector>& input_limit() const noexcept { return input_limit_; }
  const std::optional<Vector>& state_abort_bounds() const noexcept { return state_abort_bounds_; }

  bool has_process_noise() const { return sigma_proc_.max_abs() > 0.0; }
  bool has_measurement_noise() const { return sigma_meas_.max_abs() > 0.0; }

  SystemModel with_noise(Matrix sigma_proc, Matrix sigma_meas) const {
    return SystemModel(A_, B_, std::move(sigma_proc), std::move(sigma_meas), input_limit_,
                       state_abort_bounds_);
  }

  SystemModel with_limits(std::optional<Vector> input_limit,
                          std::optional<Vector> state_abort_bounds) const {
    return SystemModel(A_, B_, sigma_proc_, sigma_meas_, std::move(input_limit),
                       std::move(state_abort_bounds));
  }

  friend bool operator==(const SystemModel& a, const SystemModel& b) {
    return a.A_ == b.A_ && a.B_ == b.B_ && a.sigma_proc_ == b.sigma_proc_ &&
           a.sigma_meas_ == b.sigma_meas_ && a.input_limit_ == b.input_limit_ &&
           a.state_abort_bounds_ == b.state_abort_bounds_;
  }

 private:
  Matrix A_, B_, sigma_proc_, sigma_meas_;
  Matrix proc_factor_, meas_factor_;
  std::optional<Vector> input_limit_;
  std::optional<Vector> state_abort_bounds_;
};

// Noise generators owned by one simulation.
struct PlantNoise {
  rng::NormalSource process;
  rng::NormalSource measurement;

  explicit PlantNoise(std::uint64_t seed, std::uint64_t stream_offset = 0)
      : process(seed, rng::kProcessNoise + stream_offset),
        measurement(seed, rng::kMeasurementNoise + stream_offset) {}
};

// L·ξ with ξ ~ N(0, I); no draws are consumed when L is zero.
inline Vector correlated_gaussian(const Matrix& factor, rng::NormalSource& source) {
  const std::size_t n = factor.rows();
  Vector out(n, 0.0);
  if (factor.max_abs() == 0.0) return out;
  Vector xi(factor.cols());
  for (double& v : xi) v = source();
  return factor * xi;
}

inline Vector measure(const SystemModel& model, std::span<const double> x, PlantNoise& noise) {
  return add(x, correlated_gaussian(model.meas_factor(), noise.measurement));
}

struct StepResult {
  Vector x_next;
  Vector y;  // measurement of x_next
};

inline StepResult step(const SystemModel& model, std::span<const double> x,
                       std::span<const double> u, PlantNoise& noise) {
  require(x.size() == model.n() && u.size() == model.m(), ErrorKind::kInvalidInput,
          "state/input dimension mismatch in plant step");
  Vector x_next = add(model.A() * x, model.B() * u);
  x_next = add(x_next, correlated_gaussian(model.proc_factor(), noise.process));
  Vector y = measure(model, x_next, noise);
  return {std::move(x_next), std::move(y)};
}

// Componentwise clamp; returns true when any channel was limited.
inline bool clamp_to_limit(Vector& u, const std::optional<Vector>& limit) {
  if (!limit) return false;
  bool clamped = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double l = (*limit)[i];
    const double c = std::clamp(u[i], -l, l);
    clamped |= c != u[i];
    u[i] = c;
  }
  return clamped;
}

struct Actuation {
  Vector u;
  bool saturated = false;
};

// Zero-order hold at the actuator: the received command when it arrived
// (φ = 1), otherwise the previous input; then saturation.
inline Actuation zoh_actuate(bool phi, std::span<const double> u_hat_received,
                             std::span<const double> u_prev,
                             const std::optional<Vector>& input_limit = std::nullopt) {
  require(u_hat_received.size() == u_prev.size(), ErrorKind::kInvalidInput,
          "ZOH input dimension mismatch");
  const auto src = phi ? u_hat_received : u_prev;
  Actuation a{Vector(src.begin(), src.end()), false};
  a.saturated = clamp_to_limit(a.u, input_limit);
  return a;
}

// ---- cart-pole ------------------------------------------------------------

// Motor-driven cart with a uniform rod pendulum. State (s, θ, ṡ, θ̇) in
// (m, rad, m/s, rad/s); input is motor voltage. θ is measured from upright
// and positive toward +s. The drive produces force M·(motor_gain·V −
// damping·ṡ) on the cart.
//
// Defaults approximate a benchtop linear-track cart-pole (heavy cart with a
// long pendulum). They are artifact choices, not manufacturer data.
struct CartPoleParams {
  double cart_mass = 0.94;      // kg
  double pole_mass = 0.23;      // kg
  double pole_length = 0.3302;  // m, pivot to center of mass
  double gravity = 9.81;        // m/s²
  double motor_gain = 1.8;      // (m/s²)/V
  double damping = 8.0;         // 1/s
  double sample_time = 0.04;    // s

  void validate() const {
    require(cart_mass > 0 && pole_mass > 0 && pole_length > 0 && motor_gain > 0,
            ErrorKind::kInvalidInput, "cart-pole masses, length and motor gain must be positive");
    require(gravity >= 0 && damping >= 0, ErrorKind::kInvalidInput,
            "cart-pole gravity and damping must be nonnegative");
    require(sample_time > 0, ErrorKind::kInvalidInput, "sample_time must be positive");
  }

  friend bool operator==(const CartPoleParams&, const CartPoleParams&) = default;
};

struct ContinuousModel {
  Matrix A;
  Matrix B;
};

// Small-angle equations of motion about the upright equilibrium:
//   (M+m) s̈ + m l θ̈ = F,   m l s̈ + J θ̈ = m g l θ,   J = (4/3) m l².
inline ContinuousModel cartpole_continuous(const CartPoleParams& p) {
  p.validate();
  const double M = p.cart_mass, m = p.pole_mass, l = p.pole_length, g = p.gravity;
  const double J = 4.0 / 3.0 * m * l * l;
  const double det = (M + m) * J - m * m * l * l;
  // F = M·k·V − M·c·ṡ
  const double force_per_volt = M * p.motor_gain;
  const double force_per_velocity = -M * p.damping;
  Matrix A(4, 4), B(4, 1);
  A(0, 2) = 1.0;
  A(1, 3) = 1.0;
  A(2, 1) = -m * l * m * g * l / det;
  A(2, 2) = J * force_per_velocity / det;
  A(3, 1) = (M + m) * m * g * l / det;
  A(3, 2) = -m * l * force_per_velocity / det;
  B(2, 0) = J * force_per_volt / det;
  B(3, 0) = -m * l * force_per_volt / det;
  return {A, B};
}

// Exact zero-order-hold discretization through the exponential of
// [[A, B], [0, 0]]·h.
inline std::pair<Matrix, Matrix> discretize(const ContinuousModel& c, double h) {
  require(h > 0.0, ErrorKind::kInvalidInput, "discretization step must be positive");
  const std::size_t n = c.A.rows(), m = c.B.cols();
  Matrix aug(n + m, n + m);
  aug.set_block(0, 0, c.A);
  aug.set_block(0, n, c.B);
  const Matrix e = numerics::expm(aug * h);
  return {e.block(0, 0, n, n), e.block(0, n, n, m)};
}

// Covariance of ∫₀ʰ e^{Aτ} dW(τ) for white noise of spectral density S
// (Van Loan's method).
inline Matrix discretize_noise(const Matrix& A, const Matrix& S, double h) {
  const std::size_t n = A.rows();
  Matrix vl(2 * n, 2 * n);
  vl.set_block(0, 0, -A);
  vl.set_block(0, n, S);
  vl.set_block(n, n, A.transpose());
  const Matrix e = numerics::expm(vl * h);
  const Matrix phi_t = e.block(n, n, n, n);
  return (phi_t.transpose() * e.block(0, n, n, n)).symmetrized();
}

inline SystemModel linearized_cartpole(const CartPoleParams& p) {
  const auto c = cartpole_continuous(p);
  auto [A, B] = discretize(c, p.sample_time);
  return SystemModel::noiseless(std::move(A), std::move(B));
}

// First-order low-pass over finite differences of position channels:
//   raw = (y_curr − y_prev)/dt,  v = α·raw + (1 − α)·v_prev.
inline Vector estimate_velocities(std::span<const double> y_curr, std::span<const double> y_prev,
                                  std::span<const double> v_filt_prev, double dt, double alpha) {
  require(dt > 0.0, ErrorKind::kInvalidInput, "dt must be positive");
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::kInvalidInput, "alpha must lie in [0, 1]");
  require(y_curr.size() == y_prev.size() && y_curr.size() == v_filt_prev.size(),
          ErrorKind::kInvalidInput, "velocity estimator dimension mismatch");
  Vector v(y_curr.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double raw = (y_curr[i] - y_prev[i]) / dt;
    v[i] = alpha * raw + (1.0 - alpha) * v_filt_prev[i];
  }
  return v;
}

}  // namespace wcps::plant
