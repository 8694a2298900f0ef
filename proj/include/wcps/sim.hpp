#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "wcps/controller.hpp"
#include "wcps/matrix_csv.hpp"
#include "wcps/network.hpp"
#include "wcps/numerics.hpp"
#include "wcps/plant.hpp"

namespace wcps::sim {

// ---- configuration ----------------------------------------------------------

enum class ScenarioKind { kRemoteStabilization, kMultiAgentSync, kLossSweep, kIntervalSweep, kBurstTest };

inline std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kRemoteStabilization: return "remote_stabilization";
    case ScenarioKind::kMultiAgentSync: return "multi_agent_sync";
    case ScenarioKind::kLossSweep: return "loss_sweep";
    case ScenarioKind::kIntervalSweep: return "interval_sweep";
    case ScenarioKind::kBurstTest: return "burst_test";
  }
  return "remote_stabilization";
}

// A discrete model given directly; only valid at its own sample time.
struct ExplicitPlant {
  Matrix A, B;
  double sample_time_s = 0.04;

  friend bool operator==(const ExplicitPlant&, const ExplicitPlant&) = default;
};

struct PlantConfig {
  std::variant<plant::CartPoleParams, ExplicitPlant> source = plant::CartPoleParams{};
  // Cart-pole: diagonal spectral density of continuous white process noise,
  // discretized exactly at the update interval. Explicit plant: diagonal of
  // the per-step covariance. Empty means no process noise.
  Vector process_noise;
  Vector measurement_noise_std;  // per state channel; empty means exact measurements
  std::optional<Vector> input_limit;
  std::optional<Vector> state_abort_bounds;

  bool is_cartpole() const { return std::holds_alternative<plant::CartPoleParams>(source); }
  std::size_t n() const {
    return is_cartpole() ? 4 : std::get<ExplicitPlant>(source).A.rows();
  }

  friend bool operator==(const PlantConfig&, const PlantConfig&) = default;
};

// How a pole set carries over to other update intervals. kMatched keeps the
// continuous-time closed loop: λ designed at T_ref becomes λ^(T_U/T_ref).
// kConstantDiscrete places the same λ at every T_U.
enum class PoleMapping { kMatched, kConstantDiscrete };

inline std::string_view to_string(PoleMapping p) {
  return p == PoleMapping::kMatched ? "matched" : "constant_discrete";
}

struct ControllerConfig {
  controller::DesignMethod method =
      controller::PolePlacement{{0.8, 0.85, 0.9, 0.9}};
  PoleMapping pole_mapping = PoleMapping::kMatched;
  double pole_reference_interval_s = 0.04;
  std::optional<Matrix> gain;  // imported F, bypasses the design step

  friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

inline std::vector<numerics::Complex> map_poles(const std::vector<numerics::Complex>& poles,
                                                PoleMapping mapping, double reference_s,
                                                double step_s) {
  if (mapping == PoleMapping::kConstantDiscrete) return poles;
  require(reference_s > 0.0, ErrorKind::kInvalidInput, "pole reference interval must be positive");
  const double e = step_s / reference_s;
  std::vector<numerics::Complex> out;
  for (const auto& p : poles) {
    require(p.imag() != 0.0 || p.real() > 0.0, ErrorKind::kInvalidInput,
            "real poles at or left of the origin have no continuous-time counterpart; use "
            "constant_discrete mapping");
    out.push_back(std::pow(p, e));
  }
  return out;
}

struct HoldWindow {
  std::size_t agent = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  double position = -0.2;  // m

  friend bool operator==(const HoldWindow&, const HoldWindow&) = default;
};

struct SyncConfig {
  std::size_t agents = 5;
  double local_interval_s = 0.01;
  double exchange_interval_s = 0.05;
  Matrix Q_agent;
  Matrix R_agent;
  Matrix Q_sync;
  std::vector<Vector> x0;  // one per agent; empty means every agent starts at Scenario::x0
  std::optional<HoldWindow> hold;

  friend bool operator==(const SyncConfig&, const SyncConfig&) = default;
};

enum class SweepAxis { kLossRate, kUpdateInterval, kBurstLength };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kLossRate: return "loss_rate";
    case SweepAxis::kUpdateInterval: return "update_interval";
    case SweepAxis::kBurstLength: return "burst_length";
  }
  return "loss_rate";
}

struct SweepConfig {
  SweepAxis axis = SweepAxis::kLossRate;
  std::vector<double> values;  // loss fraction, seconds, or messages
  std::size_t trials = 1;

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::kRemoteStabilization;
  PlantConfig plant;
  network::NetworkModel network;
  ControllerConfig controller;
  std::size_t horizon = 1000;       // steps
  std::optional<double> duration_s;  // overrides horizon as duration / step interval
  std::vector<std::uint64_t> seeds{1};
  Vector x0;
  std::optional<SyncConfig> sync;
  std::optional<SweepConfig> sweep;

  friend bool operator==(const Scenario&, const Scenario&) = default;

  void validate() const {
    require(!seeds.empty(), ErrorKind::kInvalidInput, "scenario needs at least one seed");
    require(horizon >= 1, ErrorKind::kInvalidInput, "horizon must be at least one step");
    if (duration_s) require(*duration_s > 0.0, ErrorKind::kInvalidInput, "duration must be positive");
    network.validate();
    const std::size_t n = plant.n();
    require(x0.size() == n, ErrorKind::kInvalidInput,
            "initial state has " + std::to_string(x0.size()) + " entries, plant has " +
                std::to_string(n) + " states");
    if (!plant.process_noise.empty())
      require(plant.process_noise.size() == n, ErrorKind::kInvalidInput,
              "process noise needs one entry per state");
    if (!plant.measurement_noise_std.empty())
      require(plant.measurement_noise_std.size() == n, ErrorKind::kInvalidInput,
              "measurement noise needs one entry per state");
    for (double v : plant.process_noise)
      require(v >= 0.0, ErrorKind::kInvalidInput, "process noise entries must be nonnegative");
    for (double v : plant.measurement_noise_std)
      require(v >= 0.0, ErrorKind::kInvalidInput, "measurement noise entries must be nonnegative");
    if (const auto* e = std::get_if<ExplicitPlant>(&plant.source))
      require(e->sample_time_s > 0.0, ErrorKind::kInvalidInput, "sample time must be positive");
    if (controller.gain)
      require(controller.gain->cols() == n, ErrorKind::kInvalidInput, "imported gain must be m x n");

    const bool is_sweep = kind == ScenarioKind::kLossSweep || kind == ScenarioKind::kIntervalSweep;
    if (kind == ScenarioKind::kMultiAgentSync) {
      require(sync.has_value(), ErrorKind::kInvalidInput, "multi_agent_sync needs a sync section");
      require(sync->agents >= 2, ErrorKind::kInvalidInput, "synchronization needs at least two agents");
      require(sync->local_interval_s > 0.0 && sync->exchange_interval_s > 0.0,
              ErrorKind::kInvalidInput, "sync intervals must be positive");
      const double ratio = sync->exchange_interval_s / sync->local_interval_s;
      require(std::abs(ratio - std::round(ratio)) < 1e-9 && std::round(ratio) >= 1.0,
              ErrorKind::kInvalidInput,
              "local loop interval must divide the exchange interval");
      require(sync->x0.empty() || sync->x0.size() == sync->agents, ErrorKind::kInvalidInput,
              "sync initial states: one per agent");
      for (const auto& v : sync->x0)
        require(v.size() == n, ErrorKind::kInvalidInput, "sync initial state dimension mismatch");
      if (sync->hold) {
        require(sync->hold->agent < sync->agents, ErrorKind::kInvalidInput,
                "hold window agent index out of range");
        require(sync->hold->end_s >= sync->hold->start_s, ErrorKind::kInvalidInput,
                "hold window ends before it starts");
      }
    }
    if (is_sweep) {
      require(sweep.has_value(), ErrorKind::kInvalidInput, "sweep scenario needs a sweep section");
      require(!sweep->values.empty(), ErrorKind::kInvalidInput, "sweep needs at least one value");
      require(sweep->trials >= 1, ErrorKind::kInvalidInput, "sweep needs at least one trial");
    }
    if (kind == ScenarioKind::kBurstTest)
      require(network.bursts.has_value(), ErrorKind::kInvalidInput,
              "burst_test needs a burst schedule in the network section");
  }
};

// Benchtop cart-pole as shipped: ±10 V drive, ±25 cm track, and an abort
// when the pole leaves ±0.5 rad where the small-angle model stops being
// meaningful. Noise levels are artifact choices: process noise enters on the
// accelerations, measurement noise mimics encoder quantization and filtered
// finite-difference velocities.
inline PlantConfig shipped_cartpole() {
  const double inf = std::numeric_limits<double>::infinity();
  PlantConfig p;
  p.source = plant::CartPoleParams{};
  p.process_noise = {0.0, 0.0, 1e-4, 1e-3};
  p.measurement_noise_std = {2e-5, 5e-4, 2e-3, 1e-2};
  p.input_limit = Vector{10.0};
  p.state_abort_bounds = Vector{0.25, 0.5, inf, inf};
  return p;
}

// ---- model resolution ---------------------------------------------------------

inline plant::SystemModel build_model(const PlantConfig& cfg, double step_s) {
  require(step_s > 0.0, ErrorKind::kInvalidInput, "step interval must be positive");
  Matrix A, B, sigma_proc;
  std::size_t n = 0;
  if (const auto* cp = std::get_if<plant::CartPoleParams>(&cfg.source)) {
    auto p = *cp;
    p.sample_time = step_s;
    const auto c = plant::cartpole_continuous(p);
    std::tie(A, B) = plant::discretize(c, step_s);
    n = A.rows();
    sigma_proc = Matrix(n, n);
    if (!cfg.process_noise.empty())
      sigma_proc = plant::discretize_noise(c.A, Matrix::diagonal(cfg.process_noise), step_s);
  } else {
    const auto& e = std::get<ExplicitPlant>(cfg.source);
    require(std::abs(e.sample_time_s - step_s) <= 1e-12 * e.sample_time_s, ErrorKind::kInvalidInput,
            "explicit plant is discretized at " + std::to_string(e.sample_time_s) +
                " s and cannot run at " + std::to_string(step_s) + " s");
    A = e.A;
    B = e.B;
    n = A.rows();
    sigma_proc = cfg.process_noise.empty() ? Matrix(n, n) : Matrix::diagonal(cfg.process_noise);
  }
  Matrix sigma_meas(n, n);
  for (std::size_t i = 0; i < cfg.measurement_noise_std.size() && i < n; ++i)
    sigma_meas(i, i) = cfg.measurement_noise_std[i] * cfg.measurement_noise_std[i];
  return plant::SystemModel(std::move(A), std::move(B), std::move(sigma_proc), std::move(sigma_meas),
                            cfg.input_limit, cfg.state_abort_bounds);
}

inline controller::DesignMethod method_at(const ControllerConfig& cfg, double step_s) {
  if (const auto* pp = std::get_if<controller::PolePlacement>(&cfg.method))
    return controller::PolePlacement{
        map_poles(pp->poles, cfg.pole_mapping, cfg.pole_reference_interval_s, step_s)};
  return cfg.method;
}

inline Matrix design_gain(const ControllerConfig& cfg, const plant::SystemModel& model,
                          double step_s) {
  if (cfg.gain) {
    require(cfg.gain->rows() == model.m() && cfg.gain->cols() == model.n(), ErrorKind::kInvalidInput,
            "imported gain must be m x n");
    return *cfg.gain;
  }
  return controller::design_stabilizing_gain(model, method_at(cfg, step_s));
}

inline std::size_t horizon_steps(const Scenario& s, double step_s) {
  if (!s.duration_s) return s.horizon;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(*s.duration_s / step_s)));
}

// Everything one remote loop needs, after design.
struct LoopSetup {
  plant::SystemModel model;
  Matrix F;
  network::NetworkModel network;
  Vector x0;
  std::size_t horizon = 1;
};

inline LoopSetup resolve_loop(const Scenario& s) {
  s.validate();
  LoopSetup L;
  L.model = build_model(s.plant, s.network.update_interval_s);
  L.F = design_gain(s.controller, L.model, s.network.update_interval_s);
  L.network = s.network;
  L.x0 = s.x0;
  L.horizon = horizon_steps(s, s.network.update_interval_s);
  return L;
}

// ---- traces -----------------------------------------------------------------

struct StepRecord {
  std::uint64_t k = 0;
  Vector x, y, u;
  Vector u_hat;  // û(k): command in flight to the actuator this round
  Vector x_hat;  // x̂(k)
  bool theta = false, phi = false;
  bool saturated = false;
};

struct AbortInfo {
  std::uint64_t step = 0;  // first step whose state left the bounds (not recorded)
  std::size_t agent = 0;
  std::size_t channel = 0;
  double value = 0.0;
  double bound = 0.0;
};

struct SimTrace {
  std::vector<StepRecord> steps;
  std::optional<AbortInfo> abort;
  double step_interval_s = 0.0;

  bool aborted() const noexcept { return abort.has_value(); }
};

inline std::optional<AbortInfo> check_bounds(const plant::SystemModel& model, const Vector& x,
                                             std::uint64_t k, std::size_t agent = 0) {
  const auto& b = model.state_abort_bounds();
  if (!b) return std::nullopt;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(std::abs(x[i]) <= (*b)[i])) return AbortInfo{k, agent, i, x[i], (*b)[i]};
  return std::nullopt;
}

// Raw delivery draws (θ, φ) for round k ≥ 1.
using LossScript = std::function<std::pair<bool, bool>(std::uint64_t k)>;

// One remote loop. Round k:
//   collect the messages of round k−1 (θ(k), φ(k)); actuator applies the ZOH;
//   controller predicts x̂(k) and computes û(k+1); sensor sends y(k);
//   plant steps to x(k+1).
// At k = 0 nothing is in flight, so θ(0) = φ(0) = 0, and x̂, û, u start at 0.
inline SimTrace run_loop(const LoopSetup& L, std::uint64_t seed, const LossScript& script = {}) {
  const auto& model = L.model;
  require(L.x0.size() == model.n(), ErrorKind::kInvalidInput, "initial state dimension mismatch");
  require(L.horizon >= 1, ErrorKind::kInvalidInput, "horizon must be at least one step");
  network::NetworkModel net = L.network;
  net.seed = seed;
  net.validate();
  plant::PlantNoise noise(seed);
  controller::ControllerState ctl(model, L.F);
  network::Mailboxes boxes;

  SimTrace trace;
  trace.step_interval_s = net.update_interval_s;
  trace.steps.reserve(L.horizon);
  Vector x = L.x0;
  Vector y = plant::measure(model, x, noise);
  Vector u(model.m(), 0.0);

  for (std::uint64_t k = 0; k < L.horizon; ++k) {
    if (auto a = check_bounds(model, x, k)) {
      trace.abort = a;
      break;
    }
    network::Delivery d;
    if (k >= 1) {
      if (script) {
        const auto [t, p] = script(k);
        d = network::pipeline_transport(boxes, k, t, p);
      } else {
        d = network::pipeline_transport(net, boxes, k);
      }
    }
    const auto act = plant::zoh_actuate(d.phi, d.phi ? std::span<const double>(*d.command)
                                                     : std::span<const double>(u),
                                        u, model.input_limit());
    u = act.u;
    controller::predict(ctl, d.theta, d.measurement);

    StepRecord r;
    r.k = k;
    r.x = x;
    r.y = y;
    r.u = u;
    r.u_hat = ctl.u_hat();
    r.x_hat = ctl.x_hat();
    r.theta = d.theta;
    r.phi = d.phi;
    r.saturated = act.saturated;
    trace.steps.push_back(std::move(r));

    boxes.actuation.post(k, controller::compute_input(ctl));
    boxes.sensor.post(k, y);
    auto next = plant::step(model, x, u, noise);
    x = std::move(next.x_next);
    y = std::move(next.y);
  }
  return trace;
}

inline SimTrace run_closed_loop(const Scenario& s, std::uint64_t seed) {
  return run_loop(resolve_loop(s), seed);
}

// ---- synchronization ----------------------------------------------------------

struct SyncSetup {
  std::vector<plant::SystemModel> models;
  controller::SyncGains gains;
  std::vector<Vector> x0;
  std::size_t horizon = 1;
  std::size_t exchange_every = 1;  // local steps per exchange round
  double local_interval_s = 0.01;
  double mu = 1.0;                 // broadcast delivery probability
  std::optional<HoldWindow> hold;
};

inline SyncSetup resolve_sync(const Scenario& s, const numerics::DareOptions& dare = {}) {
  s.validate();
  require(s.sync.has_value(), ErrorKind::kInvalidInput, "scenario has no sync section");
  const auto& c = *s.sync;
  require(c.agents >= 2, ErrorKind::kInvalidInput, "synchronization needs at least two agents");
  require(c.local_interval_s > 0.0 && c.exchange_interval_s > 0.0, ErrorKind::kInvalidInput,
          "sync intervals must be positive");
  const double ratio = c.exchange_interval_s / c.local_interval_s;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && std::round(ratio) >= 1.0,
          ErrorKind::kInvalidInput, "local loop interval must divide the exchange interval");
  SyncSetup S;
  S.local_interval_s = c.local_interval_s;
  S.exchange_every = static_cast<std::size_t>(std::llround(ratio));
  S.horizon = horizon_steps(s, c.local_interval_s);
  S.mu = s.network.mu_theta;
  S.hold = c.hold;
  const auto model = build_model(s.plant, c.local_interval_s);
  S.models.assign(c.agents, model);
  S.x0 = c.x0.empty() ? std::vector<Vector>(c.agents, s.x0) : c.x0;
  controller::SyncWeights w{std::vector<Matrix>(c.agents, c.Q_agent),
                            std::vector<Matrix>(c.agents, c.R_agent), c.Q_sync};
  S.gains = controller::design_sync_gains(S.models, w, dare);
  return S;
}

// Agents run delay-free local loops u_i = F_ii·y_i + Σ_{j≠i} F_ij·x̃_j, where
// x̃_j is the latest broadcast of agent j. Every exchange round each agent
// broadcasts its measurement; one delivery indicator per (sender, round)
// decides whether all receivers get it one round later. Until a first
// broadcast arrives x̃_j is zero. Without coupling the broadcasts are still
// drawn, so traces of coupled and decoupled runs share the θ column; θ(k) is 0
// only on exchange steps where the agent's own previous broadcast was lost.
inline std::vector<SimTrace> run_agents(const SyncSetup& S, std::uint64_t seed, bool coupled) {
  const std::size_t N = S.models.size();
  require(N >= 2 && S.x0.size() == N, ErrorKind::kInvalidInput, "sync setup inconsistent");
  std::vector<plant::PlantNoise> noise;
  noise.reserve(N);
  for (std::size_t i = 0; i < N; ++i) noise.emplace_back(seed, rng::kAgentNoiseBase + 2 * i);
  std::vector<Vector> x = S.x0, y(N), latest(N), pending(N);
  std::vector<std::vector<Matrix>> F(N, std::vector<Matrix>(N));
  for (std::size_t i = 0; i < N; ++i) {
    latest[i].assign(S.models[i].n(), 0.0);
    for (std::size_t j = 0; j < N; ++j) F[i][j] = S.gains.block(i, j);
  }
  std::vector<SimTrace> traces(N);
  for (auto& t : traces) {
    t.step_interval_s = S.local_interval_s;
    t.steps.reserve(S.horizon);
  }

  auto held = [&](std::uint64_t k) {
    if (!S.hold) return false;
    const double t = static_cast<double>(k) * S.local_interval_s;
    return t >= S.hold->start_s && t < S.hold->end_s;
  };
  auto clamp_held = [&](std::uint64_t k, bool remeasure) {
    if (!held(k)) return;
    Vector& xi = x[S.hold->agent];
    std::fill(xi.begin(), xi.end(), 0.0);
    xi[0] = S.hold->position;
    if (remeasure) y[S.hold->agent] = plant::measure(S.models[S.hold->agent], xi, noise[S.hold->agent]);
  };

  clamp_held(0, false);
  for (std::size_t i = 0; i < N; ++i) y[i] = plant::measure(S.models[i], x[i], noise[i]);

  for (std::uint64_t k = 0; k < S.horizon; ++k) {
    if (k > 0) clamp_held(k, true);
    std::optional<AbortInfo> abort;
    for (std::size_t i = 0; i < N && !abort; ++i) abort = check_bounds(S.models[i], x[i], k, i);
    if (abort) {
      for (auto& t : traces) t.abort = abort;
      break;
    }

    std::vector<char> own_delivered(N, 1);
    if (k % S.exchange_every == 0) {
      const std::uint64_t round = k / S.exchange_every;
      if (round >= 1) {
        for (std::size_t j = 0; j < N; ++j) {
          const bool ok = network::bernoulli_delivery(seed, round, rng::kBroadcastLossBase + j, S.mu);
          if (ok) latest[j] = pending[j];
          own_delivered[j] = ok;
        }
      }
      pending = y;
    }

    std::vector<Vector> u(N);
    for (std::size_t i = 0; i < N; ++i) {
      u[i] = F[i][i] * y[i];
      if (coupled)
        for (std::size_t j = 0; j < N; ++j)
          if (j != i) u[i] = add(u[i], F[i][j] * latest[j]);
      const bool sat = plant::clamp_to_limit(u[i], S.models[i].input_limit());
      StepRecord r;
      r.k = k;
      r.x = x[i];
      r.y = y[i];
      r.u = u[i];
      r.u_hat = u[i];
      r.x_hat = y[i];
      r.theta = own_delivered[i] != 0;
      r.phi = true;
      r.saturated = sat;
      traces[i].steps.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < N; ++i) {
      auto next = plant::step(S.models[i], x[i], u[i], noise[i]);
      x[i] = std::move(next.x_next);
      y[i] = std::move(next.y);
    }
  }
  return traces;
}

inline std::vector<SimTrace> run_sync_scenario(const Scenario& s, std::uint64_t seed) {
  return run_agents(resolve_sync(s), seed, true);
}

// Each agent alone with its local term F_ii, same noise streams and hold.
inline std::vector<SimTrace> run_decoupled_agents(const Scenario& s, std::uint64_t seed) {
  return run_agents(resolve_sync(s), seed, false);
}

// Time average over recorded steps of the mean |s_i − s_j| over agent pairs.
inline double mean_pairwise_error(const std::vector<SimTrace>& traces, std::size_t channel = 0) {
  require(traces.size() >= 2, ErrorKind::kInvalidInput, "need at least two agent traces");
  std::size_t steps = traces[0].steps.size();
  for (const auto& t : traces) steps = std::min(steps, t.steps.size());
  require(steps > 0, ErrorKind::kInvalidInput, "agent traces are empty");
  const std::size_t N = traces.size();
  double total = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j)
        s += std::abs(traces[i].steps[k].x[channel] - traces[j].steps[k].x[channel]);
    total += s / double(N * (N - 1) / 2);
  }
  return total / double(steps);
}

// ---- metrics ----------------------------------------------------------------

inline constexpr std::array<double, 7> kQuantileLevels{0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99};

// Linear interpolation between order statistics (Hyndman–Fan type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  require(!sorted.empty(), ErrorKind::kInvalidInput, "quantile of empty sample");
  const double h = (double(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

struct Metrics {
  std::size_t steps = 0;
  Vector rms;  // per state channel
  double input_min = 0.0, input_max = 0.0;
  std::array<double, 7> input_quantiles{};  // at kQuantileLevels, over all input channels
  double travel = 0.0;                      // Σ|x_p(k) − x_p(k−1)| on the position channel
  std::size_t theta_losses = 0, phi_losses = 0;  // rounds k ≥ 1 without delivery
  std::size_t saturated_steps = 0;
  bool aborted = false;
};

inline Metrics compute_metrics(const SimTrace& trace, std::size_t position_channel = 0) {
  require(!trace.steps.empty(), ErrorKind::kInvalidInput, "cannot compute metrics of an empty trace");
  Metrics m;
  m.steps = trace.steps.size();
  m.aborted = trace.aborted();
  const std::size_t n = trace.steps[0].x.size();
  require(position_channel < n, ErrorKind::kInvalidInput, "position channel out of range");
  m.rms.assign(n, 0.0);
  std::vector<double> inputs;
  inputs.reserve(m.steps * trace.steps[0].u.size());
  for (std::size_t k = 0; k < m.steps; ++k) {
    const auto& r = trace.steps[k];
    for (std::size_t i = 0; i < n; ++i) m.rms[i] += r.x[i] * r.x[i];
    inputs.insert(inputs.end(), r.u.begin(), r.u.end());
    if (k > 0) {
      m.travel += std::abs(r.x[position_channel] - trace.steps[k - 1].x[position_channel]);
      m.theta_losses += !r.theta;
      m.phi_losses += !r.phi;
    }
    m.saturated_steps += r.saturated;
  }
  for (double& v : m.rms) v = std::sqrt(v / double(m.steps));
  std::sort(inputs.begin(), inputs.end());
  m.input_min = inputs.front();
  m.input_max = inputs.back();
  for (std::size_t q = 0; q < kQuantileLevels.size(); ++q)
    m.input_quantiles[q] = quantile_sorted(inputs, kQuantileLevels[q]);
  return m;
}

// ---- sweeps -----------------------------------------------------------------

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  Metrics metrics;
  bool survived = true;
};

struct SweepSummary {
  double value = 0.0;
  std::size_t trials = 0;
  std::size_t survived = 0;
  double survival_fraction = 0.0;
  Vector mean_rms, sd_rms;
  double mean_travel = 0.0, sd_travel = 0.0;
  std::array<double, 7> travel_quantiles{};
};

struct SweepTable {
  SweepAxis axis = SweepAxis::kLossRate;
  std::vector<SweepRow> rows;  // value-major, trial-minor
  std::vector<SweepSummary> summary;
};

// Scenario with the sweep axis set to one value.
inline Scenario at_sweep_value(const Scenario& s, SweepAxis axis, double v) {
  Scenario out = s;
  switch (axis) {
    case SweepAxis::kLossRate:
      require(v >= 0.0 && v < 1.0, ErrorKind::kInvalidInput, "loss rate must lie in [0, 1)");
      out.network.mu_theta = out.network.mu_phi = 1.0 - v;
      break;
    case SweepAxis::kUpdateInterval:
      require(v > 0.0, ErrorKind::kInvalidInput, "update interval must be positive");
      out.network.update_interval_s = v;
      break;
    case SweepAxis::kBurstLength: {
      require(out.network.bursts.has_value(), ErrorKind::kInvalidInput,
              "burst_length sweep needs a burst schedule");
      require(v >= 1.0 && v == std::floor(v), ErrorKind::kInvalidInput,
              "burst length must be a positive integer");
      out.network.bursts->burst_length = static_cast<int>(v);
      break;
    }
  }
  return out;
}

inline std::vector<std::uint64_t> trial_seeds(const Scenario& s, std::size_t trials) {
  std::vector<std::uint64_t> out;
  for (std::size_t t = 0; t < trials; ++t)
    out.push_back(t < s.seeds.size() ? s.seeds[t] : s.seeds.front() + t);
  return out;
}

inline SweepSummary summarize(double value, std::span<const SweepRow> rows) {
  SweepSummary s;
  s.value = value;
  s.trials = rows.size();
  if (rows.empty()) return s;
  const std::size_t n = rows[0].metrics.rms.size();
  s.mean_rms.assign(n, 0.0);
  s.sd_rms.assign(n, 0.0);
  std::vector<double> travel;
  for (const auto& r : rows) {
    s.survived += r.survived;
    for (std::size_t i = 0; i < n; ++i) s.mean_rms[i] += r.metrics.rms[i];
    travel.push_back(r.metrics.travel);
  }
  const double T = double(rows.size());
  s.survival_fraction = double(s.survived) / T;
  for (double& v : s.mean_rms) v /= T;
  for (double t : travel) s.mean_travel += t / T;
  if (rows.size() > 1) {
    for (const auto& r : rows)
      for (std::size_t i = 0; i < n; ++i)
        s.sd_rms[i] += std::pow(r.metrics.rms[i] - s.mean_rms[i], 2) / (T - 1.0);
    for (double& v : s.sd_rms) v = std::sqrt(v);
    for (double t : travel) s.sd_travel += std::pow(t - s.mean_travel, 2) / (T - 1.0);
    s.sd_travel = std::sqrt(s.sd_travel);
  }
  std::sort(travel.begin(), travel.end());
  for (std::size_t q = 0; q < kQuantileLevels.size(); ++q)
    s.travel_quantiles[q] = quantile_sorted(travel, kQuantileLevels[q]);
  return s;
}

// Runs every (value, trial) pair; jobs are independent and results land in
// fixed slots, so the table does not depend on the thread count.
inline SweepTable run_sweep(const Scenario& s, SweepAxis axis, const std::vector<double>& values,
                            std::size_t trials, unsigned threads = 0) {
  require(!values.empty(), ErrorKind::kInvalidInput, "sweep needs at least one value");
  require(trials >= 1, ErrorKind::kInvalidInput, "sweep needs at least one trial");
  std::vector<LoopSetup> setups;
  for (double v : values) setups.push_back(resolve_loop(at_sweep_value(s, axis, v)));
  const auto seeds = trial_seeds(s, trials);

  SweepTable table;
  table.axis = axis;
  table.rows.resize(values.size() * trials);
  const std::size_t jobs = table.rows.size();
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      try {
        const std::size_t vi = j / trials, t = j % trials;
        const auto trace = run_loop(setups[vi], seeds[t]);
        table.rows[j] = SweepRow{values[vi], seeds[t], compute_metrics(trace), !trace.aborted()};
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t vi = 0; vi < values.size(); ++vi)
    table.summary.push_back(
        summarize(values[vi], std::span<const SweepRow>(table.rows).subspan(vi * trials, trials)));
  return table;
}

inline SweepTable run_sweep(const Scenario& s, unsigned threads = 0) {
  require(s.sweep.has_value(), ErrorKind::kInvalidInput, "scenario has no sweep section");
  return run_sweep(s, s.sweep->axis, s.sweep->values, s.sweep->trials, threads);
}

// ---- CSV --------------------------------------------------------------------

// Columns: k, x0.., y0.., u0.., uhat0.., xhat0.., theta, phi, saturated, aborted.
// aborted is 1 on the last row of a run that left its bounds at the next step.
inline void write_trace_csv(std::ostream& out, const SimTrace& t) {
  const std::size_t n = t.steps.empty() ? 0 : t.steps[0].x.size();
  const std::size_t m = t.steps.empty() ? 0 : t.steps[0].u.size();
  out << "k";
  for (const char* p : {"x", "y"})
    for (std::size_t i = 0; i < n; ++i) out << ',' << p << i;
  for (const char* p : {"u", "uhat"})
    for (std::size_t i = 0; i < m; ++i) out << ',' << p << i;
  for (std::size_t i = 0; i < n; ++i) out << ",xhat" << i;
  out << ",theta,phi,saturated,aborted\n";
  for (std::size_t s = 0; s < t.steps.size(); ++s) {
    const auto& r = t.steps[s];
    out << r.k;
    for (const Vector* v : {&r.x, &r.y, &r.u, &r.u_hat, &r.x_hat})
      for (double e : *v) out << ',' << format_double(e);
    out << ',' << r.theta << ',' << r.phi << ',' << r.saturated << ','
        << (t.aborted() && s + 1 == t.steps.size()) << '\n';
  }
}

inline void write_sweep_csv(std::ostream& out, const SweepTable& t) {
  const std::size_t n = t.rows.empty() ? 0 : t.rows[0].metrics.rms.size();
  out << to_string(t.axis) << ",seed,survived,steps,travel_m";
  for (std::size_t i = 0; i < n; ++i) out << ",rms_x" << i;
  out << ",input_min,input_max";
  for (double q : kQuantileLevels) out << ",input_q" << std::llround(q * 100);
  out << ",theta_losses,phi_losses,saturated_steps\n";
  for (const auto& r : t.rows) {
    const auto& m = r.metrics;
    out << format_double(r.value) << ',' << r.seed << ',' << r.survived << ',' << m.steps << ','
        << format_double(m.travel);
    for (double v : m.rms) out << ',' << format_double(v);
    out << ',' << format_double(m.input_min) << ',' << format_double(m.input_max);
    for (double v : m.input_quantiles) out << ',' << format_double(v);
    out << ',' << m.theta_losses << ',' << m.phi_losses << ',' << m.saturated_steps << '\n';
  }
}

inline void write_sweep_summary_csv(std::ostream& out, const SweepTable& t) {
  const std::size_t n = t.summary.empty() ? 0 : t.summary[0].mean_rms.size();
  out << to_string(t.axis) << ",trials,survived,survival_fraction,mean_travel_m,sd_travel_m";
  for (std::size_t i = 0; i < n; ++i) out << ",mean_rms_x" << i << ",sd_rms_x" << i;
  for (double q : kQuantileLevels) out << ",travel_q" << std::llround(q * 100);
  out << '\n';
  for (const auto& s : t.summary) {
    out << format_double(s.value) << ',' << s.trials << ',' << s.survived << ','
        << format_double(s.survival_fraction) << ',' << format_double(s.mean_travel) << ','
        << format_double(s.sd_travel);
    for (std::size_t i = 0; i < n; ++i)
      out << ',' << format_double(s.mean_rms[i]) << ',' << format_double(s.sd_rms[i]);
    for (double v : s.travel_quantiles) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace wcps::sim
