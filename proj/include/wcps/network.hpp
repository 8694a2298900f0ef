#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "wcps/error.hpp"
#include "wcps/numerics/matrix.hpp"
#include "wcps/rng.hpp"

namespace wcps::network {

enum class Channel { kSensor, kActuation };

enum class BurstTarget { kSensor, kActuation, kBoth };

inline std::string_view to_string(BurstTarget t) {
  switch (t) {
    case BurstTarget::kSensor: return "sensor";
    case BurstTarget::kActuation: return "actuation";
    case BurstTarget::kBoth: return "both";
  }
  return "both";
}

// Deliberate drop windows: burst_length consecutive rounds lost at the start
// of every period, beginning one period after round 0.
struct BurstSchedule {
  double period_s = 10.0;
  int burst_length = 1;
  BurstTarget applies_to = BurstTarget::kBoth;

  void validate() const {
    require(period_s > 0.0, ErrorKind::kInvalidInput, "burst period must be positive");
    require(burst_length >= 1, ErrorKind::kInvalidInput, "burst length must be at least 1");
  }

  bool targets(Channel c) const {
    return applies_to == BurstTarget::kBoth ||
           (c == Channel::kSensor) == (applies_to == BurstTarget::kSensor);
  }

  std::uint64_t period_rounds(double update_interval_s) const {
    return static_cast<std::uint64_t>(std::llround(period_s / update_interval_s));
  }

  bool covers(std::uint64_t k, Channel c, double update_interval_s) const {
    if (!targets(c)) return false;
    const std::uint64_t period = period_rounds(update_interval_s);
    return k >= period && k % period < static_cast<std::uint64_t>(burst_length);
  }

  friend bool operator==(const BurstSchedule&, const BurstSchedule&) = default;
};

// Round-based network: one round per update interval, every message delivered
// exactly one round after emission or lost. End-to-end delay is therefore two
// update intervals; other ratios are rejected.
struct NetworkModel {
  double update_interval_s = 0.04;
  int delay_ratio = 2;
  double mu_theta = 1.0;  // sensor → controller delivery probability
  double mu_phi = 1.0;    // controller → actuator delivery probability
  std::uint64_t seed = 1;
  std::optional<BurstSchedule> bursts;

  void validate() const {
    require(update_interval_s > 0.0, ErrorKind::kInvalidInput, "update interval must be positive");
    require(delay_ratio == 2, ErrorKind::kInvalidInput,
            "only an end-to-end delay of exactly two update intervals is supported (got ratio " +
                std::to_string(delay_ratio) + ")");
    require(mu_theta >= 0.0 && mu_theta <= 1.0 && mu_phi >= 0.0 && mu_phi <= 1.0,
            ErrorKind::kInvalidInput, "delivery probabilities must lie in [0, 1]");
    if (bursts) {
      bursts->validate();
      const auto period = bursts->period_rounds(update_interval_s);
      require(period >= 1 && static_cast<std::uint64_t>(bursts->burst_length) < period,
              ErrorKind::kInvalidInput, "burst length must be shorter than the burst period");
    }
  }

  double end_to_end_delay_s() const { return delay_ratio * update_interval_s; }

  friend bool operator==(const NetworkModel&, const NetworkModel&) = default;
};

// Bernoulli delivery indicator for round k on a counter-based stream: the
// uniform attached to (seed, k, stream) is fixed, so sweeping μ with a common
// seed couples the loss sequences monotonically.
inline bool bernoulli_delivery(std::uint64_t seed, std::uint64_t k, std::uint64_t stream, double mu) {
  return rng::uniform_at(seed, k, stream) < mu;
}

// Delivery indicator (1 = delivered) for round k on a channel. Burst windows
// override the Bernoulli draw.
inline bool draw_loss(const NetworkModel& model, std::uint64_t k, Channel channel) {
  if (model.bursts && model.bursts->covers(k, channel, model.update_interval_s)) return false;
  const bool sensor = channel == Channel::kSensor;
  return bernoulli_delivery(model.seed, k, sensor ? rng::kSensorLoss : rng::kActuationLoss,
                            sensor ? model.mu_theta : model.mu_phi);
}

// ---- worst-case jitter -----------------------------------------------------

struct JitterParams {
  double e_ref_hat = 0.0;    // s, time-sync error between communication processors
  double e_sync_hat = 0.0;   // s, SYNC-line detection latency
  double rho_ap_hat = 0.0;   // application processor clock drift
  double rho_cp_hat = 0.0;   // communication processor clock drift
  double e_task_hat = 0.0;   // s, task execution-time variation
  double t_end_tilde = 0.0;  // s, nominal interval between task ends

  friend bool operator==(const JitterParams&, const JitterParams&) = default;

  void validate() const {
    require(e_ref_hat >= 0 && e_sync_hat >= 0 && rho_ap_hat >= 0 && rho_cp_hat >= 0 &&
                e_task_hat >= 0 && t_end_tilde >= 0,
            ErrorKind::kInvalidInput, "jitter parameters must be nonnegative");
  }
};

struct JitterBreakdown {
  double reference = 0.0;  // 2·ê_ref
  double sync_line = 0.0;  // 2·ê_SYNC
  double drift = 0.0;      // 2·T̃_end·(ρ̂_AP + ρ̂_CP)
  double task = 0.0;       // ê_task
  double total() const { return reference + sync_line + drift + task; }
};

inline JitterBreakdown jitter_breakdown(const JitterParams& p) {
  p.validate();
  return {2.0 * p.e_ref_hat, 2.0 * p.e_sync_hat, 2.0 * p.t_end_tilde * (p.rho_ap_hat + p.rho_cp_hat),
          p.e_task_hat};
}

// |J| ≤ 2(ê_ref + ê_SYNC + T̃_end(ρ̂_AP + ρ̂_CP)) + ê_task
inline double jitter_bound(const JitterParams& p) {
  p.validate();
  return 2.0 * (p.e_ref_hat + p.e_sync_hat + p.t_end_tilde * (p.rho_ap_hat + p.rho_cp_hat)) +
         p.e_task_hat;
}

// ---- one-round pipeline ----------------------------------------------------

// Single-slot mailbox: a message posted in round k is collected in round k+1
// or dropped. No duplicates, no reordering.
class Mailbox {
 public:
  void post(std::uint64_t round, Vector payload) {
    require(!slot_, ErrorKind::kContractViolation,
            "mailbox already holds an undelivered message from round " +
                std::to_string(slot_ ? slot_->round : 0));
    slot_ = Slot{round, std::move(payload)};
  }

  bool pending() const noexcept { return slot_.has_value(); }

  // Empties the slot; returns the payload only when delivered.
  std::optional<Vector> collect(std::uint64_t round, bool delivered) {
    if (!slot_) return std::nullopt;
    require(slot_->round + 1 == round, ErrorKind::kContractViolation,
            "message from round " + std::to_string(slot_->round) + " collected in round " +
                std::to_string(round));
    std::optional<Vector> out;
    if (delivered) out = std::move(slot_->payload);
    slot_.reset();
    return out;
  }

 private:
  struct Slot {
    std::uint64_t round;
    Vector payload;
  };
  std::optional<Slot> slot_;
};

struct Mailboxes {
  Mailbox sensor;     // y(k−1) on its way to the controller
  Mailbox actuation;  // û(k) on its way to the actuator
};

// What a round delivers. theta/phi are the effective indicators: 1 only when
// a message was in flight and survived.
struct Delivery {
  bool theta = false;
  bool phi = false;
  std::optional<Vector> measurement;
  std::optional<Vector> command;
};

inline Delivery pipeline_transport(Mailboxes& boxes, std::uint64_t k, bool theta_draw,
                                   bool phi_draw) {
  Delivery d;
  d.measurement = boxes.sensor.collect(k, theta_draw);
  d.command = boxes.actuation.collect(k, phi_draw);
  d.theta = d.measurement.has_value();
  d.phi = d.command.has_value();
  return d;
}

inline Delivery pipeline_transport(const NetworkModel& model, Mailboxes& boxes, std::uint64_t k) {
  return pipeline_transport(boxes, k, draw_loss(model, k, Channel::kSensor),
                            draw_loss(model, k, Channel::kActuation));
}

}  // namespace wcps::network
