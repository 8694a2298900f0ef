#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "wcps/sim.hpp"
#include "wcps/stability.hpp"

namespace wcps::sim {
namespace {

using testing::random_matrix;

LoopSetup scalar_loop(double a, double b, double f, double mu, double x0, std::size_t horizon) {
  LoopSetup L;
  L.model = plant::SystemModel::noiseless(Matrix{{a}}, Matrix{{b}});
  L.F = Matrix{{f}};
  L.network.mu_theta = L.network.mu_phi = mu;
  L.x0 = {x0};
  L.horizon = horizon;
  return L;
}

Scenario cartpole_scenario() {
  Scenario s;
  s.plant = shipped_cartpole();
  s.network.update_interval_s = 0.02;
  s.x0 = {0, 0.01, 0, 0};
  s.horizon = 500;
  return s;
}

Vector stack(const StepRecord& r) {
  Vector z = r.x;
  z.insert(z.end(), r.x_hat.begin(), r.x_hat.end());
  z.insert(z.end(), r.u.begin(), r.u.end());
  z.insert(z.end(), r.u_hat.begin(), r.u_hat.end());
  return z;
}

bool same_records(const SimTrace& a, const SimTrace& b) {
  if (a.steps.size() != b.steps.size() || a.aborted() != b.aborted()) return false;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    const auto &p = a.steps[k], &q = b.steps[k];
    if (p.k != q.k || p.x != q.x || p.y != q.y || p.u != q.u || p.u_hat != q.u_hat ||
        p.x_hat != q.x_hat || p.theta != q.theta || p.phi != q.phi || p.saturated != q.saturated)
      return false;
  }
  return true;
}

// ---- closed loop -------------------------------------------------------------

TEST(ClosedLoop, EquilibriumStaysAtZero) {
  const auto t = run_loop(scalar_loop(1.3, 1.0, -1.0, 0.7, 0.0, 50), 3);
  ASSERT_EQ(t.steps.size(), 50u);
  for (const auto& r : t.steps) {
    EXPECT_EQ(r.x[0], 0.0);
    EXPECT_EQ(r.u[0], 0.0);
    EXPECT_EQ(r.x_hat[0], 0.0);
  }
}

TEST(ClosedLoop, ScriptedScalarMatchesHandSteppedTable) {
  const std::vector<std::pair<bool, bool>> draws{{1, 1}, {0, 1}, {1, 0}, {0, 0}};
  const LossScript script = [&](std::uint64_t k) { return draws.at(k - 1); };
  const auto t = run_loop(scalar_loop(1.5, 1.0, -1.0, 1.0, 1.0, 5), 1, script);

  std::ifstream in(std::string(WCPS_FIXTURE_DIR) + "/scalar_five_step.csv");
  ASSERT_TRUE(in) << "fixture missing";
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'k') continue;
    std::stringstream ss(line);
    std::vector<double> v;
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 8u);
    ASSERT_LT(row, t.steps.size());
    const auto& r = t.steps[row];
    EXPECT_EQ(double(r.k), v[0]);
    EXPECT_EQ(r.x[0], v[1]) << "k=" << row;
    EXPECT_EQ(r.y[0], v[2]) << "k=" << row;
    EXPECT_EQ(r.u[0], v[3]) << "k=" << row;
    EXPECT_EQ(r.u_hat[0], v[4]) << "k=" << row;
    EXPECT_EQ(r.x_hat[0], v[5]) << "k=" << row;
    EXPECT_EQ(double(r.theta), v[6]) << "k=" << row;
    EXPECT_EQ(double(r.phi), v[7]) << "k=" << row;
    ++row;
  }
  EXPECT_EQ(row, 5u);
}

TEST(ClosedLoop, PerfectDeliveryFollowsDeterministicRecursion) {
  const auto L = scalar_loop(1.2, 1.0, -1.0, 1.0, 1.0, 60);
  const auto t = run_loop(L, 7);
  const Matrix At = stability::closed_loop_matrix(L.model.A(), L.model.B(), L.F, 1.0, 1.0);
  const Vector z0{1.0, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    const Vector z = numerics::matrix_power(At, unsigned(k)) * z0;
    EXPECT_NEAR(t.steps[k].x[0], z[0], 1e-12 * std::max(1.0, std::abs(z[0]))) << "k=" << k;
  }
  EXPECT_LT(std::abs(t.steps.back().x[0]), 1e-6);
}

TEST(ClosedLoop, TraceMatchesAugmentedRecursionOnUnsaturatedSteps) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> dim(1, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = dim(gen), m = dim(gen);
    LoopSetup L;
    L.model = plant::SystemModel::noiseless(random_matrix(gen, n, n), random_matrix(gen, n, m));
    L.F = random_matrix(gen, m, n, 0.5);
    if (trial % 2) {
      // Tight limits so some steps saturate and are skipped.
      L.model = L.model.with_limits(Vector(m, 0.3), std::nullopt);
    }
    L.network.mu_theta = 0.7;
    L.network.mu_phi = 0.6;
    L.x0 = Vector(n, 1.0);
    L.horizon = 25;
    const auto t = run_loop(L, 100 + trial);
    std::size_t checked = 0;
    for (std::size_t k = 0; k + 1 < t.steps.size(); ++k) {
      const auto& next = t.steps[k + 1];
      if (next.saturated) continue;
      const Matrix At = stability::closed_loop_matrix(L.model.A(), L.model.B(), L.F,
                                                      next.theta ? 1.0 : 0.0, next.phi ? 1.0 : 0.0);
      const Vector pred = At * stack(t.steps[k]);
      const Vector got = stack(next);
      const double scale = std::max(1.0, norm2(got));
      for (std::size_t i = 0; i < got.size(); ++i)
        EXPECT_NEAR(got[i], pred[i], 1e-12 * scale) << "trial " << trial << " k=" << k;
      ++checked;
    }
    EXPECT_GT(checked, 0u);
  }
}

TEST(ClosedLoop, DeterministicForFixedSeed) {
  auto s = cartpole_scenario();
  s.network.mu_theta = s.network.mu_phi = 0.8;
  const auto a = run_closed_loop(s, 42), b = run_closed_loop(s, 42), c = run_closed_loop(s, 43);
  EXPECT_TRUE(same_records(a, b));
  EXPECT_FALSE(same_records(a, c));
}

TEST(ClosedLoop, LossCountsMatchNetworkDraws) {
  auto s = cartpole_scenario();
  s.network.mu_theta = 0.7;
  s.network.mu_phi = 0.85;
  const std::uint64_t seed = 9;
  const auto t = run_closed_loop(s, seed);
  const auto m = compute_metrics(t);
  auto net = s.network;
  net.seed = seed;
  std::size_t lt = 0, lp = 0;
  for (std::uint64_t k = 1; k < t.steps.size(); ++k) {
    lt += !network::draw_loss(net, k, network::Channel::kSensor);
    lp += !network::draw_loss(net, k, network::Channel::kActuation);
  }
  EXPECT_EQ(m.theta_losses, lt);
  EXPECT_EQ(m.phi_losses, lp);
  EXPECT_GT(lt, 0u);
}

TEST(ClosedLoop, AbortStopsAtFirstViolation) {
  auto s = cartpole_scenario();
  s.controller.gain = Matrix(1, 4);  // open loop
  s.x0 = {0, 0.05, 0, 0};
  const auto t = run_closed_loop(s, 1);
  ASSERT_TRUE(t.aborted());
  EXPECT_EQ(t.steps.size(), t.abort->step);
  EXPECT_LT(t.steps.size(), s.horizon);
  EXPECT_GT(std::abs(t.abort->value), t.abort->bound);
  const Vector bounds = *shipped_cartpole().state_abort_bounds;
  for (const auto& r : t.steps)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LE(std::abs(r.x[i]), bounds[i]);
  const auto m = compute_metrics(t);
  EXPECT_TRUE(m.aborted);
  EXPECT_EQ(m.steps, t.steps.size());
}

TEST(ClosedLoop, BurstHoldsInputExactly) {
  auto s = cartpole_scenario();
  s.plant.state_abort_bounds.reset();
  s.network.bursts = network::BurstSchedule{2.0, 10, network::BurstTarget::kBoth};
  s.horizon = 400;
  const auto t = run_closed_loop(s, 5);
  const std::uint64_t period = s.network.bursts->period_rounds(0.02);
  for (std::uint64_t p = period; p + 10 < t.steps.size(); p += period) {
    for (std::uint64_t k = p; k < p + 10; ++k) {
      EXPECT_FALSE(t.steps[k].phi);
      EXPECT_FALSE(t.steps[k].theta);
      EXPECT_EQ(t.steps[k].u, t.steps[p - 1].u) << "k=" << k;
    }
  }
}

TEST(ClosedLoop, InvalidScenarioRejectedBeforeStepping) {
  auto s = cartpole_scenario();
  s.x0 = {0, 0};
  EXPECT_THROW(run_closed_loop(s, 1), Error);
  s = cartpole_scenario();
  s.seeds.clear();
  EXPECT_THROW(run_closed_loop(s, 1), Error);
  s = cartpole_scenario();
  s.horizon = 0;
  EXPECT_THROW(run_closed_loop(s, 1), Error);
  s = cartpole_scenario();
  s.plant = PlantConfig{};
  s.plant.source = ExplicitPlant{Matrix{{1.1}}, Matrix{{1}}, 0.04};
  s.x0 = {1};
  s.controller.method = controller::Lqr{Matrix{{1}}, Matrix{{1}}};
  EXPECT_THROW(run_closed_loop(s, 1), Error);  // plant at 40 ms, network at 20 ms
  s.network.update_interval_s = 0.04;
  EXPECT_NO_THROW(run_closed_loop(s, 1));
}

// ---- pole mapping ----------------------------------------------------------------

TEST(PoleMapping, MatchedAtReferenceIntervalIsIdentity) {
  const std::vector<numerics::Complex> poles{0.8, 0.85, 0.9, 0.9};
  EXPECT_EQ(map_poles(poles, PoleMapping::kMatched, 0.04, 0.04), poles);
  EXPECT_EQ(map_poles(poles, PoleMapping::kConstantDiscrete, 0.04, 0.02), poles);
  const auto half = map_poles(poles, PoleMapping::kMatched, 0.04, 0.02);
  for (std::size_t i = 0; i < poles.size(); ++i)
    EXPECT_NEAR(std::abs(half[i] * half[i] - poles[i]), 0.0, 1e-15);
  EXPECT_THROW(map_poles({-0.5}, PoleMapping::kMatched, 0.04, 0.02), Error);
}

TEST(PoleMapping, RedesignPlacesMappedPolesAtEachInterval) {
  ControllerConfig c;
  for (double T : {0.02, 0.03, 0.05}) {
    const auto model = build_model(shipped_cartpole(), T);
    const Matrix F = design_gain(c, model, T);
    const auto got = numerics::eig(model.A() + model.B() * F);
    std::vector<numerics::Complex> want;
    for (double p : {0.8, 0.85, 0.9, 0.9}) want.push_back(std::pow(p, T / 0.04));
    EXPECT_LT(testing::multiset_distance(got, want), 1e-6) << "T=" << T;
  }
}

// ---- metrics ----------------------------------------------------------------

SimTrace trace_from_positions(const std::vector<double>& s) {
  SimTrace t;
  for (std::size_t k = 0; k < s.size(); ++k) {
    StepRecord r;
    r.k = k;
    r.x = {s[k], 0.0};
    r.y = r.x;
    r.x_hat = r.x;
    r.u = {double(k)};
    r.u_hat = r.u;
    r.theta = r.phi = true;
    t.steps.push_back(r);
  }
  return t;
}

TEST(Metrics, ZeroTraceGivesZeroMetrics) {
  SimTrace t = trace_from_positions(std::vector<double>(10, 0.0));
  for (auto& r : t.steps) r.u = {0.0};
  const auto m = compute_metrics(t);
  EXPECT_EQ(m.travel, 0.0);
  for (double v : m.rms) EXPECT_EQ(v, 0.0);
  for (double q : m.input_quantiles) EXPECT_EQ(q, 0.0);
  EXPECT_EQ(m.input_min, 0.0);
  EXPECT_EQ(m.input_max, 0.0);
  EXPECT_FALSE(m.aborted);
}

TEST(Metrics, AlternatingPositionTravelsEighteen) {
  std::vector<double> s;
  for (int k = 0; k < 10; ++k) s.push_back(k % 2 ? -1.0 : 1.0);
  const auto m = compute_metrics(trace_from_positions(s));
  EXPECT_EQ(m.travel, 18.0);
  EXPECT_EQ(m.rms[0], 1.0);
}

TEST(Metrics, QuantilesInterpolateOrderStatistics) {
  // inputs 0..10: type-7 quantile at p is 10p
  const auto m = compute_metrics(trace_from_positions(std::vector<double>(11, 0.0)));
  for (std::size_t q = 0; q < kQuantileLevels.size(); ++q)
    EXPECT_NEAR(m.input_quantiles[q], 10.0 * kQuantileLevels[q], 1e-12);
  EXPECT_EQ(m.input_min, 0.0);
  EXPECT_EQ(m.input_max, 10.0);
}

TEST(Metrics, QuantilesOrderedAndTravelNonnegative) {
  auto s = cartpole_scenario();
  s.network.mu_theta = s.network.mu_phi = 0.6;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = compute_metrics(run_closed_loop(s, seed));
    EXPECT_GE(m.travel, 0.0);
    EXPECT_LE(m.input_min, m.input_quantiles.front());
    for (std::size_t q = 1; q < m.input_quantiles.size(); ++q)
      EXPECT_LE(m.input_quantiles[q - 1], m.input_quantiles[q]);
    EXPECT_LE(m.input_quantiles.back(), m.input_max);
  }
}

TEST(Metrics, EmptyTraceRejected) { EXPECT_THROW(compute_metrics(SimTrace{}), Error); }

// ---- synchronization --------------------------------------------------------------

Scenario sync_scenario(double q_sync) {
  Scenario s;
  s.kind = ScenarioKind::kMultiAgentSync;
  s.plant = shipped_cartpole();
  s.network.update_interval_s = 0.05;
  s.x0 = {0, 0, 0, 0};
  s.horizon = 1500;
  SyncConfig c;
  c.agents = 5;
  c.Q_agent = Matrix::diagonal(std::vector<double>{1, 1, 0, 0});
  c.R_agent = Matrix{{0.1}};
  c.Q_sync = Matrix::diagonal(std::vector<double>{q_sync, 0, 0, 0});
  s.sync = c;
  return s;
}

TEST(Sync, ZeroCouplingReproducesDecoupledAgentsBitExactly) {
  const auto s = sync_scenario(0.0);
  s.network.validate();
  auto coupled = run_sync_scenario(s, 4);
  auto alone = run_decoupled_agents(s, 4);
  ASSERT_EQ(coupled.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_TRUE(same_records(coupled[i], alone[i])) << "agent " << i;
}

TEST(Sync, CouplingChangesTraces) {
  const auto coupled = run_sync_scenario(sync_scenario(5.0), 4);
  const auto alone = run_decoupled_agents(sync_scenario(5.0), 4);
  EXPECT_FALSE(same_records(coupled[0], alone[0]));
}

TEST(Sync, IdenticalNoiselessAgentsStayTogether) {
  auto s = sync_scenario(5.0);
  s.plant.process_noise.clear();
  s.plant.measurement_noise_std.clear();
  s.x0 = {0.05, 0.01, 0, 0};
  s.network.mu_theta = 1.0;
  const auto t = run_sync_scenario(s, 1);
  // The centralized Riccati solve is symmetric only up to rounding.
  EXPECT_LT(mean_pairwise_error(t), 1e-14);
  for (std::size_t k = 0; k < t[0].steps.size(); k += 97)
    for (std::size_t i = 1; i < t.size(); ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(t[i].steps[k].x[j], t[0].steps[k].x[j], 1e-13);
}

TEST(Sync, OthersFollowHeldAgentTowardNegativePosition) {
  auto s = sync_scenario(5.0);
  s.horizon = 2500;
  s.sync->hold = HoldWindow{0, 10.0, 20.0, -0.2};
  const auto t = run_sync_scenario(s, 2);
  ASSERT_FALSE(t[0].aborted());
  auto mean_others = [&](double from, double to) {
    double sum = 0;
    std::size_t cnt = 0;
    for (std::size_t k = std::size_t(from / 0.01); k < std::size_t(to / 0.01); ++k)
      for (std::size_t i = 1; i < t.size(); ++i, ++cnt) sum += t[i].steps[k].x[0];
    return sum / double(cnt);
  };
  const double before = mean_others(5.0, 10.0), during = mean_others(12.0, 20.0);
  EXPECT_LT(during, before);
  EXPECT_LT(during, 0.0);
  EXPECT_GT(during, -0.2);
  EXPECT_EQ(t[0].steps[1500].x[0], -0.2);
}

TEST(Sync, StrongerCouplingShrinksPairwiseError) {
  double e0 = 0, e5 = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    e0 += mean_pairwise_error(run_sync_scenario(sync_scenario(0.0), seed));
    e5 += mean_pairwise_error(run_sync_scenario(sync_scenario(5.0), seed));
  }
  EXPECT_LT(e5, e0);
}

TEST(Sync, ConfigurationErrors) {
  auto s = sync_scenario(1.0);
  s.sync->exchange_interval_s = 0.055;
  EXPECT_THROW(run_sync_scenario(s, 1), Error);
  s = sync_scenario(1.0);
  s.sync->agents = 1;
  EXPECT_THROW(run_sync_scenario(s, 1), Error);
  s = sync_scenario(1.0);
  s.sync.reset();
  EXPECT_THROW(run_sync_scenario(s, 1), Error);
}

// ---- sweeps -----------------------------------------------------------------

bool same_metrics(const Metrics& a, const Metrics& b) {
  return a.steps == b.steps && a.rms == b.rms && a.travel == b.travel &&
         a.input_quantiles == b.input_quantiles && a.theta_losses == b.theta_losses &&
         a.phi_losses == b.phi_losses && a.aborted == b.aborted;
}

TEST(Sweep, SinglePointMatchesClosedLoopRun) {
  auto s = cartpole_scenario();
  s.seeds = {17};
  const auto table = run_sweep(s, SweepAxis::kLossRate, {0.3}, 1, 1);
  ASSERT_EQ(table.rows.size(), 1u);
  const auto direct = compute_metrics(run_closed_loop(at_sweep_value(s, SweepAxis::kLossRate, 0.3), 17));
  EXPECT_TRUE(same_metrics(table.rows[0].metrics, direct));
  ASSERT_EQ(table.summary.size(), 1u);
  EXPECT_EQ(table.summary[0].mean_travel, direct.travel);
  EXPECT_EQ(table.summary[0].mean_rms, direct.rms);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  auto s = cartpole_scenario();
  const auto a = run_sweep(s, SweepAxis::kLossRate, {0.0, 0.4}, 4, 1);
  const auto b = run_sweep(s, SweepAxis::kLossRate, {0.0, 0.4}, 4, 3);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].seed, b.rows[i].seed);
    EXPECT_TRUE(same_metrics(a.rows[i].metrics, b.rows[i].metrics));
  }
}

TEST(Sweep, IntervalAxisRedesignsAndKeepsDuration) {
  auto s = cartpole_scenario();
  s.duration_s = 2.0;
  const auto t = run_sweep(s, SweepAxis::kUpdateInterval, {0.02, 0.04}, 2, 1);
  EXPECT_EQ(t.rows[0].metrics.steps, 100u);
  EXPECT_EQ(t.rows[2].metrics.steps, 50u);
  const auto L20 = resolve_loop(at_sweep_value(s, SweepAxis::kUpdateInterval, 0.02));
  const auto L40 = resolve_loop(at_sweep_value(s, SweepAxis::kUpdateInterval, 0.04));
  EXPECT_FALSE(L20.F == L40.F);
}

TEST(Sweep, SurvivalFractionCountsAborts) {
  auto s = cartpole_scenario();
  s.controller.gain = Matrix(1, 4);
  s.x0 = {0, 0.05, 0, 0};
  const auto t = run_sweep(s, SweepAxis::kLossRate, {0.0}, 3, 1);
  EXPECT_EQ(t.summary[0].survived, 0u);
  EXPECT_EQ(t.summary[0].survival_fraction, 0.0);
}

TEST(Sweep, BadAxisValuesRejected) {
  auto s = cartpole_scenario();
  EXPECT_THROW(run_sweep(s, SweepAxis::kLossRate, {}, 1), Error);
  EXPECT_THROW(run_sweep(s, SweepAxis::kLossRate, {1.0}, 1), Error);
  EXPECT_THROW(run_sweep(s, SweepAxis::kBurstLength, {10}, 1), Error);
  EXPECT_THROW(run_sweep(s, SweepAxis::kUpdateInterval, {-0.02}, 1), Error);
}

// ---- CSV --------------------------------------------------------------------

TEST(Csv, TraceHasDocumentedColumns) {
  auto s = cartpole_scenario();
  s.horizon = 5;
  std::ostringstream out;
  write_trace_csv(out, run_closed_loop(s, 1));
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "k,x0,x1,x2,x3,y0,y1,y2,y3,u0,uhat0,xhat0,xhat1,xhat2,xhat3,theta,phi,saturated,aborted");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line); ++rows)
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 18);
  EXPECT_EQ(rows, 5u);
}

TEST(Csv, AbortedFlagOnLastRow) {
  auto s = cartpole_scenario();
  s.controller.gain = Matrix(1, 4);
  s.x0 = {0, 0.05, 0, 0};
  std::ostringstream out;
  write_trace_csv(out, run_closed_loop(s, 1));
  const std::string text = out.str();
  const auto last = text.substr(text.rfind('\n', text.size() - 2) + 1);
  EXPECT_EQ(last.substr(last.size() - 3), ",1\n");
  std::istringstream in(text);
  std::size_t flagged = 0;
  for (std::string line; std::getline(in, line);) flagged += line.ends_with(",1");
  EXPECT_EQ(flagged, 1u);
}

TEST(Csv, SweepTablesHaveHeaders) {
  auto s = cartpole_scenario();
  const auto t = run_sweep(s, SweepAxis::kLossRate, {0.0, 0.5}, 2, 1);
  std::ostringstream rows, summary;
  write_sweep_csv(rows, t);
  write_sweep_summary_csv(summary, t);
  const std::string r = rows.str(), m = summary.str();
  EXPECT_EQ(r.rfind("loss_rate,seed,survived,", 0), 0u);
  EXPECT_EQ(m.rfind("loss_rate,trials,survived,survival_fraction,", 0), 0u);
  EXPECT_EQ(std::count(r.begin(), r.end(), '\n'), 5);
  EXPECT_EQ(std::count(m.begin(), m.end(), '\n'), 3);
}

}  // namespace
}  // namespace wcps::sim
