#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"
#include "wcps/config.hpp"
#include "wcps/matrix_csv.hpp"
#include "wcps/network.hpp"
#include "wcps/sim.hpp"
#include "wcps/stability.hpp"

// Command implementations behind the wcps executable. Each writes a short
// human-readable report to `out`, its files under the output directory, and
// returns the process exit code.
namespace wcps::cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;     // bad input, uncontrollable plant, contract violation
inline constexpr int kExitAnalysis = 2;  // numerical failure, or an analyzed loop that is not MSS
inline constexpr int kExitAborted = 3;   // a simulation left its state bounds

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidInput:
    case ErrorKind::kUncontrollable:
    case ErrorKind::kContractViolation:
      return kExitUsage;
    default:
      return kExitAnalysis;
  }
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> trials;
  unsigned threads = 0;
};

inline void apply(config::ScenarioConfig& cfg, const Overrides& o) {
  if (o.seed) {
    cfg.scenario.seeds = {*o.seed};
    cfg.scenario.network.seed = *o.seed;
  }
  if (o.out_dir) cfg.output.directory = *o.out_dir;
  if (o.trials) {
    require(cfg.scenario.sweep.has_value(), ErrorKind::kInvalidInput,
            "--trials needs a [sweep] section");
    require(*o.trials >= 1, ErrorKind::kInvalidInput, "--trials must be at least 1");
    cfg.scenario.sweep->trials = *o.trials;
  }
}

inline std::filesystem::path output_dir(const config::ScenarioConfig& cfg) {
  std::filesystem::path d(cfg.output.directory);
  std::filesystem::create_directories(d);
  return d;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  require(bool(f), ErrorKind::kInvalidInput, "cannot write '" + p.string() + "'");
  f << text;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const std::vector<numerics::Complex>& zs) {
  json a = json::array();
  for (const auto& z : zs) a.push_back({{"re", z.real()}, {"im", z.imag()}});
  return a;
}

inline std::string describe(const std::vector<numerics::Complex>& zs) {
  std::string s;
  for (std::size_t i = 0; i < zs.size(); ++i) s += (i ? ", " : "") + config::format_complex(zs[i]);
  return s;
}

inline void print_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << name << " =\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << "  ";
    for (std::size_t c = 0; c < m.cols(); ++c) out << std::setw(14) << std::setprecision(6) << m(r, c);
    out << '\n';
  }
}

// ---- design -------------------------------------------------------------------

inline int cmd_design(const config::ScenarioConfig& cfg, std::ostream& out) {
  const auto& s = cfg.scenario;
  const auto dir = output_dir(cfg);
  json report;
  if (s.kind == sim::ScenarioKind::kMultiAgentSync) {
    const auto S = sim::resolve_sync(s);
    const auto& g = S.gains;
    Matrix Abig(g.F.cols(), g.F.cols()), Bbig(g.F.cols(), g.F.rows());
    for (std::size_t i = 0; i < g.agents(); ++i) {
      Abig.set_block(g.state_offset[i], g.state_offset[i], S.models[i].A());
      Bbig.set_block(g.state_offset[i], g.input_offset[i], S.models[i].B());
    }
    const auto eigs = numerics::eig(Abig + Bbig * g.F);
    print_matrix(out, "F_11 (local block, agent 0)", g.block(0, 0));
    print_matrix(out, "F_12 (coupling block, agent 0 from agent 1)", g.block(0, 1));
    out << "closed-loop spectral radius: " << numerics::spectral_radius(Abig + Bbig * g.F) << '\n';
    write_file(dir / "sync_gain.csv", [&] {
      std::ostringstream o;
      write_matrix_csv(o, g.F);
      return o.str();
    }());
    report = {{"kind", "multi_agent_sync"},
              {"agents", g.agents()},
              {"local_interval_s", S.local_interval_s},
              {"gain", to_json(g.F)},
              {"closed_loop_eigenvalues", to_json(eigs)}};
  } else {
    const double h = s.network.update_interval_s;
    const auto model = sim::build_model(s.plant, h);
    const Matrix F = sim::design_gain(s.controller, model, h);
    const auto eigs = numerics::eig(model.A() + model.B() * F);
    report = {{"kind", sim::to_string(s.kind)}, {"update_interval_s", h}};
    if (s.controller.gain) {
      report["method"] = "imported";
    } else if (const auto* pp = std::get_if<controller::PolePlacement>(&s.controller.method)) {
      const auto mapped =
          sim::map_poles(pp->poles, s.controller.pole_mapping, s.controller.pole_reference_interval_s, h);
      report["method"] = "pole_placement";
      report["pole_mapping"] = sim::to_string(s.controller.pole_mapping);
      report["requested_poles"] = to_json(pp->poles);
      report["placed_poles"] = to_json(mapped);
      out << "requested poles: " << describe(pp->poles) << '\n';
      out << "placed poles at " << h * 1000 << " ms (" << sim::to_string(s.controller.pole_mapping)
          << "): " << describe(mapped) << '\n';
    } else {
      report["method"] = "lqr";
    }
    print_matrix(out, "F", F);
    out << "closed-loop eigenvalues of A+BF: " << describe(eigs) << '\n';
    report["gain"] = to_json(F);
    report["closed_loop_eigenvalues"] = to_json(eigs);
    report["closed_loop_spectral_radius"] = numerics::spectral_radius(model.A() + model.B() * F);
    write_file(dir / "gain.csv", [&] {
      std::ostringstream o;
      write_matrix_csv(o, F);
      return o.str();
    }());
  }
  write_file(dir / "design.json", report.dump(2) + "\n");
  out << "wrote " << (dir / "design.json").string() << '\n';
  return kExitOk;
}

// ---- analyze ------------------------------------------------------------------

inline int cmd_analyze(const config::ScenarioConfig& cfg, std::ostream& out) {
  const auto& s = cfg.scenario;
  const auto dir = output_dir(cfg);
  const double h = s.network.update_interval_s;
  const auto model = sim::build_model(s.plant, h);
  const Matrix F = sim::design_gain(s.controller, model, h);
  const auto aug = stability::assemble_augmented(model, F, s.network.mu_theta, s.network.mu_phi);
  stability::MssOptions mo;
  mo.tol = cfg.analysis.mss_tol;
  const auto v = stability::check_mss(aug, mo);

  json report{{"update_interval_s", h},
              {"mu_theta", s.network.mu_theta},
              {"mu_phi", s.network.mu_phi},
              {"rho", v.rho},
              {"is_mss", v.is_mss},
              {"status", stability::to_string(v.status)}};
  out << "mu_theta = " << s.network.mu_theta << ", mu_phi = " << s.network.mu_phi << '\n';
  out << "second-moment spectral radius rho = " << std::setprecision(10) << v.rho << " ("
      << stability::to_string(v.status) << ")\n";
  if (v.certificate) {
    const auto path = dir / "certificate.csv";
    write_file(path, [&] {
      std::ostringstream o;
      write_matrix_csv(o, *v.certificate);
      return o.str();
    }());
    report["certificate"] = path.string();
    out << "Lyapunov certificate written to " << path.string() << '\n';
  }
  if (cfg.analysis.critical_search) {
    stability::CriticalOptions co;
    co.channel = cfg.analysis.critical_channel;
    co.tol = cfg.analysis.critical_tol;
    const auto c = stability::critical_probability(model, F, co);
    report["critical"] = {{"channel", config::to_string(co.channel)},
                          {"mu_star", c.mu_star},
                          {"tolerance", co.tol},
                          {"rho_at_lo", c.rho_at_lo},
                          {"rho_at_one", c.rho_at_one}};
    out << "critical delivery probability (" << config::to_string(co.channel)
        << "): mu* = " << c.mu_star << " (+/- " << co.tol << ")\n";
  }
  write_file(dir / "analysis.json", report.dump(2) + "\n");
  return v.is_mss ? kExitOk : kExitAnalysis;
}

// ---- simulate -----------------------------------------------------------------

inline json metrics_json(const sim::Metrics& m) {
  json q = json::object();
  for (std::size_t i = 0; i < sim::kQuantileLevels.size(); ++i)
    q["q" + std::to_string(std::llround(sim::kQuantileLevels[i] * 100))] = m.input_quantiles[i];
  return {{"steps", m.steps},          {"aborted", m.aborted},
          {"rms", m.rms},              {"travel_m", m.travel},
          {"input_min", m.input_min},  {"input_max", m.input_max},
          {"input_quantiles", q},      {"theta_losses", m.theta_losses},
          {"phi_losses", m.phi_losses}, {"saturated_steps", m.saturated_steps}};
}

inline void write_trace(const std::filesystem::path& p, const sim::SimTrace& t) {
  std::ofstream f(p);
  require(bool(f), ErrorKind::kInvalidInput, "cannot write '" + p.string() + "'");
  sim::write_trace_csv(f, t);
}

inline int cmd_simulate(const config::ScenarioConfig& cfg, std::ostream& out) {
  const auto& s = cfg.scenario;
  const auto dir = output_dir(cfg);
  json runs = json::array();
  bool any_abort = false;

  if (s.kind == sim::ScenarioKind::kMultiAgentSync) {
    for (auto seed : s.seeds) {
      const auto coupled = sim::run_sync_scenario(s, seed);
      const auto decoupled = sim::run_decoupled_agents(s, seed);
      json agents = json::array();
      for (std::size_t i = 0; i < coupled.size(); ++i) {
        write_trace(dir / ("trace_seed" + std::to_string(seed) + "_agent" + std::to_string(i) + ".csv"),
                    coupled[i]);
        any_abort |= coupled[i].aborted();
        agents.push_back(metrics_json(sim::compute_metrics(coupled[i])));
      }
      const double ec = sim::mean_pairwise_error(coupled), ed = sim::mean_pairwise_error(decoupled);
      out << "seed " << seed << ": mean pairwise position error coupled " << ec << " m, decoupled "
          << ed << " m\n";
      runs.push_back({{"seed", seed},
                      {"mean_pairwise_error_coupled_m", ec},
                      {"mean_pairwise_error_decoupled_m", ed},
                      {"agents", agents}});
    }
  } else {
    const auto L = sim::resolve_loop(s);
    for (auto seed : s.seeds) {
      const auto t = sim::run_loop(L, seed);
      write_trace(dir / ("trace_seed" + std::to_string(seed) + ".csv"), t);
      json r{{"seed", seed}};
      out << "seed " << seed << ": ";
      if (t.steps.empty()) {
        out << "initial state outside its bounds";
      } else {
        const auto m = sim::compute_metrics(t);
        r["metrics"] = metrics_json(m);
        out << m.steps << " steps, travel " << m.travel << " m, input [" << m.input_min << ", "
            << m.input_max << "] V, " << m.saturated_steps << " saturated";
      }
      if (t.abort) {
        any_abort = true;
        r["abort"] = {{"step", t.abort->step},
                      {"channel", t.abort->channel},
                      {"value", t.abort->value},
                      {"bound", t.abort->bound}};
        out << ", aborted at step " << t.abort->step << " (x" << t.abort->channel << " = "
            << t.abort->value << ")";
      }
      out << '\n';
      runs.push_back(r);
    }
  }
  json summary{{"kind", sim::to_string(s.kind)}, {"any_aborted", any_abort}, {"runs", runs}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  return any_abort ? kExitAborted : kExitOk;
}

// ---- sweep --------------------------------------------------------------------

inline int cmd_sweep(const config::ScenarioConfig& cfg, std::ostream& out, unsigned threads = 0) {
  const auto& s = cfg.scenario;
  const auto dir = output_dir(cfg);
  const auto table = sim::run_sweep(s, threads);
  {
    std::ofstream f(dir / "sweep_rows.csv");
    sim::write_sweep_csv(f, table);
  }
  {
    std::ofstream f(dir / "sweep_summary.csv");
    sim::write_sweep_summary_csv(f, table);
  }
  out << std::setw(16) << sim::to_string(table.axis) << std::setw(10) << "survived" << std::setw(16)
      << "mean travel m" << std::setw(14) << "median m" << '\n';
  for (const auto& r : table.summary)
    out << std::setw(16) << r.value << std::setw(6) << r.survived << '/' << std::left << std::setw(3)
        << r.trials << std::right << std::setw(16) << r.mean_travel << std::setw(14)
        << r.travel_quantiles[3] << '\n';
  out << "wrote " << (dir / "sweep_rows.csv").string() << " and sweep_summary.csv\n";
  return kExitOk;
}

// ---- jitter -------------------------------------------------------------------

inline int cmd_jitter(const config::ScenarioConfig& cfg, std::ostream& out) {
  const auto b = network::jitter_breakdown(cfg.jitter);
  const double total = network::jitter_bound(cfg.jitter);
  out << std::setprecision(6);
  out << "reference sync term   " << b.reference * 1e6 << " us\n";
  out << "SYNC line term        " << b.sync_line * 1e6 << " us\n";
  out << "clock drift term      " << b.drift * 1e6 << " us\n";
  out << "task variation term   " << b.task * 1e6 << " us\n";
  out << "worst-case jitter     " << total * 1e6 << " us\n";
  json report{{"reference_s", b.reference}, {"sync_line_s", b.sync_line}, {"drift_s", b.drift},
              {"task_s", b.task},           {"bound_s", total}};
  write_file(output_dir(cfg) / "jitter.json", report.dump(2) + "\n");
  return kExitOk;
}

}  // namespace wcps::cli
