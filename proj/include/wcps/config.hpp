#pragma once

#include <cctype>
#include <cstdio>
#include <span>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wcps/matrix_csv.hpp"
#include "wcps/network.hpp"
#include "wcps/sim.hpp"
#include "wcps/stability.hpp"

// Scenario files: "[section]" headers, "key = value" lines, '#' comments.
// Units are part of the key name (update_interval_ms, hold_start_s, ...).
// Lists are comma separated; matrices are rows separated by ';', or
// diag(a, b, ...). Unknown sections and keys are errors.
namespace wcps::config {

struct AnalysisConfig {
  bool critical_search = false;
  stability::LossChannel critical_channel = stability::LossChannel::kBothEqual;
  double critical_tol = 1e-6;
  double mss_tol = 1e-9;

  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct OutputConfig {
  std::string directory = "out";

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

// Worst-case jitter inputs; the defaults are the testbed values.
inline network::JitterParams default_jitter() {
  network::JitterParams p;
  p.e_ref_hat = 10e-6;
  p.e_sync_hat = 1.0 / 48e6;
  p.rho_ap_hat = 50e-6;
  p.rho_cp_hat = 50e-6;
  p.e_task_hat = 10e-6;
  p.t_end_tilde = 0.1;
  return p;
}

struct ScenarioConfig {
  sim::Scenario scenario;
  std::optional<std::string> gain_csv;  // source of an imported gain, as written in the file
  AnalysisConfig analysis;
  network::JitterParams jitter = default_jitter();
  OutputConfig output;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

// ---- value syntax -----------------------------------------------------------

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::kInvalidInput, "not a number: '" + text + "'");
  }
  require(used == text.size(), ErrorKind::kInvalidInput, "not a number: '" + text + "'");
  require(!std::isnan(v), ErrorKind::kInvalidInput, "NaN is not accepted");
  return v;
}

inline double parse_finite(const std::string& text) {
  const double v = parse_number(text);
  require(std::isfinite(v), ErrorKind::kInvalidInput, "value must be finite: '" + text + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& text) {
  require(!text.empty() && text.find_first_not_of("0123456789") == std::string::npos,
          ErrorKind::kInvalidInput, "not a nonnegative integer: '" + text + "'");
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    fail(ErrorKind::kInvalidInput, "integer out of range: '" + text + "'");
  }
}

inline bool parse_bool(const std::string& text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  fail(ErrorKind::kInvalidInput, "not a boolean: '" + text + "'");
}

inline Vector parse_vector(const std::string& text) {
  Vector v;
  if (trim(text).empty()) return v;
  for (const auto& e : split(text, ',')) v.push_back(parse_number(e));
  return v;
}

inline Matrix parse_matrix(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.rfind("diag(", 0) == 0) {
    require(text.back() == ')', ErrorKind::kInvalidInput, "unterminated diag(...)");
    const Vector d = parse_vector(text.substr(5, text.size() - 6));
    require(!d.empty(), ErrorKind::kInvalidInput, "diag() needs entries");
    return Matrix::diagonal(d);
  }
  std::vector<Vector> rows;
  for (const auto& r : split(text, ';')) rows.push_back(parse_vector(r));
  require(!rows.empty() && !rows[0].empty(), ErrorKind::kInvalidInput, "empty matrix");
  for (const auto& r : rows)
    require(r.size() == rows[0].size(), ErrorKind::kInvalidInput, "ragged matrix '" + text + "'");
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Matrix(rows.size(), rows[0].size(), std::move(flat));
}

// "a", "a+bi", "a-bi"
inline numerics::Complex parse_complex(const std::string& text) {
  if (text.empty() || text.back() != 'i') return {parse_finite(text), 0.0};
  const std::string body = text.substr(0, text.size() - 1);
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E')
      return {parse_finite(body.substr(0, i)), parse_finite(body.substr(i))};
  }
  return {0.0, parse_finite(body)};
}

// Shortest-looking decimal t with parse(t)/per == v, so values kept in SI
// units survive a write/read cycle through scaled keys exactly.
inline std::string format_scaled(double v, double per) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
  const double t = v * per;
  for (int digits = 15; digits <= 17; ++digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, t);
    if (std::stod(buf) / per == v) return buf;
  }
  double up = t, down = t;
  for (int i = 0; i < 16; ++i) {
    up = std::nextafter(up, INFINITY);
    down = std::nextafter(down, -INFINITY);
    for (double cand : {up, down})
      if (std::stod(format_double(cand)) / per == v) return format_double(cand);
  }
  // No decimal survives the unit scaling; write the SI value itself.
  return format_double(v) + " (SI)";
}

// Value of a unit-scaled key in SI units. A trailing "(SI)" marks a value
// that is already in SI units.
inline double parse_scaled(const std::string& text, double per) {
  constexpr std::string_view tag = "(SI)";
  if (text.size() > tag.size() && text.ends_with(tag))
    return parse_finite(trim(text.substr(0, text.size() - tag.size())));
  return parse_finite(text) / per;
}

inline std::string format_value(double v) { return format_scaled(v, 1.0); }

inline std::string format_vector(std::span<const double> v, double per = 1.0) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_scaled(v[i], per);
  return out;
}

inline std::string format_matrix(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (r) out += "; ";
    for (std::size_t c = 0; c < m.cols(); ++c) out += (c ? ", " : "") + format_value(m(r, c));
  }
  return out;
}

inline std::string format_complex(numerics::Complex z) {
  if (z.imag() == 0.0) return format_value(z.real());
  return format_value(z.real()) + (z.imag() < 0 ? "" : "+") + format_value(z.imag()) + "i";
}

// ---- enums ------------------------------------------------------------------

inline sim::ScenarioKind parse_kind(const std::string& s) {
  using K = sim::ScenarioKind;
  for (K k : {K::kRemoteStabilization, K::kMultiAgentSync, K::kLossSweep, K::kIntervalSweep,
              K::kBurstTest})
    if (sim::to_string(k) == s) return k;
  fail(ErrorKind::kInvalidInput, "unknown scenario kind '" + s + "'");
}

inline network::BurstTarget parse_burst_target(const std::string& s) {
  using T = network::BurstTarget;
  for (T t : {T::kSensor, T::kActuation, T::kBoth})
    if (network::to_string(t) == s) return t;
  fail(ErrorKind::kInvalidInput, "unknown burst target '" + s + "'");
}

inline std::string_view to_string(stability::LossChannel c) {
  switch (c) {
    case stability::LossChannel::kTheta: return "theta";
    case stability::LossChannel::kPhi: return "phi";
    case stability::LossChannel::kBothEqual: return "both";
  }
  return "both";
}

inline stability::LossChannel parse_channel(const std::string& s) {
  using C = stability::LossChannel;
  for (C c : {C::kTheta, C::kPhi, C::kBothEqual})
    if (to_string(c) == s) return c;
  fail(ErrorKind::kInvalidInput, "unknown loss channel '" + s + "'");
}

// ---- parsing ------------------------------------------------------------------

namespace detail {

using Entries = std::map<std::string, std::pair<std::string, std::size_t>>;  // key → (value, line)

struct Section {
  Entries entries;
  std::set<std::string> used;
  std::string name;

  bool has(const std::string& k) const { return entries.count(k) > 0; }

  // Runs f on the value when present; errors carry the line number.
  template <class F>
  void take(const std::string& k, F&& f) {
    auto it = entries.find(k);
    if (it == entries.end()) return;
    used.insert(k);
    try {
      f(it->second.first);
    } catch (const Error& e) {
      std::string msg = e.what();
      const std::string prefix = std::string(wcps::to_string(e.kind())) + ": ";
      if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      fail(e.kind(), "line " + std::to_string(it->second.second) + " [" + name + "] " + k + ": " + msg);
    }
  }

  void reject_unused() const {
    for (const auto& [k, v] : entries)
      require(used.count(k) > 0, ErrorKind::kInvalidInput,
              "line " + std::to_string(v.second) + ": unknown key '" + k + "' in [" + name + "]");
  }
};

inline const std::set<std::string>& known_sections() {
  static const std::set<std::string> s{"scenario", "plant",    "network", "controller", "sync",
                                       "sweep",    "analysis", "jitter",  "output"};
  return s;
}

}  // namespace detail

inline ScenarioConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  std::map<std::string, detail::Section> sections;
  std::string line, current;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorKind::kInvalidInput,
              "line " + std::to_string(lineno) + ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      require(detail::known_sections().count(current) > 0, ErrorKind::kInvalidInput,
              "line " + std::to_string(lineno) + ": unknown section [" + current + "]");
      require(sections.count(current) == 0, ErrorKind::kInvalidInput,
              "line " + std::to_string(lineno) + ": section [" + current + "] repeated");
      sections[current].name = current;
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kInvalidInput,
            "line " + std::to_string(lineno) + ": expected key = value");
    require(!current.empty(), ErrorKind::kInvalidInput,
            "line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    auto& sec = sections[current];
    require(sec.entries.count(key) == 0, ErrorKind::kInvalidInput,
            "line " + std::to_string(lineno) + ": key '" + key + "' repeated");
    sec.entries[key] = {trim(line.substr(eq + 1)), lineno};
  }

  ScenarioConfig cfg;
  auto& s = cfg.scenario;
  s.plant = sim::shipped_cartpole();
  auto section = [&](const std::string& n) -> detail::Section& {
    auto& sec = sections[n];
    sec.name = n;
    return sec;
  };

  // [scenario]
  auto& sc = section("scenario");
  sc.take("kind", [&](const std::string& v) { s.kind = parse_kind(v); });
  sc.take("horizon_steps", [&](const std::string& v) { s.horizon = parse_uint(v); });
  sc.take("duration_s", [&](const std::string& v) { s.duration_s = parse_finite(v); });
  sc.take("seeds", [&](const std::string& v) {
    s.seeds.clear();
    if (auto dots = v.find(".."); dots != std::string::npos) {
      const auto a = parse_uint(trim(v.substr(0, dots))), b = parse_uint(trim(v.substr(dots + 2)));
      require(a <= b, ErrorKind::kInvalidInput, "seed range is empty");
      for (auto i = a; i <= b; ++i) s.seeds.push_back(i);
    } else {
      for (const auto& e : split(v, ',')) s.seeds.push_back(parse_uint(e));
    }
  });
  bool x0_given = false;
  sc.take("initial_state", [&](const std::string& v) {
    s.x0 = parse_vector(v);
    x0_given = true;
  });

  // [plant]
  auto& pl = section("plant");
  std::string model = "cartpole";
  pl.take("model", [&](const std::string& v) { model = v; });
  if (model == "cartpole") {
    plant::CartPoleParams p;
    pl.take("cart_mass_kg", [&](const std::string& v) { p.cart_mass = parse_finite(v); });
    pl.take("pole_mass_kg", [&](const std::string& v) { p.pole_mass = parse_finite(v); });
    pl.take("pole_length_m", [&](const std::string& v) { p.pole_length = parse_finite(v); });
    pl.take("gravity_m_per_s2", [&](const std::string& v) { p.gravity = parse_finite(v); });
    pl.take("motor_gain_m_per_s2_per_V", [&](const std::string& v) { p.motor_gain = parse_finite(v); });
    pl.take("damping_per_s", [&](const std::string& v) { p.damping = parse_finite(v); });
    p.validate();
    s.plant.source = p;
  } else if (model == "explicit") {
    sim::ExplicitPlant e;
    require(pl.has("A") && pl.has("B"), ErrorKind::kInvalidInput, "explicit plant needs A and B");
    pl.take("A", [&](const std::string& v) { e.A = parse_matrix(v); });
    pl.take("B", [&](const std::string& v) { e.B = parse_matrix(v); });
    pl.take("sample_time_ms", [&](const std::string& v) { e.sample_time_s = parse_scaled(v, 1000.0); });
    require(e.A.is_square() && e.B.rows() == e.A.rows(), ErrorKind::kInvalidInput,
            "explicit plant: A must be square and B must have A's row count");
    s.plant.source = e;
    s.plant.process_noise.clear();
    s.plant.measurement_noise_std.clear();
    s.plant.input_limit.reset();
    s.plant.state_abort_bounds.reset();
  } else {
    fail(ErrorKind::kInvalidInput, "[plant] model must be cartpole or explicit, got '" + model + "'");
  }
  auto optional_vector = [](const std::string& v) -> std::optional<Vector> {
    if (v == "none") return std::nullopt;
    return parse_vector(v);
  };
  pl.take("process_noise", [&](const std::string& v) { s.plant.process_noise = parse_vector(v); });
  pl.take("measurement_noise_std",
          [&](const std::string& v) { s.plant.measurement_noise_std = parse_vector(v); });
  pl.take("input_limit", [&](const std::string& v) { s.plant.input_limit = optional_vector(v); });
  pl.take("state_abort_bounds",
          [&](const std::string& v) { s.plant.state_abort_bounds = optional_vector(v); });
  if (!x0_given) s.x0.assign(s.plant.n(), 0.0);

  // [network]
  auto& nw = section("network");
  auto& net = s.network;
  nw.take("update_interval_ms", [&](const std::string& v) { net.update_interval_s = parse_scaled(v, 1000.0); });
  nw.take("delay_ratio", [&](const std::string& v) { net.delay_ratio = static_cast<int>(parse_uint(v)); });
  nw.take("mu_theta", [&](const std::string& v) { net.mu_theta = parse_finite(v); });
  nw.take("mu_phi", [&](const std::string& v) { net.mu_phi = parse_finite(v); });
  nw.take("seed", [&](const std::string& v) { net.seed = parse_uint(v); });
  if (nw.has("burst_length_msgs")) {
    network::BurstSchedule b;
    nw.take("burst_length_msgs", [&](const std::string& v) { b.burst_length = static_cast<int>(parse_uint(v)); });
    nw.take("burst_period_s", [&](const std::string& v) { b.period_s = parse_finite(v); });
    nw.take("burst_target", [&](const std::string& v) { b.applies_to = parse_burst_target(v); });
    net.bursts = b;
  }

  // [controller]
  auto& ct = section("controller");
  auto& c = s.controller;
  std::string method = "pole_placement";
  ct.take("method", [&](const std::string& v) { method = v; });
  if (method == "pole_placement") {
    controller::PolePlacement pp{{0.8, 0.85, 0.9, 0.9}};
    ct.take("poles", [&](const std::string& v) {
      pp.poles.clear();
      for (const auto& e : split(v, ',')) pp.poles.push_back(parse_complex(e));
    });
    ct.take("pole_mapping", [&](const std::string& v) {
      if (v == "matched") c.pole_mapping = sim::PoleMapping::kMatched;
      else if (v == "constant_discrete") c.pole_mapping = sim::PoleMapping::kConstantDiscrete;
      else fail(ErrorKind::kInvalidInput, "pole_mapping must be matched or constant_discrete");
    });
    ct.take("pole_reference_interval_ms",
            [&](const std::string& v) { c.pole_reference_interval_s = parse_scaled(v, 1000.0); });
    c.method = pp;
  } else if (method == "lqr") {
    require(ct.has("Q") && ct.has("R"), ErrorKind::kInvalidInput, "lqr needs Q and R");
    controller::Lqr l;
    ct.take("Q", [&](const std::string& v) { l.Q = parse_matrix(v); });
    ct.take("R", [&](const std::string& v) { l.R = parse_matrix(v); });
    c.method = l;
  } else if (method == "imported") {
    require(ct.has("gain") != ct.has("gain_csv"), ErrorKind::kInvalidInput,
            "imported method needs exactly one of gain or gain_csv");
    ct.take("gain", [&](const std::string& v) { c.gain = parse_matrix(v); });
    ct.take("gain_csv", [&](const std::string& v) {
      cfg.gain_csv = v;
      const std::filesystem::path p(v);
      c.gain = load_matrix_csv((p.is_absolute() || base_dir.empty() ? p : base_dir / p).string());
    });
  } else {
    fail(ErrorKind::kInvalidInput,
         "[controller] method must be pole_placement, lqr or imported, got '" + method + "'");
  }

  // [sync]
  if (sections.count("sync")) {
    auto& sy = section("sync");
    sim::SyncConfig y;
    y.Q_agent = Matrix::diagonal(std::vector<double>{1, 1, 0, 0});
    y.R_agent = Matrix{{0.1}};
    y.Q_sync = Matrix::diagonal(std::vector<double>{5, 0, 0, 0});
    sy.take("agents", [&](const std::string& v) { y.agents = parse_uint(v); });
    sy.take("local_interval_ms", [&](const std::string& v) { y.local_interval_s = parse_scaled(v, 1000.0); });
    sy.take("exchange_interval_ms",
            [&](const std::string& v) { y.exchange_interval_s = parse_scaled(v, 1000.0); });
    sy.take("Q_agent", [&](const std::string& v) { y.Q_agent = parse_matrix(v); });
    sy.take("R_agent", [&](const std::string& v) { y.R_agent = parse_matrix(v); });
    sy.take("Q_sync", [&](const std::string& v) { y.Q_sync = parse_matrix(v); });
    sy.take("initial_states", [&](const std::string& v) {
      for (const auto& r : split(v, ';')) y.x0.push_back(parse_vector(r));
    });
    if (sy.has("hold_agent")) {
      sim::HoldWindow h;
      sy.take("hold_agent", [&](const std::string& v) { h.agent = parse_uint(v); });
      sy.take("hold_start_s", [&](const std::string& v) { h.start_s = parse_finite(v); });
      sy.take("hold_end_s", [&](const std::string& v) { h.end_s = parse_finite(v); });
      sy.take("hold_position_m", [&](const std::string& v) { h.position = parse_finite(v); });
      y.hold = h;
    }
    s.sync = y;
  }

  // [sweep]
  if (sections.count("sweep")) {
    auto& sw = section("sweep");
    sim::SweepConfig w;
    int axes = sw.has("loss_rates") + sw.has("update_intervals_ms") + sw.has("burst_lengths_msgs");
    require(axes == 1, ErrorKind::kInvalidInput,
            "[sweep] needs exactly one of loss_rates, update_intervals_ms, burst_lengths_msgs");
    sw.take("loss_rates", [&](const std::string& v) {
      w.axis = sim::SweepAxis::kLossRate;
      w.values = parse_vector(v);
    });
    sw.take("update_intervals_ms", [&](const std::string& v) {
      w.axis = sim::SweepAxis::kUpdateInterval;
      for (const auto& e : split(v, ',')) w.values.push_back(parse_scaled(e, 1000.0));
    });
    sw.take("burst_lengths_msgs", [&](const std::string& v) {
      w.axis = sim::SweepAxis::kBurstLength;
      w.values = parse_vector(v);
    });
    sw.take("trials", [&](const std::string& v) { w.trials = parse_uint(v); });
    s.sweep = w;
  }

  // [analysis]
  auto& an = section("analysis");
  an.take("critical_search", [&](const std::string& v) { cfg.analysis.critical_search = parse_bool(v); });
  an.take("critical_channel", [&](const std::string& v) { cfg.analysis.critical_channel = parse_channel(v); });
  an.take("critical_tol", [&](const std::string& v) { cfg.analysis.critical_tol = parse_finite(v); });
  an.take("mss_tol", [&](const std::string& v) { cfg.analysis.mss_tol = parse_finite(v); });

  // [jitter]
  auto& ji = section("jitter");
  auto& j = cfg.jitter;
  ji.take("e_ref_us", [&](const std::string& v) { j.e_ref_hat = parse_scaled(v, 1e6); });
  ji.take("e_sync_us", [&](const std::string& v) { j.e_sync_hat = parse_scaled(v, 1e6); });
  ji.take("rho_ap_ppm", [&](const std::string& v) { j.rho_ap_hat = parse_scaled(v, 1e6); });
  ji.take("rho_cp_ppm", [&](const std::string& v) { j.rho_cp_hat = parse_scaled(v, 1e6); });
  ji.take("e_task_us", [&](const std::string& v) { j.e_task_hat = parse_scaled(v, 1e6); });
  ji.take("t_end_ms", [&](const std::string& v) { j.t_end_tilde = parse_scaled(v, 1000.0); });
  j.validate();

  // [output]
  auto& ou = section("output");
  ou.take("directory", [&](const std::string& v) { cfg.output.directory = v; });

  for (auto& [name, sec] : sections) sec.reject_unused();
  s.validate();
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::kInvalidInput, "cannot open config '" + path + "'");
  return parse_config(in, std::filesystem::path(path).parent_path());
}

// ---- serialization ------------------------------------------------------------

inline void write_config(std::ostream& out, const ScenarioConfig& cfg) {
  const auto& s = cfg.scenario;
  out << "[scenario]\n";
  out << "kind = " << sim::to_string(s.kind) << '\n';
  out << "horizon_steps = " << s.horizon << '\n';
  if (s.duration_s) out << "duration_s = " << format_value(*s.duration_s) << '\n';
  out << "seeds = ";
  for (std::size_t i = 0; i < s.seeds.size(); ++i) out << (i ? ", " : "") << s.seeds[i];
  out << '\n';
  out << "initial_state = " << format_vector(s.x0) << "\n\n";

  out << "[plant]\n";
  if (const auto* p = std::get_if<plant::CartPoleParams>(&s.plant.source)) {
    out << "model = cartpole\n";
    out << "cart_mass_kg = " << format_value(p->cart_mass) << '\n';
    out << "pole_mass_kg = " << format_value(p->pole_mass) << '\n';
    out << "pole_length_m = " << format_value(p->pole_length) << '\n';
    out << "gravity_m_per_s2 = " << format_value(p->gravity) << '\n';
    out << "motor_gain_m_per_s2_per_V = " << format_value(p->motor_gain) << '\n';
    out << "damping_per_s = " << format_value(p->damping) << '\n';
  } else {
    const auto& e = std::get<sim::ExplicitPlant>(s.plant.source);
    out << "model = explicit\n";
    out << "A = " << format_matrix(e.A) << '\n';
    out << "B = " << format_matrix(e.B) << '\n';
    out << "sample_time_ms = " << format_scaled(e.sample_time_s, 1000.0) << '\n';
  }
  out << "process_noise = " << format_vector(s.plant.process_noise) << '\n';
  out << "measurement_noise_std = " << format_vector(s.plant.measurement_noise_std) << '\n';
  out << "input_limit = " << (s.plant.input_limit ? format_vector(*s.plant.input_limit) : "none") << '\n';
  out << "state_abort_bounds = "
      << (s.plant.state_abort_bounds ? format_vector(*s.plant.state_abort_bounds) : "none") << "\n\n";

  const auto& n = s.network;
  out << "[network]\n";
  out << "update_interval_ms = " << format_scaled(n.update_interval_s, 1000.0) << '\n';
  out << "delay_ratio = " << n.delay_ratio << '\n';
  out << "mu_theta = " << format_value(n.mu_theta) << '\n';
  out << "mu_phi = " << format_value(n.mu_phi) << '\n';
  out << "seed = " << n.seed << '\n';
  if (n.bursts) {
    out << "burst_length_msgs = " << n.bursts->burst_length << '\n';
    out << "burst_period_s = " << format_value(n.bursts->period_s) << '\n';
    out << "burst_target = " << network::to_string(n.bursts->applies_to) << '\n';
  }
  out << '\n';

  const auto& c = s.controller;
  out << "[controller]\n";
  if (c.gain) {
    out << "method = imported\n";
    if (cfg.gain_csv) out << "gain_csv = " << *cfg.gain_csv << '\n';
    else out << "gain = " << format_matrix(*c.gain) << '\n';
  } else if (const auto* pp = std::get_if<controller::PolePlacement>(&c.method)) {
    out << "method = pole_placement\npoles = ";
    for (std::size_t i = 0; i < pp->poles.size(); ++i) out << (i ? ", " : "") << format_complex(pp->poles[i]);
    out << "\npole_mapping = " << sim::to_string(c.pole_mapping) << '\n';
    out << "pole_reference_interval_ms = " << format_scaled(c.pole_reference_interval_s, 1000.0) << '\n';
  } else {
    const auto& l = std::get<controller::Lqr>(c.method);
    out << "method = lqr\nQ = " << format_matrix(l.Q) << "\nR = " << format_matrix(l.R) << '\n';
  }
  out << '\n';

  if (s.sync) {
    const auto& y = *s.sync;
    out << "[sync]\n";
    out << "agents = " << y.agents << '\n';
    out << "local_interval_ms = " << format_scaled(y.local_interval_s, 1000.0) << '\n';
    out << "exchange_interval_ms = " << format_scaled(y.exchange_interval_s, 1000.0) << '\n';
    out << "Q_agent = " << format_matrix(y.Q_agent) << '\n';
    out << "R_agent = " << format_matrix(y.R_agent) << '\n';
    out << "Q_sync = " << format_matrix(y.Q_sync) << '\n';
    if (!y.x0.empty()) {
      out << "initial_states = ";
      for (std::size_t i = 0; i < y.x0.size(); ++i) out << (i ? "; " : "") << format_vector(y.x0[i]);
      out << '\n';
    }
    if (y.hold) {
      out << "hold_agent = " << y.hold->agent << '\n';
      out << "hold_start_s = " << format_value(y.hold->start_s) << '\n';
      out << "hold_end_s = " << format_value(y.hold->end_s) << '\n';
      out << "hold_position_m = " << format_value(y.hold->position) << '\n';
    }
    out << '\n';
  }

  if (s.sweep) {
    const auto& w = *s.sweep;
    out << "[sweep]\n";
    switch (w.axis) {
      case sim::SweepAxis::kLossRate: out << "loss_rates = " << format_vector(w.values); break;
      case sim::SweepAxis::kUpdateInterval:
        out << "update_intervals_ms = " << format_vector(w.values, 1000.0);
        break;
      case sim::SweepAxis::kBurstLength: out << "burst_lengths_msgs = " << format_vector(w.values); break;
    }
    out << "\ntrials = " << w.trials << "\n\n";
  }

  out << "[analysis]\n";
  out << "critical_search = " << (cfg.analysis.critical_search ? "true" : "false") << '\n';
  out << "critical_channel = " << to_string(cfg.analysis.critical_channel) << '\n';
  out << "critical_tol = " << format_value(cfg.analysis.critical_tol) << '\n';
  out << "mss_tol = " << format_value(cfg.analysis.mss_tol) << "\n\n";

  const auto& j = cfg.jitter;
  out << "[jitter]\n";
  out << "e_ref_us = " << format_scaled(j.e_ref_hat, 1e6) << '\n';
  out << "e_sync_us = " << format_scaled(j.e_sync_hat, 1e6) << '\n';
  out << "rho_ap_ppm = " << format_scaled(j.rho_ap_hat, 1e6) << '\n';
  out << "rho_cp_ppm = " << format_scaled(j.rho_cp_hat, 1e6) << '\n';
  out << "e_task_us = " << format_scaled(j.e_task_hat, 1e6) << '\n';
  out << "t_end_ms = " << format_scaled(j.t_end_tilde, 1000.0) << "\n\n";

  out << "[output]\n";
  out << "directory = " << cfg.output.directory << '\n';
}

inline std::string to_text(const ScenarioConfig& cfg) {
  std::ostringstream out;
  write_config(out, cfg);
  return out.str();
}

inline ScenarioConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace wcps::config
