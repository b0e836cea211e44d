#include "hbt_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "hbt/detector.hpp"
#include "hbt/flux_exact.hpp"
#include "hbt/oracle.hpp"
#include "hbt/parallel.hpp"
#include "hbt_cli/analysis.hpp"
#include "hbt_cli/csv.hpp"
#include "hbt_cli/manifest.hpp"

namespace hbt::cli {

using json = nlohmann::ordered_json;

namespace {

using clock_type = std::chrono::steady_clock;

// Collects everything that goes into the run manifest.
class run_record {
 public:
  run_record(std::string command, const run_options& opt)
      : command_(std::move(command)), options_(opt), start_(clock_type::now()) {}

  void merge(const series_report& r) { truncation_.merge(r); }
  void warn(std::ostream& err, const std::string& w) {
    err << "warning: " << w << '\n';
    warnings_.push_back(w);
  }
  json& results() { return results_; }
  json& oracle() { return oracle_; }
  bool oracle_failed() const { return oracle_failed_; }
  void mark_oracle_failure() { oracle_failed_ = true; }

  // Writes `bytes` to `path` and the manifest next to it.
  void write(const std::string& path, const std::string& bytes, const run_config& cfg) {
    write_file(path, bytes);
    json m;
    m["command"] = command_;
    m["code_version"] = code_version();
    json c = json::object();
    for (const auto& [k, v] : cfg.values()) c[k] = v;
    m["config"] = c;
    m["options"] = {{"threads", options_.threads},
                    {"oracle", options_.oracle},
                    {"truncation_tol", options_.truncation_tol ? json(*options_.truncation_tol)
                                                               : json(series_policy{}.rel_tol)}};
    m["truncation"] = {{"max_terms", truncation_.terms},
                       {"max_tail_estimate", truncation_.tail_estimate},
                       {"capped", truncation_.capped},
                       {"summary", truncation_.describe()}};
    m["results"] = results_;
    if (!oracle_.is_null()) m["oracle"] = oracle_;
    m["warnings"] = warnings_;
    m["wall_time_s"] = std::chrono::duration<double>(clock_type::now() - start_).count();
    const auto slash = path.find_last_of('/');
    m["outputs"] = json::array({{{"path", slash == std::string::npos ? path : path.substr(slash + 1)},
                                 {"bytes", bytes.size()},
                                 {"sha256", sha256_hex(bytes)}}});
    write_file(manifest_path(path), m.dump(2) + "\n");
  }

 private:
  std::string command_;
  run_options options_;
  clock_type::time_point start_;
  series_report truncation_;
  std::vector<std::string> warnings_;
  json results_ = json::object();
  json oracle_;
  bool oracle_failed_ = false;
};

series_policy policy_from(const run_options& opt) {
  series_policy p;
  if (opt.truncation_tol) {
    if (!(*opt.truncation_tol > 0.0) || !(*opt.truncation_tol < 1.0))
      throw config_error("--truncation-tol must lie in (0, 1)");
    p.rel_tol = *opt.truncation_tol;
  }
  return p;
}

void define_trap(run_config& cfg) {
  cfg.define("trap.omega_x_hz", "1000");
  cfg.define("trap.omega_y_hz", "1000");
  cfg.define("trap.omega_z_hz", "1000");
  cfg.define("trap.mass_u", "4.002602");
  cfg.define("trap.gravity", "9.81");
  cfg.define("trap.drop_height", "0.3");
}

trap_spec trap_from(const run_config& cfg) {
  trap_spec s;
  s.omega = {2.0 * M_PI * cfg.get_double("trap.omega_x_hz"), 2.0 * M_PI * cfg.get_double("trap.omega_y_hz"),
             2.0 * M_PI * cfg.get_double("trap.omega_z_hz")};
  s.mass = cfg.get_double("trap.mass_u") * si::atomic_mass;
  s.gravity = cfg.get_double("trap.gravity");
  s.drop_height = cfg.get_double("trap.drop_height");
  s.validate();
  return s;
}

double positive(const run_config& cfg, const std::string& key) {
  const double v = cfg.get_double(key);
  if (!(v > 0.0) || !std::isfinite(v)) throw config_error("'" + key + "' must be positive");
  return v;
}

int count(const run_config& cfg, const std::string& key, long long lo) {
  const long long v = cfg.get_int(key);
  if (v < lo || v > 1000000) throw config_error("'" + key + "' must be in [" + std::to_string(lo) + ", 1e6]");
  return static_cast<int>(v);
}

double atom_number(const run_config& cfg) {
  const double n = cfg.get_double("gas.atom_number");
  if (!(n >= 1.0) || !std::isfinite(n)) throw config_error("gas.atom_number must be >= 1");
  return n;
}

Vec3 direction_from(const run_config& cfg, const std::string& key) {
  const std::string v = cfg.get_string(key);
  if (v == "x") return {1, 0, 0};
  if (v == "y") return {0, 1, 0};
  if (v == "z") return {0, 0, 1};
  Vec3 d;
  std::istringstream in(v);
  std::string part;
  int k = 0;
  while (std::getline(in, part, ',')) {
    if (k >= 3) throw config_error("'" + key + "' needs x, y, z or three comma separated numbers");
    run_config tmp;
    tmp.set("v", part);
    d[k++] = tmp.get_double("v");
  }
  if (k != 3 || !(d.norm() > 0.0)) throw config_error("'" + key + "' needs x, y, z or a non-zero 3-vector");
  return (1.0 / d.norm()) * d;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
  return g;
}

std::string output_path(const run_options& opt, const std::string& fallback) {
  return opt.out.empty() ? fallback : opt.out;
}

void finish_config(run_config& cfg) { cfg.check_known(); }

// ---------------------------------------------------------------- tstar

int cmd_tstar(run_config cfg, const run_options& opt, std::ostream& out, std::ostream&) {
  define_trap(cfg);
  cfg.define("gas.atom_number", "1e6");
  finish_config(cfg);
  run_record rec("tstar", opt);
  const auto spec = trap_from(cfg);
  const natural_units units(spec);
  const auto tr = trap::from_si(spec);
  const double n = cfg.get_double("gas.atom_number");
  if (!(n >= 2.0) || !std::isfinite(n)) throw config_error("gas.atom_number must be >= 2 for T*");
  const auto policy = policy_from(opt);
  const double ts = critical_temperature(tr, n, policy);
  const double sc = semiclassical_critical_temperature(tr, n);
  rec.merge(saturated_excited_number(tr, ts, policy).report);

  out << "T* = " << format_double(ts) << " hbar omega / k_B\n";
  out << "T* = " << format_double(units.temperature_to_si(ts)) << " K\n";
  out << "semiclassical hbar omega (N / zeta(3))^(1/3) = " << format_double(sc) << " hbar omega / k_B\n";
  rec.results() = {{"T_star_over_hw", ts},
                   {"T_star_K", units.temperature_to_si(ts)},
                   {"T_semiclassical_over_hw", sc}};
  if (!opt.out.empty()) {
    csv_table t({"atom_number", "T_star_over_hw", "T_star_K", "T_semiclassical_over_hw"});
    t.add_row({n, ts, units.temperature_to_si(ts), sc});
    rec.write(opt.out, t.str(), cfg);
  }
  return 0;
}

// ---------------------------------------------------------------- figures

struct figure_setup {
  trap tr;
  double t_star = 0.0;
  std::vector<double> temperatures;
  std::vector<thermal_state> states;
  std::vector<double> radii;
  Vec3 direction;
};

figure_setup setup_figure(run_config& cfg, const run_options& opt, double r_max_default,
                          int points_default, run_record& rec) {
  define_trap(cfg);
  cfg.define("gas.atom_number", "1e6");
  cfg.define("sweep.offset_min", "-2");
  cfg.define("sweep.offset_max", "2");
  cfg.define("sweep.step", "0.4");
  cfg.define("grid.r_min", "0");
  cfg.define("grid.r_max", format_double(r_max_default));
  cfg.define("grid.points", std::to_string(points_default));
  cfg.define("grid.direction", "x");
  finish_config(cfg);

  figure_setup f;
  f.tr = trap::from_si(trap_from(cfg));
  const double n = atom_number(cfg);
  if (n < 2.0) throw config_error("gas.atom_number must be >= 2 for the T* sweep");
  const auto policy = policy_from(opt);
  f.t_star = critical_temperature(f.tr, n, policy);

  const double lo = cfg.get_double("sweep.offset_min"), hi = cfg.get_double("sweep.offset_max");
  const double step = positive(cfg, "sweep.step");
  if (!(hi >= lo)) throw config_error("sweep.offset_max must be >= sweep.offset_min");
  const double steps = (hi - lo) / step;
  const long long ns = std::llround(steps);
  if (std::abs(steps - ns) > 1e-9 * std::max(1.0, steps))
    throw config_error("sweep range must be a whole number of steps");
  if (ns > 100000) throw config_error("sweep has too many temperatures");
  for (long long k = 0; k <= ns; ++k) {
    const double t = f.t_star + lo + step * static_cast<double>(k);
    if (!(t > 0.0)) throw config_error("sweep reaches a non-positive temperature");
    f.temperatures.push_back(t);
  }
  f.states.resize(f.temperatures.size());
  parallel_for(f.temperatures.size(), opt.threads,
               [&](std::size_t k) { f.states[k] = solve_fugacity(f.tr, f.temperatures[k], n, policy); });
  for (const auto& s : f.states) rec.merge(s.report);

  const double r0 = cfg.get_double("grid.r_min"), r1 = cfg.get_double("grid.r_max");
  if (!(r0 >= 0.0) || !(r1 >= r0)) throw config_error("need 0 <= grid.r_min <= grid.r_max");
  f.radii = linear_grid(r0, r1, count(cfg, "grid.points", 2));
  f.direction = direction_from(cfg, "grid.direction");
  rec.results()["T_star_over_hw"] = f.t_star;
  return f;
}

// Indices of the sweep temperatures audited under --oracle: ends and the one nearest T*.
std::vector<std::size_t> audit_rows(const figure_setup& f) {
  std::size_t mid = 0;
  for (std::size_t k = 0; k < f.temperatures.size(); ++k)
    if (std::abs(f.temperatures[k] - f.t_star) < std::abs(f.temperatures[mid] - f.t_star)) mid = k;
  std::vector<std::size_t> rows{0, mid, f.temperatures.size() - 1};
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

constexpr double oracle_tolerance = 1e-8;

void local_oracle(const figure_setup& f, bool same_point, run_record& rec) {
  json checks = json::array();
  for (std::size_t row : audit_rows(f)) {
    const auto& st = f.states[row];
    const auto trunc = oracle::truncation_spec::for_tolerance(st, 1e-12);
    json entry = {{"T_over_hw", f.temperatures[row]}, {"n_max", trunc.n_max}, {"tail_bound", trunc.tail_bound}};
    const bool isotropic = f.tr.omega.x == f.tr.omega.y && f.tr.omega.y == f.tr.omega.z;
    const double box = double(trunc.n_max[0] + 1) * (trunc.n_max[1] + 1) * (trunc.n_max[2] + 1);
    if (trunc.tail_bound > 1e-10 || (!isotropic && box > 2e7)) {
      entry["skipped"] = "mode box too large for the brute-force sum";
      checks.push_back(entry);
      continue;
    }
    for (double r : {f.radii.front(), f.radii[f.radii.size() / 2], f.radii.back()}) {
      const Vec3 a = r * f.direction;
      const pair_point p = same_point ? pair_point{a, a} : pair_point{a, {}};
      const double closed = g2_eq(st, f.tr, p);
      const double brute = oracle::brute_g2(st, f.tr, p, trunc);
      const bool pass = std::abs(closed - brute) <= oracle_tolerance;
      if (!pass) rec.mark_oracle_failure();
      json c = entry;
      c["r_tilde_over_sigma"] = r;
      c["closed_form"] = closed;
      c["oracle"] = brute;
      c["abs_diff"] = std::abs(closed - brute);
      c["pass"] = pass;
      checks.push_back(c);
    }
  }
  rec.oracle() = checks;
}

int cmd_local_figure(const std::string& name, bool same_point, double r_max, int points, run_config cfg,
                     const run_options& opt, std::ostream& out) {
  run_record rec(name, opt);
  const auto f = setup_figure(cfg, opt, r_max, points, rec);
  const std::size_t nr = f.radii.size();
  const std::size_t total = f.temperatures.size() * nr;
  std::vector<double> g(total);
  std::vector<series_report> reports(total);
  parallel_for(total, opt.threads, [&](std::size_t k) {
    const auto& st = f.states[k / nr];
    const Vec3 a = f.radii[k % nr] * f.direction;
    const pair_point p = same_point ? pair_point{a, a} : pair_point{a, {}};
    g[k] = g2_eq(st, f.tr, p, &reports[k]);
  });
  for (const auto& r : reports) rec.merge(r);

  csv_table t({"T_over_hw", "r_tilde_over_sigma", "g2"});
  json summary = json::array();
  for (std::size_t i = 0; i < f.temperatures.size(); ++i) {
    for (std::size_t j = 0; j < nr; ++j) t.add_row({f.temperatures[i], f.radii[j], g[i * nr + j]});
    summary.push_back({{"T_over_hw", f.temperatures[i]},
                       {"fugacity", f.states[i].fugacity},
                       {"ground_occupation", f.states[i].ground_occupation()},
                       {"g2_first", g[i * nr]},
                       {"g2_last", g[i * nr + nr - 1]}});
  }
  rec.results()["per_temperature"] = summary;
  if (opt.oracle) local_oracle(f, same_point, rec);

  const std::string path = output_path(opt, name + ".csv");
  rec.write(path, t.str(), cfg);
  out << "wrote " << t.rows() << " rows to " << path << " (T* = " << format_double(f.t_star)
      << " hbar omega / k_B)\n";
  return rec.oracle_failed() ? 3 : 0;
}

int cmd_fig2(run_config cfg, const run_options& opt, std::ostream& out) {
  run_record rec("fig2", opt);
  const auto f = setup_figure(cfg, opt, 0.5, 51, rec);
  const std::size_t nr = f.radii.size();
  std::vector<std::vector<double>> rows(f.temperatures.size());
  std::vector<series_report> reports(f.temperatures.size());
  // Parallel over separations inside each temperature keeps the node tables shared.
  for (std::size_t i = 0; i < f.temperatures.size(); ++i)
    rows[i] = averaged_g2_scan(f.states[i], f.tr, f.radii, f.direction, opt.threads, &reports[i]);
  for (const auto& r : reports) rec.merge(r);

  csv_table t({"T_over_hw", "r_tilde_over_sigma", "g2"});
  json summary = json::array();
  for (std::size_t i = 0; i < f.temperatures.size(); ++i) {
    for (std::size_t j = 0; j < nr; ++j) t.add_row({f.temperatures[i], f.radii[j], rows[i][j]});
    json s = {{"T_over_hw", f.temperatures[i]}, {"g2_first", rows[i].front()}};
    if (nr >= 4) {
      const auto fit = fit_gaussian(f.radii, rows[i]);
      s["gaussian_fit"] = {{"amplitude", fit.amplitude},
                           {"width", fit.width},
                           {"baseline", fit.baseline},
                           {"r_squared", fit.r_squared},
                           {"r_squared_fixed_baseline", fit.r_squared_fixed_baseline}};
    }
    summary.push_back(s);
  }
  rec.results()["per_temperature"] = summary;

  if (opt.oracle) {
    json checks = json::array();
    for (std::size_t row : audit_rows(f)) {
      for (std::size_t j : {std::size_t{0}, nr - 1}) {
        const auto mc = oracle::mc_averaged_g2(f.states[row], f.tr, f.radii[j], f.direction, 20000,
                                               1234567 + row * 1000 + j, opt.threads);
        const double zscore = (rows[row][j] - mc.value) / mc.std_error;
        const bool pass = std::abs(zscore) <= 4.0;
        if (!pass) rec.mark_oracle_failure();
        checks.push_back({{"T_over_hw", f.temperatures[row]},
                          {"r_tilde_over_sigma", f.radii[j]},
                          {"closed_form", rows[row][j]},
                          {"monte_carlo", mc.value},
                          {"std_error", mc.std_error},
                          {"z_score", zscore},
                          {"pass", pass}});
      }
    }
    rec.oracle() = checks;
  }

  const std::string path = output_path(opt, "fig2.csv");
  rec.write(path, t.str(), cfg);
  out << "wrote " << t.rows() << " rows to " << path << " (T* = " << format_double(f.t_star)
      << " hbar omega / k_B)\n";
  return rec.oracle_failed() ? 3 : 0;
}

// ---------------------------------------------------------------- flux

int cmd_flux(run_config cfg, const run_options& opt, std::ostream& out, std::ostream& err) {
  define_trap(cfg);
  cfg.define("gas.atom_number", "1e5");
  cfg.define("gas.temperature_k", "10e-6");
  cfg.define("flux.dt_span", "3");
  cfg.define("flux.dt_points", "61");
  cfg.define("flux.offset_span", "2");
  cfg.define("flux.offset_points", "3");
  cfg.define("flux.exact", "false");
  finish_config(cfg);
  run_record rec("flux", opt);

  const auto spec = trap_from(cfg);
  const natural_units units(spec);
  const auto tr = trap::from_si(spec);
  if (!(tr.gravity > 0.0)) throw config_error("flux scans need trap.gravity > 0");
  const auto policy = policy_from(opt);
  const auto state = solve_fugacity(tr, units.temperature_to_natural(positive(cfg, "gas.temperature_k")),
                                    atom_number(cfg), policy);
  rec.merge(state.report);
  const bool exact = cfg.get_bool("flux.exact");
  const double t0 = fall_time(tr);
  const auto scales = make_coherence_scales(state, tr, t0);
  const double wzt = tr.omega.z * t0;
  if (wzt < 1.0)
    rec.warn(err, "omega_z t = " + format_double(wzt) +
                      " < 1: the far-field flux expressions are outside their regime" +
                      (exact ? " (exact columns still computed)" : ""));
  if (scales.degenerate) rec.warn(err, "fugacity > 0.5: correlation lengths are position dependent");

  const double tc = scales.t_coh;
  const auto dts = linear_grid(-positive(cfg, "flux.dt_span") * tc, cfg.get_double("flux.dt_span") * tc,
                               count(cfg, "flux.dt_points", 2));
  const double off_span = cfg.get_double("flux.offset_span");
  if (!(off_span >= 0.0)) throw config_error("flux.offset_span must be >= 0");
  const auto offs = linear_grid(0.0, off_span * scales.l_detector.x, count(cfg, "flux.offset_points", 1));

  const std::size_t total = dts.size() * offs.size();
  std::vector<double> lead(total), ex(total);
  std::vector<series_report> reports(total);
  parallel_for(total, opt.threads, [&](std::size_t k) {
    const double dt = dts[k / offs.size()], x = offs[k % offs.size()];
    const auto pp = plane_pair(tr, x, 0.0, 0.0, 0.0);
    lead[k] = g2_flux_leading(state, tr, t0 + 0.5 * dt, t0 - 0.5 * dt, pp, &reports[k]);
    if (exact) {
      const auto c = g2_flux_exact(state, tr, t0 + 0.5 * dt, t0 - 0.5 * dt, pp);
      ex[k] = c.g2;
      reports[k].merge(c.terms.report);
    }
  });
  for (const auto& r : reports) rec.merge(r);

  std::vector<std::string> header{"dt_s", "x_offset_m", "g2_leading"};
  if (exact) {
    header.push_back("g2_exact");
    header.push_back("exact_minus_leading");
  }
  csv_table t(header);
  double max_diff = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    std::vector<double> row{units.time_to_si(dts[k / offs.size()]), units.length_to_si(offs[k % offs.size()]),
                            lead[k]};
    if (exact) {
      row.push_back(ex[k]);
      row.push_back(ex[k] - lead[k]);
      max_diff = std::max(max_diff, std::abs(ex[k] - lead[k]));
    }
    t.add_row(row);
  }

  const auto centre = plane_pair(tr, 0.0, 0.0, 0.0, 0.0);
  // Outside the far-field regime the decay may not fit in the scanned span; keep the table.
  double t_ext = NAN;
  try {
    t_ext = extract_decay_length(
                [&](double d) { return g2_flux_leading(state, tr, t0 + 0.5 * d, t0 - 0.5 * d, centre); },
                cfg.get_double("flux.dt_span") * tc, 81, opt.threads)
                .corr_length;
  } catch (const domain_error& e) {
    if (wzt >= 1.0) throw;
    rec.warn(err, std::string("t_coh not extracted: ") + e.what());
  }
  const auto eps = epsilon_correction(state, tr, t0 + 0.5 * tc, t0 - 0.5 * tc);
  if (!eps.valid) rec.warn(err, "epsilon estimate: " + eps.warning);
  const double rel = t_ext / tc - 1.0;
  auto maybe = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  rec.results() = {{"fall_time_s", units.time_to_si(t0)},
                   {"omega_z_t", wzt},
                   {"fugacity", state.fugacity},
                   {"t_coh_formula_s", units.time_to_si(tc)},
                   {"t_coh_extracted_s", maybe(units.time_to_si(t_ext))},
                   {"t_coh_relative_difference", maybe(rel)},
                   {"l_detector_m", {units.length_to_si(scales.l_detector.x), units.length_to_si(scales.l_detector.y),
                                     units.length_to_si(scales.l_detector.z)}},
                   {"epsilon_at_t_coh", eps.value},
                   {"epsilon_valid", eps.valid}};
  if (exact) rec.results()["max_abs_exact_minus_leading"] = max_diff;

  if (opt.oracle) {
    json checks = json::array();
    const auto trunc = oracle::truncation_spec::for_tolerance(state, 1e-12);
    if (trunc.tail_bound > 1e-10) {
      checks.push_back({{"skipped", "mode box too large for the brute-force sum"},
                        {"n_max", trunc.n_max},
                        {"tail_bound", trunc.tail_bound}});
    } else {
      for (double dt : {0.0, tc}) {
        const auto ft = compute_flux_terms(state, tr, t0 + 0.5 * dt, t0 - 0.5 * dt, centre);
        const auto bt = oracle::brute_flux_terms(state, tr, t0 + 0.5 * dt, t0 - 0.5 * dt, centre, trunc);
        double sum = -bt.ground_correction;
        for (const auto& v : bt.t) sum += v.real();
        const double brute_g2 = 1.0 + sum / (bt.mean_flux * bt.mean_flux_prime);
        const double closed = 1.0 + ft.excess;
        const bool pass = std::abs(closed - brute_g2) <= oracle_tolerance;
        if (!pass) rec.mark_oracle_failure();
        checks.push_back({{"dt_s", units.time_to_si(dt)},
                          {"closed_form", closed},
                          {"oracle", brute_g2},
                          {"abs_diff", std::abs(closed - brute_g2)},
                          {"pass", pass}});
      }
    }
    rec.oracle() = checks;
  }

  const std::string path = output_path(opt, "flux.csv");
  rec.write(path, t.str(), cfg);
  out << "wrote " << t.rows() << " rows to " << path << '\n';
  if (std::isfinite(t_ext))
    out << "t_coh extracted = " << format_double(units.time_to_si(t_ext)) << " s, l^(t) omega_z / g = "
        << format_double(units.time_to_si(tc)) << " s (relative difference " << format_double(rel) << ")\n";
  out << "epsilon at t - t' = t_coh: " << format_double(eps.value) << '\n';
  if (exact) out << "max |exact - leading| = " << format_double(max_diff) << '\n';
  return rec.oracle_failed() ? 3 : 0;
}

// ---------------------------------------------------------------- detector

int cmd_detector(run_config cfg, const run_options& opt, std::ostream& out, std::ostream& err) {
  define_trap(cfg);
  cfg.define("gas.atom_number", "1e5");
  cfg.define("gas.temperature_k", "10e-6");
  cfg.define("detector.d_x_m", "0");
  cfg.define("detector.d_y_m", "0");
  cfg.define("detector.d_z_m", "0");
  cfg.define("detector.time_s", "fall");
  finish_config(cfg);
  run_record rec("detector", opt);

  const auto spec = trap_from(cfg);
  const natural_units units(spec);
  const auto tr = trap::from_si(spec);
  const auto state = solve_fugacity(tr, units.temperature_to_natural(positive(cfg, "gas.temperature_k")),
                                    atom_number(cfg), policy_from(opt));
  rec.merge(state.report);
  double t = 0.0;
  if (cfg.get_string("detector.time_s") == "fall") {
    if (!(tr.gravity > 0.0)) throw config_error("detector.time_s = fall needs trap.gravity > 0");
    t = fall_time(tr);
  } else {
    t = units.time_to_natural(cfg.get_double("detector.time_s"));
    if (!(t >= 0.0)) throw config_error("detector.time_s must be >= 0");
  }
  detector_spec det;
  det.d = {units.length_to_natural(cfg.get_double("detector.d_x_m")),
           units.length_to_natural(cfg.get_double("detector.d_y_m")),
           units.length_to_natural(cfg.get_double("detector.d_z_m"))};
  det.plane_height = tr.drop_height;
  const auto rep = detector_response(state, tr, t, det);
  if (rep.extrapolated) rec.warn(err, "fugacity > 0.5: Gaussian resolution model used outside its regime");

  auto si3 = [&](const Vec3& v) {
    return json::array({units.length_to_si(v.x), units.length_to_si(v.y), units.length_to_si(v.z)});
  };
  json r;
  r["time_s"] = units.time_to_si(t);
  r["fugacity"] = state.fugacity;
  r["cloud_widths_m"] = si3(rep.cloud_widths);
  r["observed_widths_m"] = si3(rep.observed_widths);
  r["correlation_lengths_m"] = si3(rep.corr_lengths);
  r["observed_correlation_lengths_m"] = si3(rep.bunching.lengths);
  r["observed_amplitude"] = rep.bunching.amplitude;
  r["observed_contrast"] = rep.bunching.amplitude - 1.0;
  r["approximate_contrast"] = rep.bunching.approximate_contrast;
  r["extrapolated"] = rep.extrapolated;
  rec.results() = r;
  const std::string text = r.dump(2) + "\n";
  out << text;
  rec.write(output_path(opt, "detector.json"), text, cfg);
  return 0;
}

// ---------------------------------------------------------------- oracle audit

struct audit_table {
  csv_table table{{"check", "closed_re", "closed_im", "oracle_re", "oracle_im", "scaled_diff", "tolerance", "pass"}};
  bool failed = false;

  void add(const std::string& name, complex closed, complex oracle_value, double scale, double tol) {
    const double d = std::abs(closed - oracle_value) / scale;
    const bool pass = d <= tol;
    failed = failed || !pass;
    table.add_cells({name, format_double(closed.real()), format_double(closed.imag()),
                     format_double(oracle_value.real()), format_double(oracle_value.imag()), format_double(d),
                     format_double(tol), pass ? "1" : "0"});
  }
};

int cmd_oracle_audit(run_config cfg, const run_options& opt, std::ostream& out) {
  define_trap(cfg);
  cfg.define("audit.tau", "1");
  cfg.define("audit.fugacity", "0.3");
  cfg.define("audit.tolerance", "1e-13");
  cfg.define("audit.gravity", "1");
  cfg.define("audit.drop_height", "2");
  finish_config(cfg);
  run_record rec("oracle-audit", opt);

  // Trap shape from the config; everything else in natural units.
  const auto spec = trap_from(cfg);
  trap tr = trap::from_si(spec);
  tr.gravity = cfg.get_double("audit.gravity");
  tr.drop_height = positive(cfg, "audit.drop_height");
  tr.validate();
  const double z = cfg.get_double("audit.fugacity");
  if (!(z > 0.0 && z < 1.0)) throw config_error("audit.fugacity must lie in (0, 1)");
  const auto state = state_from_fugacity(tr, 1.0 / positive(cfg, "audit.tau"), z, policy_from(opt));
  const auto trunc = oracle::truncation_spec::for_tolerance(state, positive(cfg, "audit.tolerance"));
  if (trunc.tail_bound > 1e-9) throw config_error("audit state needs more than 5000 modes per axis");

  audit_table a;
  const double tol = oracle_tolerance;
  const pair_point p1{{0.3, 0, 0}, {0, 0.2, 0}}, p2{{0.4, 0.1, 0}, {-0.2, 0, 0.3}};
  a.add("g1_eq", g1_eq(state, tr, p1), oracle::brute_g1(state, tr, p1, trunc), 1.0, tol);
  a.add("density_eq", density_eq(state, tr, {0.5, -0.2, 0.1}), oracle::brute_density(state, tr, {0.5, -0.2, 0.1}, trunc),
        1.0, tol);
  a.add("g2_eq", g2_eq(state, tr, p2), oracle::brute_g2(state, tr, p2, trunc), 1.0, tol);

  const int n1 = 400;
  const complex u(0.7, -0.4);
  a.add("kernel_gu", kernel_gu(0.3, -0.4, u), oracle::brute_kernel_gu(0.3, -0.4, u, 1.0, n1), 1.0, tol);
  a.add("sqrt_series_lower", sqrt_series(0.3, -0.4, u, sqrt_variant::lower),
        oracle::brute_sqrt_series_lower(0.3, -0.4, u, 1.0, n1), 1.0, tol);
  a.add("sqrt_series_upper", sqrt_series(0.3, -0.4, u, sqrt_variant::upper),
        oracle::brute_sqrt_series_upper(0.3, -0.4, u, 1.0, n1), 1.0, tol);
  a.add("n_series", n_series(0.3, -0.4, u), oracle::brute_n_series(0.3, -0.4, u, 1.0, n1), 1.0, tol);
  const std::array<complex, 3> u3{complex(0.8, 0.2), complex(0.6, -0.3), complex(1.1, 0.5)};
  a.add("g1b_3d", g1b_3d(tr, p2, u3), oracle::brute_g1b_3d(tr, p2, u3, n1), 1.0, tol);

  const double tf = fall_time(tr);
  const auto pp = plane_pair(tr, 0.2, 0.1, -0.1, 0.3);
  const double t = 1.01 * tf, tp = 0.99 * tf;
  const auto ft = compute_flux_terms(state, tr, t, tp, pp);
  const auto bt = oracle::brute_flux_terms(state, tr, t, tp, pp, trunc);
  const double scale = std::abs(bt.t[0]);
  for (int k = 0; k < 5; ++k) a.add("flux_T" + std::to_string(k + 1), ft.t[k], bt.t[k], scale, tol);
  const Vec3 r_mean{0.3, -0.2, tr.drop_height};
  a.add("mean_flux", mean_flux(state, tr, t, r_mean), oracle::brute_mean_flux(state, tr, t, r_mean, trunc),
        std::abs(mean_flux(state, tr, t, r_mean)), 1e-10);

  const double tq = 3.0 / tr.omega.z;
  std::vector<double> grid;
  for (double x : {-1.5, -0.3, 0.0, 0.7, 2.1}) grid.push_back(x + 0.5 * tr.gravity * tq * tq);
  for (int n = 0; n <= 3; ++n) {
    const auto q = oracle::quad_propagate(tr.omega.z, tr.gravity, n, tq, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const complex c = propagate_mode_1d(tr.omega.z, tr.gravity, n, tq, grid[k]);
      a.add("propagate_n" + std::to_string(n) + "_x" + std::to_string(k), c, q.values[k],
            std::max(std::abs(c), 1e-3), 1e-6);
    }
  }

  rec.results() = {{"n_max", trunc.n_max}, {"tail_bound", trunc.tail_bound}, {"all_pass", !a.failed}};
  const std::string path = output_path(opt, "oracle_audit.csv");
  rec.write(path, a.table.str(), cfg);
  out << "wrote " << a.table.rows() << " checks to " << path << (a.failed ? " (FAILURES)" : " (all pass)") << '\n';
  return a.failed ? 3 : 0;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"tstar", "fig1", "fig2", "fig3", "flux", "detector", "oracle-audit"};
  return names;
}

int run_command(const std::string& name, run_config config, const run_options& options, std::ostream& out,
                std::ostream& err) {
  if (options.threads < 1) throw config_error("--threads must be >= 1");
  if (name == "tstar") return cmd_tstar(std::move(config), options, out, err);
  if (name == "fig1") return cmd_local_figure("fig1", false, 0.5, 51, std::move(config), options, out);
  if (name == "fig2") return cmd_fig2(std::move(config), options, out);
  if (name == "fig3") return cmd_local_figure("fig3", true, 6.0, 61, std::move(config), options, out);
  if (name == "flux") return cmd_flux(std::move(config), options, out, err);
  if (name == "detector") return cmd_detector(std::move(config), options, out, err);
  if (name == "oracle-audit") return cmd_oracle_audit(std::move(config), options, out);
  throw config_error("unknown command '" + name + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const convergence_error*>(&e)) return 3;
  if (dynamic_cast<const flat_profile_error*>(&e)) return 3;
  if (dynamic_cast<const underflow_error*>(&e)) return 3;
  if (dynamic_cast<const domain_error*>(&e)) return 2;
  if (dynamic_cast<const error*>(&e)) return 3;
  return 1;
}

}  // namespace hbt::cli
