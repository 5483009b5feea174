// geoflow command-line driver: integrate / verify / bvp / sample subcommands
// around the header-only library. Configuration is a single strict JSON
// document; outputs are CSV trajectories and flat JSON reports, byte-stable
// for a fixed config and seed.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoflow/geoflow.hpp"

using nlohmann::json;
using namespace geoflow;

namespace {

// ---------------------------------------------------------------------------
// logging (GEO_LOG = error | info | debug)

int log_level() {
  static const int level = [] {
    const char* v = std::getenv("GEO_LOG");
    if (!v) return 0;
    if (std::strcmp(v, "debug") == 0) return 2;
    if (std::strcmp(v, "info") == 0) return 1;
    return 0;
  }();
  return level;
}

template <typename... Args>
void log_at(int lvl, const char* tag, const char* fmt, Args... args) {
  if (log_level() >= lvl) {
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}
#define LOG_INFO(...) log_at(1, "info", __VA_ARGS__)
#define LOG_DEBUG(...) log_at(2, "debug", __VA_ARGS__)

// ---------------------------------------------------------------------------
// strict config access

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidConfig, "cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::InvalidConfig, "config parse error in '" + path + "': " + ex.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(ErrorCode::InvalidConfig, where + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) fail(ErrorCode::InvalidConfig, where + ": unknown field '" + key + "'");
}

const json& require_field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) fail(ErrorCode::InvalidConfig, where + ": missing required field '" + key + "'");
  return obj.at(key);
}

double as_number(const json& v, const std::string& name) {
  if (!v.is_number()) fail(ErrorCode::InvalidConfig, "field '" + name + "' must be a number");
  return v.get<double>();
}

std::size_t as_count(const json& v, const std::string& name) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    fail(ErrorCode::InvalidConfig, "field '" + name + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

Vec as_vector(const json& v, std::size_t n, const std::string& name) {
  if (!v.is_array() || v.size() != n)
    fail(ErrorCode::InvalidConfig, "field '" + name + "' must be an array of length " + std::to_string(n));
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = as_number(v[i], name);
  return out;
}

StepControl parse_integrator(const json& cfg) {
  StepControl ctl;
  if (!cfg.contains("integrator")) return ctl;
  const json& j = cfg.at("integrator");
  reject_unknown(j, {"mode", "h", "rtol", "atol", "max_steps"}, "integrator");
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "fixed")
      ctl.mode = StepMode::fixed;
    else if (m == "adaptive")
      ctl.mode = StepMode::adaptive;
    else
      fail(ErrorCode::InvalidConfig, "integrator.mode must be 'fixed' or 'adaptive'");
  }
  if (j.contains("h")) ctl.h = as_number(j.at("h"), "integrator.h");
  if (j.contains("rtol")) ctl.rtol = as_number(j.at("rtol"), "integrator.rtol");
  if (j.contains("atol")) ctl.atol = as_number(j.at("atol"), "integrator.atol");
  if (j.contains("max_steps")) ctl.max_steps = as_count(j.at("max_steps"), "integrator.max_steps");
  if (ctl.mode == StepMode::fixed && !(ctl.h > 0.0))
    fail(ErrorCode::InvalidConfig, "integrator.h must be positive in fixed mode");
  if (!(ctl.rtol > 0.0) || !(ctl.atol > 0.0))
    fail(ErrorCode::InvalidConfig, "integrator tolerances must be positive");
  if (ctl.max_steps == 0) fail(ErrorCode::InvalidConfig, "integrator.max_steps must be positive");
  return ctl;
}

Ellipsoid parse_ellipsoid(const json& cfg) {
  const std::size_t n = as_count(require_field(cfg, "n", "config"), "n");
  return validate_ellipsoid(as_vector(require_field(cfg, "a", "config"), n, "a"));
}

// ---------------------------------------------------------------------------
// output formatting

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidConfig, "cannot open output file '" + path + "'");
  out << body;
}

std::string csv_of(const Ellipsoid& e, const std::vector<TrajectorySample>& samples) {
  const std::size_t n = e.dim();
  std::string s;
  s += "t,tau";
  for (std::size_t j = 1; j <= n; ++j) s += ",x_" + std::to_string(j);
  for (std::size_t j = 1; j <= n; ++j) s += ",y_" + std::to_string(j);
  s += ",H,I";
  if (e.distinct)
    for (std::size_t j = 1; j <= n; ++j) s += ",F_" + std::to_string(j);
  s += ",q0_res,tan_res\n";
  for (const TrajectorySample& ts : samples) {
    s += fmt(ts.t);
    s += ',';
    if (ts.tau) s += fmt(*ts.tau);
    for (double v : ts.x) s += ',' + fmt(v);
    for (double v : ts.y) s += ',' + fmt(v);
    s += ',' + fmt(ts.inv.H_free);
    s += ',' + fmt(ts.inv.I);
    if (e.distinct)
      for (double v : ts.inv.F) s += ',' + fmt(v);
    s += ',' + fmt(ts.inv.q0_residual);
    s += ',' + fmt(ts.inv.tangency_residual);
    s += '\n';
  }
  return s;
}

json drift_json(const DriftReport& rep) {
  json drift = json::object();
  for (const auto& [name, v] : rep.rel_drift) drift[name] = v;
  return json{{"rel_drift", drift},
              {"max_q0_residual", rep.max_q0_residual},
              {"max_tangency_residual", rep.max_tangency_residual},
              {"max_plucker_residual", rep.max_plucker_residual}};
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// integrate

std::string plot_script(const std::vector<std::string>& csvs) {
  std::string s = "#!/usr/bin/env python3\nimport csv\nimport matplotlib.pyplot as plt\n\n";
  s += "files = [";
  for (const std::string& f : csvs) s += "\"" + f + "\", ";
  s += "]\n";
  s +=
      "fig, (ax_xy, ax_inv) = plt.subplots(1, 2, figsize=(11, 5))\n"
      "for path in files:\n"
      "    with open(path) as fh:\n"
      "        rows = list(csv.DictReader(fh))\n"
      "    t = [float(r[\"t\"]) for r in rows]\n"
      "    ax_xy.plot([float(r[\"x_1\"]) for r in rows], [float(r[\"x_2\"]) for r in rows],\n"
      "               label=path, lw=0.8)\n"
      "    h0 = float(rows[0][\"H\"])\n"
      "    ax_inv.semilogy(t, [abs(float(r[\"H\"]) - h0) / abs(h0) + 1e-18 for r in rows],\n"
      "                    label=path + \" |dH|/H\", lw=0.8)\n"
      "ax_xy.set_xlabel(\"x_1\"); ax_xy.set_ylabel(\"x_2\"); ax_xy.legend(); ax_xy.set_title(\"trajectory\")\n"
      "ax_inv.set_xlabel(\"t\"); ax_inv.set_title(\"energy drift\"); ax_inv.legend()\n"
      "plt.tight_layout()\nplt.show()\n";
  return s;
}

int cmd_integrate(const std::string& config_path, std::string out_prefix, long long seed_override,
                  bool emit_plot) {
  const json cfg = load_config(config_path);
  reject_unknown(cfg,
                 {"n", "a", "x0", "y0", "method", "integrator", "t_end", "tau_end", "stride",
                  "project_every", "seed", "speed", "compare_points", "out_prefix"},
                 "config");
  const Ellipsoid e = parse_ellipsoid(cfg);
  const std::size_t n = e.dim();
  const StepControl ctl = parse_integrator(cfg);
  const std::string method = require_field(cfg, "method", "config").get<std::string>();
  if (method != "direct" && method != "clebsch" && method != "both")
    fail(ErrorCode::InvalidConfig, "method must be 'direct', 'clebsch' or 'both'");
  const double stride = as_number(require_field(cfg, "stride", "config"), "stride");
  const std::size_t project_every =
      cfg.contains("project_every") ? as_count(cfg.at("project_every"), "project_every") : 1;
  const std::uint64_t seed = seed_override >= 0 ? static_cast<std::uint64_t>(seed_override)
                             : cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>()
                                                    : 0;
  if (out_prefix.empty())
    out_prefix = cfg.contains("out_prefix") ? cfg.at("out_prefix").get<std::string>() : "geoflow";

  const bool needs_t_end = method != "clebsch";
  if (needs_t_end && !cfg.contains("t_end"))
    fail(ErrorCode::InvalidConfig, "method '" + method + "' requires t_end");
  if (needs_t_end && cfg.contains("tau_end"))
    fail(ErrorCode::InvalidConfig, "tau_end is only meaningful with method 'clebsch'");
  if (!needs_t_end && !cfg.contains("tau_end"))
    fail(ErrorCode::InvalidConfig, "method 'clebsch' requires tau_end");
  if (!needs_t_end && cfg.contains("t_end"))
    fail(ErrorCode::InvalidConfig, "t_end is only meaningful with methods 'direct' and 'both'");

  // initial state: explicit (then constraint-projected) or seeded sample
  PhaseState s0;
  if (cfg.contains("x0") != cfg.contains("y0"))
    fail(ErrorCode::InvalidConfig, "x0 and y0 must be given together");
  if (cfg.contains("x0")) {
    s0.x = as_vector(cfg.at("x0"), n, "x0");
    s0.y = as_vector(cfg.at("y0"), n, "y0");
    s0 = project_constraints(e, s0);
    LOG_INFO("initial state projected onto the constraint surface");
  } else {
    std::mt19937_64 rng(seed);
    const double speed = cfg.contains("speed") ? as_number(cfg.at("speed"), "speed") : 1.0;
    if (!(speed > 0.0)) fail(ErrorCode::InvalidConfig, "speed must be positive");
    s0 = sample_state(e, rng, speed);
    LOG_INFO("sampled initial state with seed %llu", static_cast<unsigned long long>(seed));
  }

  std::vector<std::string> csvs;
  if (method == "direct" || method == "both") {
    const double t_end = as_number(cfg.at("t_end"), "t_end");
    const auto samples = integrate_direct(e, s0, t_end, ctl, project_every, stride);
    LOG_DEBUG("direct run emitted %zu samples", samples.size());
    write_file(out_prefix + ".direct.csv", csv_of(e, samples));
    write_file(out_prefix + ".direct.drift.json", dump_json(drift_json(drift_report(samples))));
    csvs.push_back(out_prefix + ".direct.csv");
  }
  if (method == "clebsch") {
    const double tau_end = as_number(cfg.at("tau_end"), "tau_end");
    const auto samples = integrate_clebsch(e, s0, tau_end, ctl, stride);
    LOG_DEBUG("clebsch run emitted %zu samples", samples.size());
    write_file(out_prefix + ".clebsch.csv", csv_of(e, samples));
    write_file(out_prefix + ".clebsch.drift.json", dump_json(drift_json(drift_report(samples))));
    csvs.push_back(out_prefix + ".clebsch.csv");
  }
  if (method == "both") {
    const double t_end = as_number(cfg.at("t_end"), "t_end");
    const std::size_t points =
        cfg.contains("compare_points") ? as_count(cfg.at("compare_points"), "compare_points") : 100;
    if (points == 0) fail(ErrorCode::InvalidConfig, "compare_points must be positive");
    std::vector<double> times;
    for (std::size_t k = 0; k <= points; ++k)
      times.push_back(t_end * static_cast<double>(k) / static_cast<double>(points));
    const auto direct_states = direct_states_at_times(e, s0, times, ctl, project_every);
    const auto clebsch_states = clebsch_states_at_times(e, s0, times, ctl);

    double worst = 0.0;
    json per_time = json::array();
    for (std::size_t i = 0; i < times.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        d = std::max(d, std::abs(direct_states[i].x[j] - clebsch_states[i].x[j]));
      per_time.push_back(d);
      worst = std::max(worst, d);
    }

    // clebsch trajectory over the matching local-time window, plus the
    // tau <-> t map round-trip quality
    const double tau_end = clebsch_states.back().tau;
    const auto csamples = integrate_clebsch(e, s0, tau_end, ctl, stride);
    write_file(out_prefix + ".clebsch.csv", csv_of(e, csamples));
    write_file(out_prefix + ".clebsch.drift.json", dump_json(drift_json(drift_report(csamples))));
    csvs.push_back(out_prefix + ".clebsch.csv");

    const TimeMap map = time_map(e, csamples);
    double roundtrip = 0.0;
    for (std::size_t k = 1; k < 64; ++k) {
      const double t = map.t_min() + (map.t_max() - map.t_min()) * static_cast<double>(k) / 64.0;
      roundtrip = std::max(roundtrip, std::abs(map.tau_to_t(map.t_to_tau(t)) - t));
    }

    const json cmp{{"times", times},
                   {"max_abs_dx", worst},
                   {"per_time_max_abs_dx", per_time},
                   {"time_map_roundtrip_max", roundtrip}};
    write_file(out_prefix + ".compare.json", dump_json(cmp));
    LOG_INFO("direct/clebsch max componentwise deviation: %s", fmt(worst).c_str());
  }
  if (emit_plot) write_file(out_prefix + ".plot.py", plot_script(csvs));
  return 0;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const std::string& config_path, const std::string& out_path, long long seed_override) {
  const json cfg = load_config(config_path);
  reject_unknown(cfg,
                 {"n", "a", "seed", "identity_states", "involution_points", "lambda_pairs",
                  "lambda_points", "hamiltonian_points", "jacobi_points", "antisymmetry_points",
                  "gradient_points", "bounds"},
                 "config");
  const Ellipsoid e = parse_ellipsoid(cfg);
  require_distinct(e, "verify");
  const std::uint64_t seed = seed_override >= 0 ? static_cast<std::uint64_t>(seed_override)
                             : cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>()
                                                    : 0;
  auto count = [&](const char* key, std::size_t dflt) {
    return cfg.contains(key) ? as_count(cfg.at(key), key) : dflt;
  };
  const std::size_t identity_states = count("identity_states", 1000);
  const std::size_t involution_points = count("involution_points", 1000);
  const std::size_t lambda_pairs = count("lambda_pairs", 20);
  const std::size_t lambda_points = count("lambda_points", 100);
  const std::size_t hamiltonian_points = count("hamiltonian_points", 1000);
  const std::size_t jacobi_points = count("jacobi_points", 100);
  const std::size_t antisymmetry_points = count("antisymmetry_points", 100);
  const std::size_t gradient_points = count("gradient_points", 50);

  json bounds{{"identity", 1e-12},     {"involution", 1e-11}, {"generating", 1e-10},
              {"hamiltonian_flow", 1e-12}, {"jacobi", 1e-13},     {"antisymmetry", 1e-14},
              {"gradient", 1e-6}};
  if (cfg.contains("bounds")) {
    reject_unknown(cfg.at("bounds"),
                   {"identity", "involution", "generating", "hamiltonian_flow", "jacobi",
                    "antisymmetry", "gradient"},
                   "bounds");
    for (const auto& [k, v] : cfg.at("bounds").items()) bounds[k] = as_number(v, "bounds." + k);
  }

  std::mt19937_64 rng(seed);
  json checks = json::object();
  bool all_pass = true;
  auto record = [&](const std::string& name, double residual, double bound) {
    const bool pass = residual < bound;
    checks[name] = json{{"residual", residual}, {"bound", bound}, {"pass", pass}};
    all_pass = all_pass && pass;
    std::printf("%s  %-18s residual %.3e  bound %.1e\n", pass ? "PASS" : "FAIL", name.c_str(),
                residual, bound);
  };

  {
    double id1 = 0.0, id2 = 0.0, id3 = 0.0;
    for (std::size_t i = 0; i < identity_states; ++i) {
      const PhaseState s = sample_state(e, rng, 1.0);
      const IdentityResiduals r = identity_residuals(e, s);
      id1 = std::max(id1, r.id1);
      id2 = std::max(id2, r.id2);
      id3 = std::max(id3, r.id3);
    }
    const double bound = bounds.at("identity").get<double>();
    record("identity_1", id1, bound);
    record("identity_2", id2, bound);
    record("identity_3", id3, bound);
  }
  record("involution", involution_check(e, involution_points, rng), bounds.at("involution").get<double>());
  record("generating_involution", generating_involution_check(e, lambda_pairs, lambda_points, rng),
         bounds.at("generating").get<double>());
  record("hamiltonian_flow", hamiltonian_flow_check(e, hamiltonian_points, rng),
         bounds.at("hamiltonian_flow").get<double>());
  record("jacobi", jacobi_check(e.dim(), jacobi_points, rng), bounds.at("jacobi").get<double>());
  record("antisymmetry", antisymmetry_check(e, antisymmetry_points, rng),
         bounds.at("antisymmetry").get<double>());
  record("gradient", gradient_check(e, gradient_points, rng), bounds.at("gradient").get<double>());

  const json report{{"a", e.a}, {"n", e.dim()}, {"seed", seed}, {"checks", checks}, {"all_pass", all_pass}};
  if (!out_path.empty()) write_file(out_path, dump_json(report));
  else std::printf("%s", dump_json(report).c_str());
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bvp

int cmd_bvp(const std::string& config_path, std::string out_prefix) {
  const json cfg = load_config(config_path);
  reject_unknown(cfg, {"n", "a", "p", "q", "tol_endpoint", "max_iter", "integrator", "stride",
                       "out_prefix"},
                 "config");
  const Ellipsoid e = parse_ellipsoid(cfg);
  const std::size_t n = e.dim();
  ShootingProblem prob = make_shooting_problem(
      e, as_vector(require_field(cfg, "p", "config"), n, "p"),
      as_vector(require_field(cfg, "q", "config"), n, "q"),
      cfg.contains("tol_endpoint") ? as_number(cfg.at("tol_endpoint"), "tol_endpoint") : 1e-8,
      cfg.contains("max_iter") ? as_count(cfg.at("max_iter"), "max_iter") : 100);
  if (cfg.contains("integrator")) prob.ctl = parse_integrator(cfg);
  const double stride = cfg.contains("stride") ? as_number(cfg.at("stride"), "stride") : 0.0;
  if (out_prefix.empty())
    out_prefix = cfg.contains("out_prefix") ? cfg.at("out_prefix").get<std::string>() : "geoflow";

  const BvpSolution sol = solve_geodesic_bvp(prob, stride);
  LOG_INFO("converged in %zu iterations, T = %s", sol.iterations, fmt(sol.T).c_str());

  const json out{{"v", sol.v},
                 {"T", sol.T},
                 {"iterations", sol.iterations},
                 {"miss_norm", sol.miss_norm},
                 {"drift", drift_json(drift_report(sol.trajectory))}};
  write_file(out_prefix + ".bvp.json", dump_json(out));
  write_file(out_prefix + ".bvp.csv", csv_of(e, sol.trajectory));
  return 0;
}

// ---------------------------------------------------------------------------
// sample

int cmd_sample(const std::string& config_path, const std::string& out_path, long long seed_override) {
  const json cfg = load_config(config_path);
  reject_unknown(cfg, {"n", "a", "seed", "speed", "count"}, "config");
  const Ellipsoid e = parse_ellipsoid(cfg);
  const std::uint64_t seed = seed_override >= 0 ? static_cast<std::uint64_t>(seed_override)
                             : cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>()
                                                    : 0;
  const double speed = cfg.contains("speed") ? as_number(cfg.at("speed"), "speed") : 1.0;
  if (!(speed > 0.0)) fail(ErrorCode::InvalidConfig, "speed must be positive");
  const std::size_t n_states = cfg.contains("count") ? as_count(cfg.at("count"), "count") : 1;

  std::mt19937_64 rng(seed);
  json states = json::array();
  for (std::size_t i = 0; i < n_states; ++i) {
    const PhaseState s = sample_state(e, rng, speed);
    states.push_back(json{{"x", s.x},
                          {"y", s.y},
                          {"q0_residual", std::abs(q0_of(e, s.x) - 1.0)},
                          {"tangency_residual", std::abs(tangency_form(e, s.x, s.y))}});
  }
  const json out{{"a", e.a}, {"seed", seed}, {"speed", speed}, {"states", states}};
  if (!out_path.empty()) write_file(out_path, dump_json(out));
  else std::printf("%s", dump_json(out).c_str());
  return 0;
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoConvergence:
      return 3;
    case ErrorCode::InvalidConfig:
    case ErrorCode::NonPositiveAxis:
    case ErrorCode::InvalidDimension:
    case ErrorCode::DuplicateAxis:
    case ErrorCode::ConstraintViolation:
    case ErrorCode::PoleAtAxis:
    case ErrorCode::DegenerateChord:
      return 2;
    default:
      return 4;  // integrator-internal failures
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geodesic flow on ellipsoids: direct and Clebsch formulations"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  long long seed_override = -1;
  bool emit_plot = false;

  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_path, "output path or prefix");
    if (with_seed) sub->add_option("--seed", seed_override, "override the config seed");
  };

  CLI::App* integrate = app.add_subcommand("integrate", "integrate a geodesic (direct, clebsch or both)");
  add_common(integrate, true);
  integrate->add_flag("--emit-plot-script", emit_plot, "write a plotting script next to the CSVs");

  CLI::App* verify = app.add_subcommand("verify", "run the conserved-quantity and bracket checks");
  add_common(verify, true);

  CLI::App* bvp = app.add_subcommand("bvp", "solve the two-point geodesic problem by shooting");
  add_common(bvp, false);

  CLI::App* sample = app.add_subcommand("sample", "draw seeded on-manifold tangent states");
  add_common(sample, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(integrate)) return cmd_integrate(config_path, out_path, seed_override, emit_plot);
    if (app.got_subcommand(verify)) return cmd_verify(config_path, out_path, seed_override);
    if (app.got_subcommand(bvp)) return cmd_bvp(config_path, out_path);
    if (app.got_subcommand(sample)) return cmd_sample(config_path, out_path, seed_override);
  } catch (const Error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 2;
}
