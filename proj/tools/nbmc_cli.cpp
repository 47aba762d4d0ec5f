// Command-line surface for the stopping-rule library: planning, exact
// confidence evaluation, sequential runs, appendix verification and
// figure-data emission. JSON is the canonical output; CSV is provided for
// tabular payloads. Reports go to stdout, diagnostics to stderr.
//
// Exit codes: 0 success, 2 invalid or unachievable parameters,
// 3 computational cap exceeded, 4 input format error, 5 verification failure.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nbmc/appendix.hpp"
#include "nbmc/core.hpp"
#include "nbmc/engine.hpp"
#include "nbmc/errors.hpp"
#include "nbmc/exact.hpp"
#include "nbmc/version.hpp"

using json = nlohmann::ordered_json;
using namespace nbmc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitCap = 3;
constexpr int kExitFormat = 4;
constexpr int kExitVerifyFailed = 5;

// 17 significant digits round-trips IEEE doubles exactly.
std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Numbers that can legitimately be infinite (vacuous worst margins) are
// serialized as null; nothing non-finite may reach the output.
json num_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

void assert_finite(const json& j) {
  if (j.is_number_float() && !std::isfinite(j.get<double>()))
    throw std::logic_error("internal error: non-finite number in report payload");
  if (j.is_object() || j.is_array())
    for (const auto& item : j) assert_finite(item);
}

json make_envelope(const std::string& command, json parameters) {
  json env;
  env["tool_version"] = kToolVersion;
  env["command"] = command;
  env["parameters"] = std::move(parameters);
  env["results"] = json::object();
  env["warnings"] = json::array();
  return env;
}

void emit_csv_value(std::ostream& os, const json& v) {
  if (v.is_number_float())
    os << fmt17(v.get<double>());
  else if (v.is_boolean())
    os << (v.get<bool>() ? 1 : 0);
  else if (v.is_null())
    os << "";
  else
    os << v.dump();  // integers and quoted strings
}

// CSV rendering of a flat results object: header line of keys, one value row.
void emit_envelope(const json& env, const std::string& format) {
  assert_finite(env);
  if (format == "json") {
    std::cout << env.dump(2) << "\n";
    return;
  }
  const json& r = env["results"];
  bool first = true;
  for (const auto& [key, value] : r.items()) {
    if (value.is_object() || value.is_array())
      throw std::invalid_argument("--format csv is only available for flat reports; use json");
    std::cout << (first ? "" : ",") << key;
    first = false;
  }
  std::cout << "\n";
  first = true;
  for (const auto& [key, value] : r.items()) {
    (void)key;
    std::cout << (first ? "" : ",");
    emit_csv_value(std::cout, value);
    first = false;
  }
  std::cout << "\n";
}

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  long long count = 0;
};

GridSpec parse_grid(const std::string& spec) {
  GridSpec g;
  char extra;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%lld%c", &g.lo, &g.hi, &g.count, &extra) != 3 ||
      !(g.lo > 0.0) || g.hi < g.lo || g.count < 1)
    throw std::invalid_argument("grid spec must be lo:hi:count with 0 < lo <= hi, count >= 1");
  return g;
}

// Smallest N whose margin condition admits m.
long long lowest_admissible_N(double m) {
  const double t = (1.0 + std::sqrt(1.0 + 4.0 * m * (m + 1.0))) / (2.0 * m);
  long long n = std::max<long long>(3, static_cast<long long>(t * t) - 2);
  while (core::min_margin(n) > m) ++n;
  while (n > 3 && core::min_margin(n - 1) <= m) --n;
  return n;
}

int cmd_plan(std::optional<double> margin, std::optional<double> mu1_in,
             std::optional<double> mu2_in, double confidence, long long max_N,
             const std::string& format) {
  double mu1, mu2;
  long long N;
  if (margin) {
    N = core::min_N_for(*margin, confidence, max_N);
    mu1 = mu2 = 1.0 + *margin;
  } else {
    mu1 = *mu1_in;
    mu2 = *mu2_in;
    if (!(mu1 > 1.0 && mu2 > 1.0)) throw std::invalid_argument("mu1 and mu2 must be > 1");
    N = 0;
    for (long long cand = 3; cand <= max_N; ++cand) {
      if (!core::check_conditions_improved(cand, mu1, mu2).all_ok()) continue;
      if (core::asymptotic_confidence(cand, mu1, mu2) > confidence) {
        N = cand;
        break;
      }
    }
    if (N == 0)
      throw unachievable_error("no N <= " + std::to_string(max_N) +
                               " certifies (mu1, mu2) at the requested confidence");
  }

  json params;
  if (margin) params["margin"] = *margin;
  params["mu1"] = mu1;
  params["mu2"] = mu2;
  params["confidence"] = confidence;
  params["max_N"] = max_N;

  json env = make_envelope("plan", params);
  const double c_bar = core::asymptotic_confidence(N, mu1, mu2);
  const double legacy_mu1_bound = core::mu1_lower_bound_legacy(N);
  const bool legacy_ok = mu1 >= legacy_mu1_bound && mu2 >= core::mu2_lower_bound(N);
  json& r = env["results"];
  r["N"] = N;
  r["c_bar"] = c_bar;
  r["mu2_bound"] = core::mu2_lower_bound(N);
  r["mu1_bound"] = core::mu1_lower_bound_improved(N);
  r["legacy_mu1_bound"] = legacy_mu1_bound;
  r["legacy_certifiable"] = legacy_ok;
  r["legacy_p_limit"] = legacy_ok ? json(core::legacy_p_limit(N, mu1)) : json(nullptr);
  emit_envelope(env, format);
  return kExitOk;
}

int cmd_exact(long long N, double p, double mu1, double mu2, const std::string& format) {
  const auto ec = exact::exact_confidence(N, p, mu1, mu2);
  json env = make_envelope(
      "exact", json{{"N", N}, {"p", p}, {"mu1", mu1}, {"mu2", mu2}});
  json& r = env["results"];
  r["n1"] = ec.n1;
  r["n2"] = ec.n2;
  r["c1"] = ec.c1;
  r["c2"] = ec.c2;
  r["c"] = ec.c;
  r["c_bar"] = ec.c_bar;
  r["c1_bar"] = ec.c1_bar;
  r["c2_bar"] = ec.c2_bar;
  r["margin"] = ec.c - ec.c_bar;
  r["interval_below_support"] = ec.interval_below_support;
  if (ec.interval_below_support)
    env["warnings"].push_back("interval lies below the support (n2 < N); confidence is zero");
  if (!core::check_conditions_improved(N, mu1, mu2).all_ok())
    env["warnings"].push_back("sufficient conditions not met; c > c_bar is not guaranteed");
  emit_envelope(env, format);
  return kExitOk;
}

int cmd_run(long long N, double mu1, double mu2, const std::string& source_kind,
            std::optional<double> p, std::optional<std::uint64_t> seed,
            const std::string& path, std::optional<long long> max_trials,
            const std::string& format) {
  const auto plan = core::make_plan(N, mu1, mu2);

  std::unique_ptr<engine::TrialSource> source;
  std::ifstream file;
  if (source_kind == "synthetic") {
    if (!p || !seed)
      throw std::invalid_argument("--source synthetic requires --p and --seed");
    source = engine::make_synthetic_source(*p, *seed);
  } else if (source_kind == "file") {
    if (path.empty()) throw std::invalid_argument("--source file requires --path");
    file.open(path);
    if (!file) throw std::invalid_argument("cannot open trial file: " + path);
    source = std::make_unique<engine::ReplaySource>(file);
  } else if (source_kind == "stdin") {
    source = std::make_unique<engine::ReplaySource>(std::cin);
  } else {
    throw std::invalid_argument("--source must be synthetic, file or stdin");
  }

  json params;
  params["N"] = N;
  params["mu1"] = mu1;
  params["mu2"] = mu2;
  params["source"] = source_kind;
  if (p) params["p"] = *p;
  if (seed) params["seed"] = *seed;
  if (!path.empty()) params["path"] = path;
  if (max_trials) params["max_trials"] = *max_trials;

  const auto out = engine::run_until_stop(plan, *source, max_trials);

  json env = make_envelope("run", params);
  json& r = env["results"];
  switch (out.session.status) {
    case engine::SessionStatus::stopped: r["status"] = "stopped"; break;
    case engine::SessionStatus::exhausted: r["status"] = "exhausted"; break;
    case engine::SessionStatus::capped: r["status"] = "capped"; break;
    case engine::SessionStatus::running: r["status"] = "running"; break;
  }
  r["trials"] = out.session.trials;
  r["successes"] = out.session.successes;
  r["c_bar"] = plan.c_bar;
  if (source_kind == "synthetic") r["generator"] = engine::kGeneratorName;
  if (out.result) {
    r["n"] = out.result->n;
    r["p_hat"] = out.result->p_hat;
    r["ci_low"] = out.result->ci.low;
    r["ci_high"] = out.result->ci.high;
    r["ci_upper_clamped"] = out.result->ci.upper_clamped;
  } else {
    env["warnings"].push_back("run ended before the required occurrences; no estimate");
  }
  emit_envelope(env, format);
  return kExitOk;
}

int cmd_verify_lemma(long long N_min, long long N_max, std::vector<double> ps,
                     const std::string& format) {
  if (ps.empty()) ps = {0.01, 0.1, 0.3, 0.7};
  json checks = json::array();
  double worst = std::numeric_limits<double>::infinity();
  bool all_hold = true;
  long long points = 0;
  for (long long N = N_min; N <= N_max; ++N) {
    for (double p : ps) {
      const auto rep = appendix::lemma1_check(N, p);
      all_hold = all_hold && rep.all_hold;
      worst = std::min(worst, rep.worst_relative_margin);
      points += rep.points_checked;
      checks.push_back(json{{"N", rep.N},
                            {"p", rep.p},
                            {"n_star_max", rep.n_star_max},
                            {"points_checked", rep.points_checked},
                            {"worst_relative_margin", num_or_null(rep.worst_relative_margin)},
                            {"all_hold", rep.all_hold},
                            {"policy", rep.policy}});
    }
  }
  json env = make_envelope("verify",
                           json{{"mode", "lemma1"},
                                {"N_min", N_min},
                                {"N_max", N_max},
                                {"p", ps}});
  env["results"]["all_hold"] = all_hold;
  env["results"]["points_checked"] = points;
  env["results"]["worst_relative_margin"] = num_or_null(worst);
  env["results"]["checks"] = std::move(checks);
  if (format != "json")
    throw std::invalid_argument("verify reports are nested; only --format json is available");
  emit_envelope(env, format);
  return all_hold ? kExitOk : kExitVerifyFailed;
}

int cmd_verify_coefficients(long long N_min, long long N_max, long long j_max,
                            long long density, const std::string& format) {
  const auto rep = appendix::coefficients_nonnegative_sweep(N_min, N_max, j_max, density);
  json env = make_envelope("verify", json{{"mode", "coefficients"},
                                          {"N_min", N_min},
                                          {"N_max", N_max},
                                          {"j_max", j_max},
                                          {"density", density}});
  json& r = env["results"];
  r["all_nonnegative"] = rep.all_nonnegative;
  r["points_checked"] = rep.points_checked;
  r["worst_normalized_margin"] = rep.worst_normalized_margin;
  r["worst_family"] =
      rep.worst.family == appendix::CoefficientFamily::x ? "x" : "x_prime";
  r["worst_N"] = rep.worst.N;
  r["worst_j"] = rep.worst.j;
  r["worst_nu"] = rep.worst.nu;
  r["worst_value"] = rep.worst.value;
  emit_envelope(env, format);
  return rep.all_nonnegative ? kExitOk : kExitVerifyFailed;
}

int cmd_curves(const std::string& m_grid_spec, const std::string& n_grid_csv,
               const std::string& out_path, const std::string& format) {
  const GridSpec grid = parse_grid(m_grid_spec);
  std::vector<long long> n_grid;
  if (!n_grid_csv.empty()) {
    std::size_t pos = 0;
    while (pos < n_grid_csv.size()) {
      std::size_t next = n_grid_csv.find(',', pos);
      if (next == std::string::npos) next = n_grid_csv.size();
      const std::string tok = n_grid_csv.substr(pos, next - pos);
      try {
        n_grid.push_back(std::stoll(tok));
      } catch (const std::exception&) {
        throw std::invalid_argument("--N-grid must be a comma-separated integer list");
      }
      if (n_grid.back() < 3) throw std::invalid_argument("--N-grid entries must be >= 3");
      pos = next + 1;
    }
  }

  std::ofstream out(out_path);
  if (!out) throw std::invalid_argument("cannot open output file: " + out_path);
  out << "m,N,c_bar,is_min_curve\n";
  long long rows = 0;
  for (long long i = 0; i < grid.count; ++i) {
    const double m = grid.count == 1
                         ? grid.lo
                         : grid.lo + (grid.hi - grid.lo) * static_cast<double>(i) /
                               static_cast<double>(grid.count - 1);
    // solid curve: the smallest confidence that can be guaranteed at m,
    // taken at the lowest N the margin condition permits
    const long long n_min = lowest_admissible_N(m);
    out << fmt17(m) << "," << n_min << ","
        << fmt17(core::asymptotic_confidence(n_min, 1.0 + m, 1.0 + m)) << ",1\n";
    ++rows;
    // dashed curves: fixed N over the admissible part of the same m grid
    for (long long N : n_grid) {
      if (m < core::min_margin(N)) continue;
      out << fmt17(m) << "," << N << ","
          << fmt17(core::asymptotic_confidence(N, 1.0 + m, 1.0 + m)) << ",0\n";
      ++rows;
    }
  }
  out.close();

  json env = make_envelope("curves", json{{"m_grid", m_grid_spec},
                                          {"N_grid", n_grid},
                                          {"out", out_path}});
  env["results"]["rows"] = rows;
  env["results"]["path"] = out_path;
  emit_envelope(env, format);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential stopping rule for Monte Carlo estimation of rare event probabilities"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string format = "json";

  // plan
  auto* plan = app.add_subcommand("plan", "Choose the smallest N for a margin and confidence");
  std::optional<double> plan_margin, plan_mu1, plan_mu2;
  double plan_conf = 0.0;
  long long plan_max_N = 1'000'000;
  plan->add_option("--margin", plan_margin, "symmetric relative margin m (mu1 = mu2 = 1+m)");
  plan->add_option("--mu1", plan_mu1, "lower interval factor");
  plan->add_option("--mu2", plan_mu2, "upper interval factor");
  plan->add_option("--confidence", plan_conf, "target confidence in (0,1)")->required();
  plan->add_option("--max-N", plan_max_N, "scan cap for N");
  plan->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  // exact
  auto* ex = app.add_subcommand("exact", "Exact confidence for a concrete p");
  long long ex_N = 0;
  double ex_p = 0.0, ex_mu1 = 0.0, ex_mu2 = 0.0;
  ex->add_option("--N", ex_N)->required();
  ex->add_option("--p", ex_p)->required();
  ex->add_option("--mu1", ex_mu1)->required();
  ex->add_option("--mu2", ex_mu2)->required();
  ex->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  // run
  auto* run = app.add_subcommand("run", "Run the stopping rule against a trial source");
  long long run_N = 0;
  double run_mu1 = 0.0, run_mu2 = 0.0;
  std::string run_source, run_path;
  std::optional<double> run_p;
  std::optional<std::uint64_t> run_seed;
  std::optional<long long> run_max_trials;
  run->add_option("--N", run_N)->required();
  run->add_option("--mu1", run_mu1)->required();
  run->add_option("--mu2", run_mu2)->required();
  run->add_option("--source", run_source, "synthetic | file | stdin")->required();
  run->add_option("--p", run_p, "Bernoulli p for the synthetic source");
  run->add_option("--seed", run_seed, "seed for the synthetic source");
  run->add_option("--path", run_path, "trial file for --source file");
  run->add_option("--max-trials", run_max_trials);
  run->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  // verify
  auto* verify = app.add_subcommand("verify", "Numerically certify the appendix results");
  bool verify_lemma = false, verify_coeffs = false;
  long long v_N = 0, v_N_min = 3, v_N_max = 50, v_j_max = 20, v_density = 200;
  std::vector<double> v_ps;
  verify->add_flag("--lemma1", verify_lemma, "check the integral-vs-sum inequality");
  verify->add_flag("--coefficients", verify_coeffs, "check coefficient nonnegativity");
  verify->add_option("--N", v_N, "single N (overrides --N-min/--N-max)");
  verify->add_option("--N-min", v_N_min);
  verify->add_option("--N-max", v_N_max);
  verify->add_option("--p", v_ps, "p values for --lemma1 (repeatable)");
  verify->add_option("--j-max", v_j_max);
  verify->add_option("--density", v_density, "nu grid points per interval");
  verify->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  // curves
  auto* curves = app.add_subcommand("curves", "Emit guaranteed-confidence curve data as CSV");
  std::string cur_m_grid = "0.12:1.4:60", cur_n_grid, cur_out;
  curves->add_option("--m-grid", cur_m_grid, "margin grid lo:hi:count");
  curves->add_option("--N-grid", cur_n_grid, "comma-separated N list for fixed-N curves");
  curves->add_option("--out", cur_out, "output CSV path")->required();
  curves->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);

    if (plan->parsed()) {
      if (plan_margin && (plan_mu1 || plan_mu2))
        throw std::invalid_argument("give either --margin or --mu1/--mu2, not both");
      if (!plan_margin && !(plan_mu1 && plan_mu2))
        throw std::invalid_argument("give --margin, or both --mu1 and --mu2");
      return cmd_plan(plan_margin, plan_mu1, plan_mu2, plan_conf, plan_max_N, format);
    }
    if (ex->parsed()) return cmd_exact(ex_N, ex_p, ex_mu1, ex_mu2, format);
    if (run->parsed())
      return cmd_run(run_N, run_mu1, run_mu2, run_source, run_p, run_seed, run_path,
                     run_max_trials, format);
    if (verify->parsed()) {
      if (verify_lemma == verify_coeffs)
        throw std::invalid_argument("give exactly one of --lemma1 or --coefficients");
      if (v_N != 0) v_N_min = v_N_max = v_N;
      if (verify_lemma) return cmd_verify_lemma(v_N_min, v_N_max, v_ps, format);
      return cmd_verify_coefficients(v_N_min, v_N_max, v_j_max, v_density, format);
    }
    if (curves->parsed()) return cmd_curves(cur_m_grid, cur_n_grid, cur_out, format);
    throw std::invalid_argument("no subcommand given");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const stream_format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const term_cap_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCap;
  } catch (const unachievable_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
