// polymoe command line: fit / kl / plan / table / rate / experiment.
//
// Every output file embeds {tool_version, seed, config_hash}; CSV outputs
// carry them in a leading comment line so byte-level reproducibility can be
// checked across runs and thread counts.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "polymoe/approx_probe.hpp"
#include "polymoe/divergence.hpp"
#include "polymoe/em_fit.hpp"
#include "polymoe/errors.hpp"
#include "polymoe/io.hpp"
#include "polymoe/planner.hpp"
#include "polymoe/synth.hpp"
#include "polymoe/threading.hpp"
#include "polymoe/version.hpp"

namespace {

using polymoe::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Common {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = auto
};

void resolve_threads(const Common& common) {
  int threads = common.threads;
  if (const char* env = std::getenv("POLYMOE_THREADS")) {
    try {
      threads = std::stoi(env);
    } catch (...) {
      throw std::invalid_argument("POLYMOE_THREADS must be an integer");
    }
  }
  polymoe::set_thread_count(threads);
  std::cerr << "# threads: " << polymoe::thread_count() << "\n";
}

json meta_block(std::uint64_t seed, const json& semantic_config) {
  return json{{"tool_version", polymoe::kToolVersion},
              {"seed", seed},
              {"config_hash", polymoe::config_hash(semantic_config)}};
}

std::string meta_comment(std::uint64_t seed, const json& semantic_config) {
  std::ostringstream os;
  os << "# tool_version=" << polymoe::kToolVersion << " seed=" << seed
     << " config_hash=" << polymoe::config_hash(semantic_config) << "\n";
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw polymoe::data_error("cannot write " + path);
  out << text;
}

double parse_alpha(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

// ---------------------------------------------------------------- fit ----

int run_fit(const Common& common, const std::string& data_path,
            const std::string& config_path, const std::string& model_out,
            const std::string& report_out) {
  const json cfg_json = polymoe::read_json_file(config_path);
  polymoe::require_keys(cfg_json,
                        {"family", "m", "k", "max_em_iters", "rel_tol",
                         "inner_newton_iters", "inner_tol", "restarts", "ridge",
                         "seed", "rescale"},
                        config_path);
  polymoe::FitConfig cfg;
  const polymoe::ExpFamily family =
      polymoe::ExpFamily::parse(cfg_json.at("family").get<std::string>());
  cfg.m = cfg_json.at("m").get<int>();
  cfg.k = cfg_json.at("k").get<int>();
  if (cfg_json.contains("max_em_iters")) cfg.max_em_iters = cfg_json["max_em_iters"];
  if (cfg_json.contains("rel_tol")) cfg.rel_tol = cfg_json["rel_tol"];
  if (cfg_json.contains("inner_newton_iters"))
    cfg.inner_newton_iters = cfg_json["inner_newton_iters"];
  if (cfg_json.contains("inner_tol")) cfg.inner_tol = cfg_json["inner_tol"];
  if (cfg_json.contains("restarts")) cfg.restarts = cfg_json["restarts"];
  if (cfg_json.contains("ridge")) cfg.ridge = cfg_json["ridge"];
  if (cfg_json.contains("rescale")) cfg.rescale = cfg_json["rescale"];
  cfg.seed = cfg_json.contains("seed") ? cfg_json["seed"].get<std::uint64_t>()
                                       : common.seed;

  const polymoe::Dataset data = polymoe::read_dataset_csv(data_path);
  const polymoe::FitReport report = polymoe::fit(data, family, cfg);

  json semantic = cfg_json;
  semantic["seed"] = cfg.seed;

  json model_json = polymoe::model_to_json(report.model);
  model_json["meta"] = meta_block(cfg.seed, semantic);
  polymoe::write_json_file(model_out, model_json);

  json report_json = polymoe::fit_report_to_json(report);
  report_json["meta"] = meta_block(cfg.seed, semantic);
  polymoe::write_json_file(report_out, report_json);
  return 0;
}

// ----------------------------------------------------------------- kl ----

int run_kl(const Common& common, const std::string& target_path,
           const std::string& model_path, long n_mc, const std::string& method,
           bool sandwich, const std::string& out) {
  const json tj = polymoe::read_json_file(target_path);
  const polymoe::TargetSpec target = polymoe::target_from_json(tj);
  const polymoe::MoEParams model =
      polymoe::model_from_json(polymoe::read_json_file(model_path));

  const json semantic = {{"target", tj},
                         {"n_mc", n_mc},
                         {"method", method},
                         {"sandwich", sandwich},
                         {"seed", common.seed}};
  json out_json;
  if (sandwich) {
    out_json = polymoe::sandwich_to_json(
        polymoe::sandwich_report(target, model, n_mc, common.seed));
  } else {
    polymoe::DivergenceEstimate est;
    if (method == "auto") {
      est = polymoe::kl_mc(target, model, n_mc, common.seed);
    } else if (method == "mc") {
      est = polymoe::kl_mc(target, model, n_mc, common.seed,
                           polymoe::EstimateMethod::monte_carlo);
    } else if (method == "sum") {
      est = polymoe::kl_mc(target, model, n_mc, common.seed,
                           polymoe::EstimateMethod::truncated_sum);
    } else {
      throw std::invalid_argument("kl: method must be auto, mc or sum");
    }
    out_json = polymoe::estimate_to_json(est);
  }
  out_json["meta"] = meta_block(common.seed, semantic);
  if (out.empty() || out == "-")
    std::cout << out_json.dump(2) << "\n";
  else
    polymoe::write_json_file(out, out_json);
  return 0;
}

// --------------------------------------------------------------- plan ----

int run_plan(const Common& common, double budget, const std::string& alpha_str,
             int s, double n, const std::string& v_formula, const std::string& out) {
  const double alpha = parse_alpha(alpha_str);
  const polymoe::VFormula v = polymoe::parse_v_formula(v_formula);
  const polymoe::PlanReport plan = polymoe::make_plan(budget, alpha, s, n, v);

  const json semantic = {{"budget", budget}, {"alpha", alpha_str}, {"s", s},
                         {"n", n},           {"v_formula", v_formula}};
  json j;
  j["budget"] = plan.budget;
  j["alpha"] = std::isinf(alpha) ? json("inf") : json(alpha);
  j["s"] = plan.s;
  if (plan.n > 0) j["n"] = plan.n;
  j["v_formula"] = polymoe::v_formula_name(plan.v);
  j["xi_opt"] = plan.xi_opt;
  j["m_opt"] = plan.m_opt;
  json cands = json::array();
  for (const auto& c : plan.candidates) {
    json cj = {{"m", c.m}, {"k", c.k}, {"xi", c.xi}};
    if (!std::isnan(c.u)) cj["u"] = c.u;
    cands.push_back(cj);
  }
  j["candidates"] = cands;
  if (plan.near_parametric)
    j["near_parametric"] = {{"m", plan.near_plan.m}, {"xi", plan.near_plan.xi}};
  j["meta"] = meta_block(common.seed, semantic);
  if (out.empty() || out == "-")
    std::cout << j.dump(2) << "\n";
  else
    polymoe::write_json_file(out, j);
  return 0;
}

// -------------------------------------------------------------- table ----

int run_table(const Common& common, int which, const std::string& alpha_str, int s,
              double budget, double target_approx, const std::string& v_formula,
              const std::string& out) {
  const double alpha = parse_alpha(alpha_str);
  const polymoe::VFormula v = polymoe::parse_v_formula(v_formula);

  polymoe::PlanTable table;
  if (which == 1) {
    if (budget <= 0.0) {
      // default budget: the k = alpha-1, m = 5 configuration
      const int k_top =
          std::isinf(alpha) ? 5 : std::max(0, static_cast<int>(std::ceil(alpha)) - 1);
      budget = static_cast<double>(polymoe::param_count(5, k_top, s, v));
    }
    table = polymoe::table_fixed_estimation(alpha, s,
                                            polymoe::budget_rows(alpha, s, budget, v), v);
  } else if (which == 2) {
    table = polymoe::table_fixed_approx(alpha, s, target_approx, v);
  } else {
    throw std::invalid_argument("table: --which must be 1 or 2");
  }

  const json semantic = {{"which", which},   {"alpha", alpha_str},
                         {"s", s},           {"budget", budget},
                         {"target", target_approx}, {"v_formula", v_formula}};
  std::ostringstream os;
  os << meta_comment(common.seed, semantic);
  os << "k,m,approx,params,note\n";
  for (const auto& row : table.rows) {
    char approx_buf[32];
    std::snprintf(approx_buf, sizeof(approx_buf), "%.4f", row.approx);
    os << row.k << ',' << row.m << ',' << approx_buf << ',' << row.params << ','
       << '"' << row.note << '"' << '\n';
  }
  write_text(out, os.str());
  return 0;
}

// --------------------------------------------------------------- rate ----

int run_rate(const Common& common, const std::string& kind,
             const std::string& alpha_str, int s, int k, const std::string& ms_str,
             int n_quad, double amplitude, double omega, const std::string& out,
             const std::string& summary_out) {
  const double alpha = parse_alpha(alpha_str);
  polymoe::TargetParams params;
  params.amplitude = amplitude;
  params.omega = omega;
  if (polymoe::parse_target_kind(kind) == polymoe::TargetKind::trunc_power)
    params.knots = Eigen::VectorXd::Zero(s);
  const polymoe::TargetSpec target = polymoe::make_target(
      polymoe::parse_target_kind(kind), alpha, s, polymoe::ExpFamily::poisson(),
      params);
  const std::vector<int> ms = parse_int_list(ms_str);
  const polymoe::ProbeResult res = polymoe::rate_slope(target, ms, k, n_quad);

  const json semantic = {{"kind", kind}, {"alpha", alpha_str}, {"s", s},
                         {"k", k},       {"ms", ms_str},       {"n_quad", n_quad},
                         {"amplitude", amplitude}, {"omega", omega}};
  std::ostringstream os;
  os << meta_comment(common.seed, semantic);
  os << "m,r,D,slope_so_far\n";
  for (std::size_t i = 0; i < res.ms.size(); ++i) {
    os << res.ms[i] << ',' << res.rs[i] << ',' << polymoe::format_double(res.Ds[i])
       << ',';
    if (i >= 1 && res.slope_defined) {
      // slope over the prefix up to this row
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t q = 0; q <= i; ++q) {
        const double lx = std::log(static_cast<double>(res.rs[q]));
        const double ly = std::log(res.Ds[q]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
      }
      const double np = static_cast<double>(i + 1);
      os << polymoe::format_double((np * sxy - sx * sy) / (np * sxx - sx * sx));
    }
    os << '\n';
  }
  write_text(out, os.str());

  json summary;
  summary["slope"] = res.slope;
  summary["theory_slope"] = res.theory_slope;
  summary["slope_defined"] = res.slope_defined;
  summary["ms"] = res.ms;
  summary["Ds"] = res.Ds;
  summary["meta"] = meta_block(common.seed, semantic);
  if (!summary_out.empty()) polymoe::write_json_file(summary_out, summary);
  return 0;
}

// --------------------------------------------------------- experiment ----

polymoe::ExperimentConfig experiment_from_json(const json& j,
                                               const std::string& where) {
  polymoe::require_keys(j,
                        {"target", "n_grid", "m_grid", "m_path_coef", "k", "fit",
                         "n_mc", "replications", "seed"},
                        where);
  polymoe::ExperimentConfig cfg;
  const auto& t = j.at("target");
  polymoe::require_keys(
      t, {"kind", "alpha", "s", "family", "amplitude", "omega", "knots", "degree",
          "coeffs"},
      where + ".target");
  cfg.kind = polymoe::parse_target_kind(t.at("kind").get<std::string>());
  cfg.alpha = t.contains("alpha") && !t.at("alpha").is_string()
                  ? t.at("alpha").get<double>()
                  : std::numeric_limits<double>::infinity();
  cfg.s = t.at("s").get<int>();
  cfg.family = polymoe::ExpFamily::parse(t.at("family").get<std::string>());
  if (t.contains("amplitude")) cfg.tparams.amplitude = t["amplitude"];
  if (t.contains("omega")) cfg.tparams.omega = t["omega"];
  if (t.contains("degree")) cfg.tparams.degree = t["degree"];
  if (t.contains("knots")) {
    cfg.tparams.knots.resize(t["knots"].size());
    for (std::size_t i = 0; i < t["knots"].size(); ++i)
      cfg.tparams.knots[static_cast<Eigen::Index>(i)] = t["knots"][i];
  }
  if (t.contains("coeffs")) {
    cfg.tparams.coeffs.resize(t["coeffs"].size());
    for (std::size_t i = 0; i < t["coeffs"].size(); ++i)
      cfg.tparams.coeffs[static_cast<Eigen::Index>(i)] = t["coeffs"][i];
  }
  for (const auto& n : j.at("n_grid")) cfg.n_grid.push_back(n.get<long>());
  if (j.contains("m_grid")) {
    for (const auto& m : j["m_grid"]) cfg.m_grid.push_back(m.get<int>());
    cfg.m_from_path = false;
  }
  if (j.contains("m_path_coef")) {
    cfg.path_c = j["m_path_coef"];
    cfg.m_from_path = true;
  }
  cfg.k = j.at("k").get<int>();
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    polymoe::require_keys(f,
                          {"max_em_iters", "rel_tol", "inner_newton_iters",
                           "inner_tol", "restarts", "ridge", "rescale"},
                          where + ".fit");
    if (f.contains("max_em_iters")) cfg.fit.max_em_iters = f["max_em_iters"];
    if (f.contains("rel_tol")) cfg.fit.rel_tol = f["rel_tol"];
    if (f.contains("inner_newton_iters"))
      cfg.fit.inner_newton_iters = f["inner_newton_iters"];
    if (f.contains("inner_tol")) cfg.fit.inner_tol = f["inner_tol"];
    if (f.contains("restarts")) cfg.fit.restarts = f["restarts"];
    if (f.contains("ridge")) cfg.fit.ridge = f["ridge"];
    if (f.contains("rescale")) cfg.fit.rescale = f["rescale"];
  }
  if (j.contains("n_mc")) cfg.n_mc = j["n_mc"];
  if (j.contains("replications")) cfg.replications = j["replications"];
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  return cfg;
}

int run_experiment(const Common& common, const std::string& config_path,
                   const std::string& out, const std::string& summary_out) {
  json cfg_json = polymoe::read_json_file(config_path);
  polymoe::ExperimentConfig cfg = experiment_from_json(cfg_json, config_path);
  if (!cfg_json.contains("seed")) cfg.seed = common.seed;
  json semantic = cfg_json;
  semantic["seed"] = cfg.seed;

  const polymoe::ExperimentResult res = polymoe::run_rate_experiment(cfg);

  std::ostringstream os;
  os << meta_comment(cfg.seed, semantic);
  os << "n,m,k,rep,kl,se,loglik,iters,ok,error\n";
  for (const auto& cell : res.cells) {
    os << cell.n << ',' << cell.m << ',' << cell.k << ',' << cell.rep << ','
       << polymoe::format_double(cell.kl) << ',' << polymoe::format_double(cell.se)
       << ',' << polymoe::format_double(cell.loglik) << ',' << cell.iters << ','
       << (cell.ok ? 1 : 0) << ',' << '"' << cell.error << '"' << '\n';
  }
  write_text(out, os.str());

  json summary;
  summary["ns"] = res.ns;
  if (!res.path_ms.empty()) summary["path_ms"] = res.path_ms;
  summary["median_kl"] = res.median_kl;
  summary["slope"] = res.slope;
  summary["slope_defined"] = res.slope_defined;
  summary["tau"] = res.tau;
  summary["theory_exponent"] = res.theory_exponent;
  summary["meta"] = meta_block(cfg.seed, semantic);
  if (!summary_out.empty()) polymoe::write_json_file(summary_out, summary);
  return 0;
}

json error_json(const std::string& type, const std::string& message) {
  return json{{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixture-of-experts density fitting, divergence estimation and "
               "complexity planning"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed/--threads may follow the subcommand

  Common common;
  app.add_option("--seed", common.seed, "master 64-bit seed");
  app.add_option("--threads", common.threads,
                 "worker threads (0 = auto); POLYMOE_THREADS overrides");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a mixture model to a CSV dataset");
  std::string data_path, fit_config, model_out = "model.json", report_out = "report.json";
  fit_cmd->add_option("--data", data_path, "dataset CSV (header x1..xs,y)")->required();
  fit_cmd->add_option("--config", fit_config, "fit config JSON")->required();
  fit_cmd->add_option("--model-out", model_out, "output model JSON");
  fit_cmd->add_option("--report-out", report_out, "output fit report JSON");

  // kl
  auto* kl_cmd = app.add_subcommand("kl", "estimate divergences of a model from a target");
  std::string target_path, model_path, kl_method = "auto", kl_out;
  long n_mc = 10000;
  bool sandwich = false;
  kl_cmd->add_option("--target", target_path, "target JSON")->required();
  kl_cmd->add_option("--model", model_path, "model JSON")->required();
  kl_cmd->add_option("--n-mc", n_mc, "Monte Carlo draws");
  kl_cmd->add_option("--method", kl_method, "auto | mc | sum");
  kl_cmd->add_flag("--sandwich", sandwich, "emit the full sandwich report");
  kl_cmd->add_option("--out", kl_out, "output JSON (default stdout)");

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "optimal experts/degree tradeoff");
  double budget = 0.0, plan_n = 0.0;
  std::string plan_alpha = "2", plan_v = "ms", plan_out;
  int plan_s = 1;
  plan_cmd->add_option("--budget", budget, "parameter budget C")->required();
  plan_cmd->add_option("--alpha", plan_alpha, "smoothness (number or 'inf')");
  plan_cmd->add_option("--s", plan_s, "covariate dimension");
  plan_cmd->add_option("--n", plan_n, "sample size (optional)");
  plan_cmd->add_option("--v-formula", plan_v, "gate parameter count: ms | logistic");
  plan_cmd->add_option("--out", plan_out, "output JSON (default stdout)");

  // table
  auto* table_cmd = app.add_subcommand("table", "comparison tables over (k, m)");
  int which = 1, table_s = 5;
  std::string table_alpha = "6", table_v = "ms", table_out;
  double table_budget = 0.0, table_target = 0.01;
  table_cmd->add_option("--which", which, "1: fixed estimation, 2: fixed approximation")
      ->required();
  table_cmd->add_option("--alpha", table_alpha, "smoothness (number or 'inf')");
  table_cmd->add_option("--s", table_s, "covariate dimension");
  table_cmd->add_option("--budget", table_budget, "parameter budget (table 1)");
  table_cmd->add_option("--target", table_target, "target approximation error (table 2)");
  table_cmd->add_option("--v-formula", table_v, "gate parameter count: ms | logistic");
  table_cmd->add_option("--out", table_out, "output CSV (default stdout)");

  // rate
  auto* rate_cmd = app.add_subcommand("rate", "deterministic approximation-rate probe");
  std::string rate_kind = "smooth_sin", rate_alpha = "inf", rate_ms = "2,4,8,16",
              rate_out, rate_summary;
  int rate_s = 1, rate_k = 1, rate_quad = 16;
  double rate_amp = 1.0, rate_omega = 3.0;
  rate_cmd->add_option("--kind", rate_kind, "smooth_sin | trunc_power | polynomial");
  rate_cmd->add_option("--alpha", rate_alpha, "smoothness (number or 'inf')");
  rate_cmd->add_option("--s", rate_s, "covariate dimension (1 or 2)");
  rate_cmd->add_option("--k", rate_k, "polynomial degree of the fits");
  rate_cmd->add_option("--ms", rate_ms, "comma-separated cells per axis");
  rate_cmd->add_option("--n-quad", rate_quad, "quadrature points per axis per cell");
  rate_cmd->add_option("--amplitude", rate_amp, "smooth_sin amplitude");
  rate_cmd->add_option("--omega", rate_omega, "smooth_sin frequency");
  rate_cmd->add_option("--out", rate_out, "output CSV (default stdout)");
  rate_cmd->add_option("--summary-out", rate_summary, "summary JSON path");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "convergence-rate sweep");
  std::string exp_config, exp_out, exp_summary;
  exp_cmd->add_option("--config", exp_config, "experiment config JSON")->required();
  exp_cmd->add_option("--out", exp_out, "tidy CSV output (default stdout)");
  exp_cmd->add_option("--summary-out", exp_summary, "summary JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return kExitConfig;
  }

  try {
    resolve_threads(common);
    if (app.got_subcommand(fit_cmd))
      return run_fit(common, data_path, fit_config, model_out, report_out);
    if (app.got_subcommand(kl_cmd))
      return run_kl(common, target_path, model_path, n_mc, kl_method, sandwich, kl_out);
    if (app.got_subcommand(plan_cmd))
      return run_plan(common, budget, plan_alpha, plan_s, plan_n, plan_v, plan_out);
    if (app.got_subcommand(table_cmd))
      return run_table(common, which, table_alpha, table_s, table_budget,
                       table_target, table_v, table_out);
    if (app.got_subcommand(rate_cmd))
      return run_rate(common, rate_kind, rate_alpha, rate_s, rate_k, rate_ms,
                      rate_quad, rate_amp, rate_omega, rate_out, rate_summary);
    if (app.got_subcommand(exp_cmd))
      return run_experiment(common, exp_config, exp_out, exp_summary);
    return kExitConfig;
  } catch (const polymoe::data_error& e) {
    std::cerr << error_json("data", e.what()).dump() << "\n";
    return kExitData;
  } catch (const polymoe::numeric_error& e) {
    std::cerr << error_json("numeric", e.what()).dump() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const std::overflow_error& e) {
    std::cerr << error_json("config", e.what()).dump() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << error_json("numeric", e.what()).dump() << "\n";
    return kExitNumeric;
  }
}
