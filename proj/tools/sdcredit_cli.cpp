//------------------------------------------------------------------------------
//
//   Copyright 2026 The sdcredit Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include "config_io.hpp"
#include "verify.hpp"

#include "sdcredit/sdcredit.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace sdcredit;
using namespace sdcredit::cli;

namespace {

enum ExitCode
{
  kOk            = 0,
  kValidation    = 2,
  kSolver        = 3,
  kNonSeparating = 4,
  kVerifyFailed  = 5
};

struct Formats
{
  bool csv  = true;
  bool json = true;
};

Formats resolve_formats(OutputOptions const &opt, std::string const &flag)
{
  if (flag.empty())
  {
    return {opt.csv, opt.json};
  }
  if (flag == "csv")
  {
    return {true, false};
  }
  if (flag == "json")
  {
    return {false, true};
  }
  return {true, true};
}

void write_json(fs::path const &file, Json const &doc)
{
  std::ofstream f(file, std::ios::binary);
  if (!f)
  {
    throw std::runtime_error("cannot write " + file.string());
  }
  f << doc.dump(2) << '\n';
}

void report_issues(std::vector<Issue> const &issues)
{
  for (auto const &i : issues)
  {
    std::cerr << (i.severity == Severity::Error ? "error" : "note") << " [" << to_string(i.code) << "] "
              << i.message << '\n';
  }
}

Json notes_json(std::vector<Issue> const &issues)
{
  Json out = Json::array();
  for (auto const &i : issues)
  {
    if (i.severity == Severity::Note)
    {
      out.push_back(i.message);
    }
  }
  return out;
}

/// Validates or exits with code 2.
ModelConfig checked(ModelConfig const &cfg, Section section, std::vector<Issue> &notes)
{
  notes = validate(cfg, section);
  report_issues(notes);
  return validated(cfg, section);
}

//------------------------------------------------------------------------------
// solve-sec3
//------------------------------------------------------------------------------

Json welfare_json(impatience::WelfareReport const &rep)
{
  Json j = {{"W_A", rep.W_A}, {"W_E", rep.W_E}, {"V_B", rep.V_B}, {"V_E", rep.V_E}};
  j["tStar"]                 = rep.t_star ? Json(*rep.t_star) : Json(nullptr);
  j["crossingPatternHolds"]  = rep.crossing_pattern_holds;
  j["lambdaEquilibrium"]     = rep.equilibrium.lambda;
  j["lambdaEfficient"]       = rep.efficient.lambda;
  j["lambdaBenchmark"]       = rep.benchmark.lambda;
  return j;
}

int cmd_solve_sec3(std::string const &config_path, std::string const &out_flag, std::string const &format_flag)
{
  auto const         doc = load_document(config_path);
  std::vector<Issue> issues;
  ModelConfig const  cfg     = checked(doc.model, Section::Three, issues);
  Formats const      formats = resolve_formats(doc.output, format_flag);
  fs::path const     out     = out_flag.empty() ? fs::path(doc.output.dir) : fs::path(out_flag);
  fs::create_directories(out);

  auto const rep  = impatience::welfare_report(cfg);
  auto const mech = impatience::build_full_mechanism(cfg, rep.equilibrium);

  if (formats.csv)
  {
    CsvWriter csv({"t", "v_eq", "c_eq", "v_eff", "c_eff", "corner_eq", "corner_eff"});
    for (std::size_t k = 0; k < rep.equilibrium.path.size(); ++k)
    {
      double const ve = rep.equilibrium.path[k];
      double const vb = rep.efficient.path[k];
      csv.row(static_cast<int>(k + 1), ve, eval_phi(cfg.utility, ve), vb, eval_phi(cfg.utility, vb),
              bool(rep.equilibrium.corner[k]), bool(rep.efficient.corner[k]));
    }
    csv.save((out / "path.csv").string());
  }

  Json welfare      = welfare_json(rep);
  Json series       = Json::array();
  Json sweep_meta   = nullptr;
  if (doc.run.sweep && doc.run.sweep->t_min)
  {
    auto const sweep = impatience::sweep_horizon(cfg, *doc.run.sweep->t_min, *doc.run.sweep->t_max);
    for (auto const &e : sweep.entries)
    {
      series.push_back({{"T", e.T},
                        {"benchmarkGap", e.benchmark_gap},
                        {"efficiencyGap", e.efficiency_gap},
                        {"runningMinEfficiencyGap", e.running_min_efficiency_gap},
                        {"tStar", e.report.t_star ? Json(*e.report.t_star) : Json(nullptr)}});
    }
    char const *side = sweep.side_condition == impatience::SideCondition::Holds
                           ? "holds"
                           : (sweep.side_condition == impatience::SideCondition::Fails ? "fails" : "not_checkable");
    sweep_meta = {{"sideCondition", side}, {"warnings", sweep.warnings}};
  }
  else
  {
    series.push_back({{"T", cfg.T},
                      {"benchmarkGap", rep.W_A - rep.W_E},
                      {"efficiencyGap", rep.V_B - rep.V_E},
                      {"runningMinEfficiencyGap", rep.V_B - rep.V_E},
                      {"tStar", rep.t_star ? Json(*rep.t_star) : Json(nullptr)}});
  }
  welfare["gapSeries"] = series;
  welfare["sweep"]     = sweep_meta;
  welfare["notes"]     = notes_json(issues);

  if (formats.json)
  {
    write_json(out / "welfare.json", welfare);
    Json m = {{"policy", policy_to_json(mech.policy, cfg)}};
    Json off = Json::array();
    for (int t = 2; t <= cfg.T - 1; ++t)
    {
      off.push_back({{"date", t}, {"value", mech.off_path_continuation[static_cast<std::size_t>(t - 1)]}});
    }
    auto const ic = impatience::mechanism_ic(cfg, mech.policy);
    m["offPathContinuation"] = off;
    m["icResiduals"]         = {{"low", ic.low_residual}, {"high", ic.high_residual}};
    m["config"]              = to_json(cfg);
    write_json(out / "mechanism.json", m);
  }
  std::cout << "impatience solve written to " << out.string() << '\n';
  return kOk;
}

//------------------------------------------------------------------------------
// solve-sec4
//------------------------------------------------------------------------------

ModelConfig uniform_variant(ModelConfig cfg, int N)
{
  double const lo = cfg.deltas.front();
  double const hi = cfg.deltas.back();
  cfg.deltas.assign(static_cast<std::size_t>(N), 0.0);
  for (int n = 0; n < N; ++n)
  {
    cfg.deltas[static_cast<std::size_t>(n)] = lo + (hi - lo) * n / (N - 1);
  }
  cfg.p.assign(static_cast<std::size_t>(N), 1.0 / N);
  cfg.q = cfg.p;
  return cfg;
}

void dump_candidate(fs::path const &out, general::ReductionError const &e, ModelConfig const &cfg)
{
  auto const &c = e.candidate();
  Json        j = {{"error", e.what()},
                   {"delta1Index", c.delta1_index + 1},
                   {"v1", c.v1},
                   {"U1", c.U1},
                   {"w", c.w},
                   {"z", c.z},
                   {"lambda", c.lambda},
                   {"separating", c.separating},
                   {"interior", c.interior},
                   {"config", to_json(cfg)}};
  std::cerr << j.dump(2) << '\n';
  fs::create_directories(out);
  write_json(out / ("nonseparating_delta1_" + std::to_string(c.delta1_index + 1) + ".json"), j);
}

int cmd_solve_sec4(std::string const &config_path, std::string const &out_flag, std::string const &format_flag)
{
  auto const         doc = load_document(config_path);
  std::vector<Issue> issues;
  ModelConfig const  cfg     = checked(doc.model, Section::Four, issues);
  Formats const      formats = resolve_formats(doc.output, format_flag);
  fs::path const     out     = out_flag.empty() ? fs::path(doc.output.dir) : fs::path(out_flag);
  if (cfg.T != 3)
  {
    std::cerr << "error: solve-sec4 solves the three-date equilibrium; use verify for longer horizons\n";
    return kValidation;
  }
  fs::create_directories(out);

  auto const eff   = general::solve_efficient_policy(cfg);
  int const  first = doc.run.delta1_index.value_or(0);
  int const  last  = doc.run.delta1_index.value_or(static_cast<int>(cfg.N()) - 1);

  Json      euler   = {{"efficientMaxResidual", general::check_inverse_euler(eff.policy, cfg, general::PolicyKind::Efficient).max_abs},
                       {"equilibrium", Json::array()}};
  Json      summary = {{"lambdaEfficient", eff.lambda}, {"byDelta1", Json::array()}, {"notes", notes_json(issues)}};
  CsvWriter backloading({"delta1Index", "n", "delta2", "gap_g_n", "rentTerm"});

  for (int k = first; k <= last; ++k)
  {
    general::ReducedSolution sol;
    try
    {
      sol = general::solve_equilibrium_T3(cfg, k);
    }
    catch (general::ReductionError const &e)
    {
      dump_candidate(out, e, cfg);
      return kNonSeparating;
    }
    auto const pol  = general::to_policy(sol, cfg);
    auto const back = general::check_backloading(sol, cfg);

    CsvWriter csv({"n", "delta2", "v1", "w_n", "z_n", "c2", "c3", "contCostEq", "contCostEff", "gap_g_n"});
    std::vector<double> cont_eq;
    for (std::size_t n = 0; n < cfg.N(); ++n)
    {
      TypeHistory const h{k, static_cast<int>(n)};
      double const      ce = general::continuation_cost(pol, cfg, h).date_npv;
      double const      cb = general::continuation_cost(eff.policy, cfg, h).date_npv;
      cont_eq.push_back(ce);
      csv.row(static_cast<int>(n + 1), cfg.deltas[n], sol.v1, sol.w[n], sol.z[n], eval_phi(cfg.utility, sol.w[n]),
              eval_phi(cfg.utility, sol.z[n]), ce, cb, back.gaps[n]);
      backloading.row(k + 1, static_cast<int>(n + 1), cfg.deltas[n], back.gaps[n],
                      n == 0 ? 0.0 : back.rent_terms[n - 1]);
    }
    if (formats.csv)
    {
      csv.save((out / ("sec4_delta1_" + std::to_string(k + 1) + ".csv")).string());
    }

    auto const eu = general::check_inverse_euler(pol, cfg, general::PolicyKind::Equilibrium);
    Json       eq = {{"delta1Index", k + 1}, {"maxResidual", eu.max_abs}, {"residuals", Json::array()}};
    for (auto const &r : eu.residuals)
    {
      eq["residuals"].push_back({{"date", r.date}, {"residual", r.residual}});
    }
    if (cfg.utility.kind() == UtilityKind::Log)
    {
      auto const g = general::log_growth_ratios(cfg, k);
      eq["growthRatios"] = {{"equilibrium", g.equilibrium}, {"efficient", g.efficient}};
    }
    euler["equilibrium"].push_back(eq);

    double const lowest  = cont_eq.front();
    double const highest = cont_eq.back();
    summary["byDelta1"].push_back({{"delta1Index", k + 1},
                                   {"lambda", sol.lambda},
                                   {"v1", sol.v1},
                                   {"contCostLowestType", lowest},
                                   {"contCostHighestType", highest},
                                   {"percentFall", 100.0 * (highest - lowest) / highest},
                                   {"topGap", back.top_gap}});
  }

  if (doc.run.sweep && !doc.run.sweep->n_list.empty())
  {
    CsvWriter sweep({"N", "top_gap", "bottom_gap"});
    for (int N : doc.run.sweep->n_list)
    {
      // The sweep regenerates a uniform grid, so it always tracks the most patient initial type.
      ModelConfig const v = validated(uniform_variant(cfg, N), Section::Four);
      int const         k = N - 1;
      try
      {
        auto const sol  = general::solve_equilibrium_T3(v, k);
        auto const back = general::check_backloading(sol, v);
        sweep.row(N, back.top_gap, back.gaps.front());
      }
      catch (general::ReductionError const &e)
      {
        dump_candidate(out, e, v);
        return kNonSeparating;
      }
    }
    if (formats.csv)
    {
      sweep.save((out / "backloading_sweep.csv").string());
    }
  }

  if (formats.csv)
  {
    backloading.save((out / "backloading.csv").string());
  }
  if (formats.json)
  {
    write_json(out / "euler.json", euler);
    write_json(out / "sec4_summary.json", summary);
  }
  std::cout << "N-type solve written to " << out.string() << '\n';
  return kOk;
}

//------------------------------------------------------------------------------
// verify
//------------------------------------------------------------------------------

int cmd_verify(std::string const &config_path, std::string const &policy_path)
{
  auto const         doc     = load_document(config_path);
  Section const      section = doc.run.section == 3 ? Section::Three : Section::Four;
  std::vector<Issue> issues;
  ModelConfig const  cfg = checked(doc.model, section, issues);
  CheckList          checks;
  if (!policy_path.empty())
  {
    std::ifstream in(policy_path);
    if (!in)
    {
      throw ConfigError(policy_path, "cannot open policy file");
    }
    Json pj;
    try
    {
      pj = Json::parse(in);
    }
    catch (Json::parse_error const &e)
    {
      throw ConfigError(policy_path, std::string("parse error: ") + e.what());
    }
    // Solver outputs nest the policy; a bare policy document is accepted too.
    Json const &policy = pj.is_object() && pj.contains("policy") ? pj["policy"] : pj;
    verify_policy(policy_from_json(policy), cfg, doc.run.delta1_index, checks);
  }
  else if (section == Section::Three)
  {
    verify_section3(cfg, checks);
  }
  else
  {
    verify_section4(cfg, doc.run.delta1_index, checks);
  }
  std::cout << checks.to_json().dump(2) << '\n';
  return checks.all_pass() ? kOk : kVerifyFailed;
}

//------------------------------------------------------------------------------
// figures
//------------------------------------------------------------------------------

ModelConfig figure_config()
{
  ModelConfig cfg;
  cfg.T = 3;
  for (int n = 0; n < 10; ++n)
  {
    cfg.deltas.push_back(0.5 + 0.5 * n / 9.0);
  }
  cfg.p.assign(10, 0.1);
  cfg.q.assign(10, 0.1);
  cfg.R      = 1.5;
  cfg.income = {IncomeKind::TotalNPV, 3.0};
  return validated(cfg, Section::Four);
}

bool strictly(std::vector<double> const &v, int sign)
{
  for (std::size_t i = 1; i < v.size(); ++i)
  {
    if (!(sign * (v[i] - v[i - 1]) > 0.0))
    {
      return false;
    }
  }
  return true;
}

std::string shape(std::vector<double> const &v)
{
  if (strictly(v, 1))
  {
    return "increasing";
  }
  if (strictly(v, -1))
  {
    return "decreasing";
  }
  bool flat = true;
  for (double x : v)
  {
    flat = flat && std::abs(x - v.front()) <= 1e-12 * std::max(1.0, std::abs(v.front()));
  }
  return flat ? "constant" : "mixed";
}

int cmd_figures(std::string const &out_dir)
{
  ModelConfig const cfg = figure_config();
  fs::path const    out(out_dir);
  fs::create_directories(out);
  int const  top = static_cast<int>(cfg.N()) - 1;  // initial type delta1 = 1
  auto const sol = general::solve_equilibrium_T3(cfg, top);
  auto const pol = general::to_policy(sol, cfg);
  auto const eff = general::solve_efficient_policy(cfg);

  std::vector<double> cost_eq, cost_eff, c2_eq, c2_eff, c3_eq, c3_eff;
  for (std::size_t n = 0; n < cfg.N(); ++n)
  {
    TypeHistory const h{top, static_cast<int>(n)};
    cost_eq.push_back(general::continuation_cost(pol, cfg, h).date_npv);
    cost_eff.push_back(general::continuation_cost(eff.policy, cfg, h).date_npv);
    c2_eq.push_back(eval_phi(cfg.utility, pol.at(2, h)));
    c3_eq.push_back(eval_phi(cfg.utility, pol.at(3, h)));
    c2_eff.push_back(eval_phi(cfg.utility, eff.policy.at(2, h)));
    c3_eff.push_back(eval_phi(cfg.utility, eff.policy.at(3, h)));
  }

  auto emit = [&](char const *file, char const *eq_name, char const *eff_name, std::vector<double> const &a,
                  std::vector<double> const &b) {
    CsvWriter csv({"delta2", eq_name, eff_name});
    for (std::size_t n = 0; n < cfg.N(); ++n)
    {
      csv.row(cfg.deltas[n], a[n], b[n]);
    }
    csv.save((out / file).string());
    return Json{{"file", file},
                {"rows", cfg.N()},
                {"series", {{eq_name, shape(a)}, {eff_name, shape(b)}}}};
  };
  Json manifest = Json::array();
  manifest.push_back(emit("figure1.csv", "contCostEq", "contCostEff", cost_eq, cost_eff));
  manifest.push_back(emit("figure2.csv", "c2_eq", "c2_eff", c2_eq, c2_eff));
  manifest.push_back(emit("figure3.csv", "c3_eq", "c3_eff", c3_eq, c3_eff));
  write_json(out / "figures.json", Json{{"delta1", cfg.deltas.back()}, {"figures", manifest}});
  std::cout << "figure data written to " << out.string() << '\n';
  return kOk;
}

//------------------------------------------------------------------------------
// reversal
//------------------------------------------------------------------------------

int cmd_reversal()
{
  ModelConfig base;
  base.T      = 3;
  base.deltas = {0.4, 0.9};
  base.q      = {0.75, 0.25};
  base.R      = 1.0;
  base.income = {IncomeKind::TotalNPV, 1.0};

  std::cout << "rewards: 50 now vs 100 one period later\n";
  std::cout << "variant            P(immediate | A)  choice B   delta_bar  beta_1    beta_2    beta_2>1\n";
  for (auto const &[label, p] : {std::pair{"p=q=(0.75,0.25)", std::vector<double>{0.75, 0.25}},
                                 std::pair{"p=(1,0)        ", std::vector<double>{1.0, 0.0}}})
  {
    ModelConfig cfg = base;
    cfg.p           = p;
    auto const r    = choice_reversal(cfg, 50.0, 100.0, 1);
    auto const rep  = discount_representation(cfg);
    std::cout << label << "    " << std::setw(16) << std::left << fmt_number(r.probability_immediate_now)
              << "  " << std::setw(9) << (r.choice_far == Choice::Delayed ? "delayed" : "immediate") << "  "
              << std::setw(9) << fmt_number(rep.delta_bar) << "  " << std::setw(8) << fmt_number(rep.betas[0])
              << "  " << std::setw(8) << fmt_number(rep.betas[1]) << "  "
              << (rep.beta_top_exceeds_one ? "yes" : "no") << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Equilibrium and efficient credit contracts with private stochastic discounting"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string format;
  std::string policy_path;

  auto *sec3 = app.add_subcommand("solve-sec3", "solve the two-type model with a certainly impatient agent");
  sec3->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sec3->add_option("--out", out_dir, "output directory (overrides output.dir)");
  sec3->add_option("--format", format, "csv, json or all")->check(CLI::IsMember({"csv", "json", "all"}));

  auto *sec4 = app.add_subcommand("solve-sec4", "solve the three-date N-type equilibrium");
  sec4->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sec4->add_option("--out", out_dir, "output directory (overrides output.dir)");
  sec4->add_option("--format", format, "csv, json or all")->check(CLI::IsMember({"csv", "json", "all"}));

  auto *verify = app.add_subcommand("verify", "run the invariant and oracle checks");
  verify->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  verify->add_option("--policy", policy_path, "check a stored policy for profitable misreports")
      ->check(CLI::ExistingFile);

  auto *figures = app.add_subcommand("figures", "write the figure data bundle");
  figures->add_option("--out", out_dir, "output directory")->required();

  auto *reversal = app.add_subcommand("reversal", "print the choice-reversal demonstration");

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::ParseError const &e)
  {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try
  {
    if (*sec3)
    {
      return cmd_solve_sec3(config_path, out_dir, format);
    }
    if (*sec4)
    {
      return cmd_solve_sec4(config_path, out_dir, format);
    }
    if (*verify)
    {
      return cmd_verify(config_path, policy_path);
    }
    if (*figures)
    {
      return cmd_figures(out_dir);
    }
    if (*reversal)
    {
      return cmd_reversal();
    }
  }
  catch (ConfigError const &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  catch (ValidationError const &e)
  {
    std::cerr << "error: invalid configuration: " << e.what() << '\n';
    return kValidation;
  }
  catch (general::ReductionError const &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kNonSeparating;
  }
  catch (SolverError const &e)
  {
    std::cerr << "error: solver failure: " << e.what() << '\n';
    return kSolver;
  }
  catch (UtilityDomainError const &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kSolver;
  }
  return kOk;
}
