// envymarket: scenario pipeline front-end. One subcommand per stage;
// stages talk through files only.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "envymarket/econometrics.hpp"
#include "envymarket/envy.hpp"
#include "envymarket/equilibrium.hpp"
#include "envymarket/io.hpp"
#include "envymarket/mechanisms.hpp"
#include "envymarket/policy.hpp"
#include "envymarket/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace envymarket;

namespace {

constexpr const char* kVersion = "0.1.0";

enum LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

LogLevel log_level() {
  const char* env = std::getenv("ENVYMARKET_LOG");
  if (!env) return kWarn;
  const std::string v(env);
  if (v == "debug") return kDebug;
  if (v == "info") return kInfo;
  if (v == "error") return kError;
  return kWarn;
}

void log(LogLevel lvl, const std::string& msg) {
  static const LogLevel threshold = log_level();
  if (lvl < threshold) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::cerr << "[" << names[lvl] << "] " << msg << "\n";
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct CommonArgs {
  std::string scenario;
  std::string panel;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  bool seed_set = false;
  int reps = 0;
  int threads = 0;
  std::string mechanism = "da";
  int multistart = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario, "scenario JSON file");
  cmd->add_option("--panel", a.panel, "panel CSV file");
  cmd->add_option("--out-dir", a.out_dir, "output directory");
  cmd->add_option("--seed", a.seed, "master seed")->each([&](const std::string&) {
    a.seed_set = true;
  });
  cmd->add_option("--reps", a.reps, "counterfactual repetitions");
  cmd->add_option("--threads", a.threads, "worker threads (0: all cores)");
  cmd->add_option("--mechanism", a.mechanism, "ia or da")
      ->check(CLI::IsMember({"ia", "da"}));
  cmd->add_option("--multistart", a.multistart, "extra equilibrium starts");
}

int fail(const CommonArgs& a, int code, const std::string& msg) {
  log(kError, msg);
  const json err{{"error", msg}, {"exit_code", code}};
  std::cerr << err.dump() << "\n";
  std::error_code ec;
  if (!a.out_dir.empty() && fs::exists(a.out_dir, ec))
    write_text_file((fs::path(a.out_dir) / "error.json").string(), err.dump(2) + "\n");
  return code;
}

// Manifest goes down before any result file.
void write_manifest(const CommonArgs& a, const std::string& subcommand,
                    const std::string& config_dump) {
  fs::create_directories(a.out_dir);
  std::ostringstream hash;
  hash << std::hex << fnv1a(config_dump);
  const json manifest{{"subcommand", subcommand},
                      {"scenario", a.scenario},
                      {"panel", a.panel},
                      {"seed", a.seed},
                      {"out_dir", a.out_dir},
                      {"tool_version", kVersion},
                      {"config_hash", hash.str()},
                      {"timestamp", iso_now()}};
  write_text_file((fs::path(a.out_dir) / "manifest.json").string(),
                  manifest.dump(2) + "\n");
}

ScenarioConfig load_or_throw(CommonArgs& a) {
  if (a.scenario.empty()) throw std::runtime_error("scenario: --scenario is required");
  ScenarioConfig cfg = load_scenario(a.scenario);
  if (a.seed_set) cfg.master_seed = a.seed;
  a.seed = cfg.master_seed;
  if (a.reps > 0) cfg.manipulation_reps = a.reps;
  return cfg;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

json cutoffs_json(const Economy& e, const CutoffVector& c) {
  json out = json::object();
  for (int s = 0; s < e.n_schools(); ++s) {
    const std::string key = std::to_string(e.schools[static_cast<std::size_t>(s)].id);
    out[key] = c.is_unconstrained(s)
                   ? json{{"unconstrained", true}}
                   : json{{"unconstrained", false}, {"value", *c.p[static_cast<std::size_t>(s)]}};
  }
  return out;
}

void write_cohort_files(const fs::path& dir, int year, const Cohort& cohort) {
  const std::string tag = std::to_string(year);
  write_economy((dir / ("economy_" + tag + ".json")).string(), cohort.economy);
  write_rols_csv((dir / ("rols_" + tag + ".csv")).string(), cohort.economy, cohort.rols);

  std::ostringstream actions;
  actions << "student_id,action_index\n";
  for (int i = 0; i < cohort.economy.n_students(); ++i)
    actions << cohort.economy.students[static_cast<std::size_t>(i)].id << ','
            << cohort.actions[static_cast<std::size_t>(i)] << "\n";
  write_text_file((dir / ("actions_" + tag + ".csv")).string(), actions.str());

  std::ostringstream moves;
  moves << "student_id,from_x,from_y,to_x,to_y,day_offset,household,to_relative\n";
  for (const auto& ev : cohort.events)
    moves << cohort.economy.students[static_cast<std::size_t>(ev.student)].id << ','
          << fmt(ev.from.x) << ',' << fmt(ev.from.y) << ',' << fmt(ev.to.x) << ','
          << fmt(ev.to.y) << ',' << ev.day_offset << ',' << (ev.household_move ? 1 : 0)
          << ',' << (ev.to_relative ? 1 : 0) << "\n";
  write_text_file((dir / ("moves_" + tag + ".csv")).string(), moves.str());
}

// Subgroup manipulation shares from the scenario's own panel: one DiD per
// covariate cell, Eq.-(3) share per cell, zero when a cell has no
// treated-post movers or the fit fails.
std::map<int, double> subgroup_shares_from_panel(const Panel& panel) {
  std::vector<double> income, edu;
  for (const auto& r : panel) {
    if (r.parental_income) income.push_back(*r.parental_income);
    if (r.parental_education_years) edu.push_back(*r.parental_education_years);
  }
  std::sort(income.begin(), income.end());
  std::sort(edu.begin(), edu.end());
  const double inc_med = income.empty() ? 0.0 : income[income.size() / 2];
  const double edu_med = edu.empty() ? 0.0 : edu[edu.size() / 2];

  std::map<int, double> shares;
  for (int cell = 0; cell < 8; ++cell) {
    const auto filter = [&, cell](const PanelRecord& r) {
      const int c = (r.female ? 1 : 0) +
                    (r.parental_income && *r.parental_income > inc_med ? 2 : 0) +
                    (r.parental_education_years && *r.parental_education_years > edu_med ? 4 : 0);
      return c == cell;
    };
    try {
      shares[cell] = fit_did(panel, filter).manipulation_share;
    } catch (const std::exception& ex) {
      log(kWarn, "subgroup " + std::to_string(cell) + ": " + ex.what());
      shares[cell] = 0.0;
    }
  }
  return shares;
}

int cmd_generate(CommonArgs& a) {
  ScenarioConfig cfg;
  try {
    cfg = load_or_throw(a);
  } catch (const std::exception& ex) {
    return fail(a, 3, ex.what());
  }
  write_manifest(a, "generate", scenario_to_json(cfg).dump());
  json diag = json::object();
  for (int year : cfg.cohorts) {
    log(kInfo, "generating cohort " + std::to_string(year));
    const Cohort cohort = generate_cohort(cfg, year);
    write_cohort_files(a.out_dir, year, cohort);
    diag[std::to_string(year)] = {{"strategic_eligible", cohort.diag.n_strategic_eligible},
                                  {"strategic_injected", cohort.diag.n_strategic_injected},
                                  {"baseline_movers", cohort.diag.n_baseline_movers},
                                  {"household_movers", cohort.diag.n_household_movers}};
  }
  write_text_file((fs::path(a.out_dir) / "diagnostics.json").string(), diag.dump(2) + "\n");
  write_panel_csv((fs::path(a.out_dir) / "panel.csv").string(), build_panel(cfg));
  return 0;
}

int cmd_match(CommonArgs& a) {
  ScenarioConfig cfg;
  try {
    cfg = load_or_throw(a);
  } catch (const std::exception& ex) {
    return fail(a, 3, ex.what());
  }
  write_manifest(a, "match", scenario_to_json(cfg).dump());
  const Mechanism mech = a.mechanism == "ia" ? Mechanism::IA : Mechanism::DA;
  for (int year : cfg.cohorts) {
    const Cohort cohort = generate_cohort(cfg, year);
    const MatchOutcome m =
        run_mechanism(mech, cohort.economy, cohort.rols, cohort.actions, cfg.master_seed);
    write_outcome((fs::path(a.out_dir) / ("outcome_" + std::to_string(year) + ".json")).string(),
                  cohort.economy, m);
  }
  return 0;
}

int cmd_equilibrium(CommonArgs& a) {
  ScenarioConfig cfg;
  try {
    cfg = load_or_throw(a);
  } catch (const std::exception& ex) {
    return fail(a, 3, ex.what());
  }
  write_manifest(a, "equilibrium", scenario_to_json(cfg).dump());
  bool all_converged = true;
  for (int year : cfg.cohorts) {
    const Economy e = economy_for_year(cfg, year);
    const EquilibriumResult r = solve_equilibrium(e, cfg.master_seed);
    all_converged = all_converged && r.converged;
    json out{{"year", year},
             {"cutoffs", cutoffs_json(e, r.cutoffs)},
             {"aggregate_demand", r.aggregate_demand},
             {"aggregate_deception", r.aggregate_deception},
             {"iterations", r.iterations},
             {"converged", r.converged},
             {"residual", r.residual}};
    if (a.multistart > 0) {
      const MultistartResult ms = multistart_equilibrium(e, cfg.master_seed, a.multistart);
      out["multistart"] = {{"starts", a.multistart},
                          {"agree", ms.agree},
                          {"max_disagreement", ms.max_disagreement}};
      for (const auto& run : ms.runs) all_converged = all_converged && run.converged;
    }
    write_text_file(
        (fs::path(a.out_dir) / ("equilibrium_" + std::to_string(year) + ".json")).string(),
        out.dump(2) + "\n");
  }
  if (!all_converged) return fail(a, 4, "equilibrium solver did not converge");
  return 0;
}

int cmd_audit(CommonArgs& a) {
  ScenarioConfig cfg;
  try {
    cfg = load_or_throw(a);
  } catch (const std::exception& ex) {
    return fail(a, 3, ex.what());
  }
  write_manifest(a, "audit", scenario_to_json(cfg).dump());
  const Mechanism mech = a.mechanism == "ia" ? Mechanism::IA : Mechanism::DA;
  for (int year : cfg.cohorts) {
    const Cohort cohort = generate_cohort(cfg, year);
    const Economy& e = cohort.economy;
    const MatchOutcome m = run_mechanism(mech, e, cohort.rols, cohort.actions, cfg.master_seed);
    std::set<int> movers;
    for (const auto& ev : cohort.events)
      if (!ev.household_move) movers.insert(ev.student);
    const auto justified = audit_justified_envy(e, m);
    const auto invariant = audit_invariant_justified_envy(e, m);
    const EmpiricalEnvySummary emp = audit_empirical_envy(e, cohort.rols, m, movers);

    const std::string tag = std::to_string(year);
    write_text_file(
        (fs::path(a.out_dir) / ("audit_" + tag + ".json")).string(),
        json{{"year", year},
             {"justified_envy", justified.size()},
             {"invariant_justified_envy", invariant.size()},
             {"empirical_envy_share", emp.share_with_envy},
             {"non_enrolled_mass", emp.n_non_enrolled_mass}}
                .dump(2) +
            "\n");

    std::ostringstream hist;
    hist << "school_id,envy_share,non_enrolled_mass\n";
    for (int s = 0; s < e.n_schools(); ++s)
      hist << e.schools[static_cast<std::size_t>(s)].id << ','
           << fmt(emp.school_share[static_cast<std::size_t>(s)]) << ','
           << fmt(emp.school_non_enrolled_mass[static_cast<std::size_t>(s)]) << "\n";
    write_text_file((fs::path(a.out_dir) / ("envy_by_school_" + tag + ".csv")).string(),
                    hist.str());
  }
  return 0;
}

void write_fit_rows(std::ostringstream& out, const std::string& label, const DidResult& r) {
  out << label << ',' << fmt(r.fit.beta_interaction()) << ',' << fmt(r.fit.se_interaction())
      << ',' << fmt(r.fit.mdv) << ',' << fmt(r.moved_share_treated_post) << ','
      << fmt(r.manipulation_share) << ',' << r.fit.n_obs << ',' << r.fit.n_clusters << "\n";
}

int cmd_did(CommonArgs& a, int subgroups, bool placebo) {
  if (a.panel.empty()) return fail(a, 3, "scenario: --panel is required");
  Panel panel;
  try {
    panel = read_panel_csv(a.panel);
  } catch (const std::exception& ex) {
    return fail(a, 3, ex.what());
  }
  {
    std::ifstream in(a.panel, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    write_manifest(a, "did", buf.str());
  }

  std::ostringstream out;
  out << "subgroup,beta,se,mdv,moved_share_treated_post,manipulation_share,n_obs,n_clusters\n";
  try {
    write_fit_rows(out, "all", fit_did(panel));
  } catch (const std::exception& ex) {
    return fail(a, 3, std::string("fit failed: ") + ex.what());
  }

  if (subgroups == 8) {
    std::vector<double> income, edu;
    for (const auto& r : panel) {
      if (r.parental_income) income.push_back(*r.parental_income);
      if (r.parental_education_years) edu.push_back(*r.parental_education_years);
    }
    std::sort(income.begin(), income.end());
    std::sort(edu.begin(), edu.end());
    const double inc_med = income.empty() ? 0.0 : income[income.size() / 2];
    const double edu_med = edu.empty() ? 0.0 : edu[edu.size() / 2];
    for (int cell = 0; cell < 8; ++cell) {
      const bool female = cell & 1, inc_hi = cell & 2, edu_hi = cell & 4;
      const auto filter = [&, cell](const PanelRecord& r) {
        const int c = (r.female ? 1 : 0) +
                      (r.parental_income && *r.parental_income > inc_med ? 2 : 0) +
                      (r.parental_education_years && *r.parental_education_years > edu_med ? 4 : 0);
        return c == cell;
      };
      std::ostringstream label;
      label << (female ? "female" : "male") << '/' << (inc_hi ? "income_hi" : "income_lo")
            << '/' << (edu_hi ? "edu_hi" : "edu_lo");
      try {
        write_fit_rows(out, label.str(), fit_did(panel, filter));
      } catch (const std::exception& ex) {
        log(kWarn, label.str() + ": " + ex.what());
        out << label.str() << ",,,,,,0,0\n";
      }
    }
  } else if (subgroups != 0 && subgroups != 1) {
    return fail(a, 3, "scenario: --subgroups must be 8 (or omitted)");
  }
  write_text_file((fs::path(a.out_dir) / "did.csv").string(), out.str());

  if (placebo) {
    try {
      const RegressionFit p = run_placebo(panel);
      write_text_file((fs::path(a.out_dir) / "placebo.json").string(),
                      json{{"beta", p.beta_interaction()}, {"se", p.se_interaction()},
                           {"n_obs", p.n_obs}}
                              .dump(2) +
                          "\n");
    } catch (const std::exception& ex) {
      return fail(a, 3, std::string("placebo failed: ") + ex.what());
    }
  }
  return 0;
}

int cmd_sweep(CommonArgs& a) {
  if (a.panel.empty()) return fail(a, 3, "scenario: --panel is required");
  Panel panel;
  try {
    panel = read_panel_csv(a.panel);
  } catch (const std::exception& ex) {
    return fail(a, 3, ex.what());
  }
  {
    std::ifstream in(a.panel, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    write_manifest(a, "sweep", buf.str());
  }
  const auto points = spec_curve(panel, default_spec_variants());
  std::ostringstream out;
  out << "variant,beta,se,n_obs,error\n";
  for (const auto& p : points) {
    out << p.variant.descriptor() << ',';
    if (p.fit)
      out << fmt(p.fit->beta_interaction()) << ',' << fmt(p.fit->se_interaction()) << ','
          << p.fit->n_obs << ',';
    else
      out << ",,,";
    // RFC-4180 quoting for the free-text error column.
    std::string err = p.error;
    if (err.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : err) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      quoted += '"';
      err = quoted;
    }
    out << err << "\n";
  }
  write_text_file((fs::path(a.out_dir) / "spec_curve.csv").string(), out.str());
  return 0;
}

int cmd_counterfactual(CommonArgs& a) {
  ScenarioConfig cfg;
  try {
    cfg = load_or_throw(a);
  } catch (const std::exception& ex) {
    return fail(a, 3, ex.what());
  }
  write_manifest(a, "counterfactual", scenario_to_json(cfg).dump());

  log(kInfo, "building panel for subgroup classification probabilities");
  const Panel panel = build_panel(cfg);
  const std::map<int, double> shares = subgroup_shares_from_panel(panel);

  const int year = *std::max_element(cfg.cohorts.begin(), cfg.cohorts.end());
  log(kInfo, "running counterfactual on cohort " + std::to_string(year));
  const Cohort cohort = generate_cohort(cfg, year);
  CounterfactualOptions opts;
  opts.threads = a.threads;
  const CounterfactualReport report =
      run_counterfactual(cohort.economy, cohort.rols, cohort.actions, cohort.events, shares,
                         cfg.manipulation_reps, cfg.master_seed, opts);

  json per_rep = json::array();
  for (const auto& r : report.per_rep)
    per_rep.push_back({{"winners_mass", r.winners_mass},
                       {"losers_mass", r.losers_mass},
                       {"unaffected_mass", r.unaffected_mass},
                       {"envy_share", r.envy_share}});
  json shares_json = json::object();
  for (const auto& [cell, p] : shares) shares_json[std::to_string(cell)] = p;
  write_text_file((fs::path(a.out_dir) / "counterfactual.json").string(),
                  json{{"year", year},
                       {"reps", report.reps},
                       {"seed", report.master_seed},
                       {"subgroup_probabilities", shares_json},
                       {"per_rep", per_rep}}
                          .dump(2) +
                      "\n");
  write_text_file((fs::path(a.out_dir) / "winners_losers.csv").string(),
                  winners_losers_table(report));

  // Envy-share histogram over reps, 20 bins on [0,1].
  std::vector<int> bins(20, 0);
  for (const auto& r : report.per_rep) {
    int b = static_cast<int>(r.envy_share * 20.0);
    if (b > 19) b = 19;
    if (b < 0) b = 0;
    ++bins[static_cast<std::size_t>(b)];
  }
  std::ostringstream hist;
  hist << "bin_lo,bin_hi,count\n";
  for (int b = 0; b < 20; ++b)
    hist << fmt(b / 20.0) << ',' << fmt((b + 1) / 20.0) << ','
         << bins[static_cast<std::size_t>(b)] << "\n";
  write_text_file((fs::path(a.out_dir) / "envy_histogram.csv").string(), hist.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"school-choice manipulation toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  int subgroups = 0;
  bool placebo = false;

  CLI::App* generate = app.add_subcommand("generate", "synthesize cohorts from a scenario");
  CLI::App* match = app.add_subcommand("match", "run a matching mechanism per cohort");
  CLI::App* equilibrium = app.add_subcommand("equilibrium", "solve market-clearing cutoffs");
  CLI::App* audit = app.add_subcommand("audit", "justified-envy and manipulation audits");
  CLI::App* did = app.add_subcommand("did", "difference-in-differences on a panel");
  CLI::App* counterfactual =
      app.add_subcommand("counterfactual", "remove manipulative moves and rematch");
  CLI::App* sweep = app.add_subcommand("sweep", "specification curve on a panel");
  for (CLI::App* cmd : {generate, match, equilibrium, audit, did, counterfactual, sweep})
    add_common(cmd, args);
  did->add_option("--subgroups", subgroups, "subgroup cells (8)");
  did->add_flag("--placebo", placebo, "also fit the placebo outcome");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << json{{"error", e.what()}, {"exit_code", 2}}.dump() << "\n";
    return 2;
  }

  try {
    fs::create_directories(args.out_dir);
    if (generate->parsed()) return cmd_generate(args);
    if (match->parsed()) return cmd_match(args);
    if (equilibrium->parsed()) return cmd_equilibrium(args);
    if (audit->parsed()) return cmd_audit(args);
    if (did->parsed()) return cmd_did(args, subgroups, placebo);
    if (counterfactual->parsed()) return cmd_counterfactual(args);
    if (sweep->parsed()) return cmd_sweep(args);
  } catch (const std::exception& ex) {
    return fail(args, 1, ex.what());
  }
  return 1;
}
