#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "envymarket/core.hpp"
#include "envymarket/econometrics.hpp"
#include "envymarket/envy.hpp"
#include "envymarket/mechanisms.hpp"
#include "envymarket/scenario.hpp"

namespace envymarket {

struct MoveEvent {
  int student = -1;      // student index in the cohort economy
  Address from;
  Address to;
  int day_offset = 0;    // days before the application deadline, in [0,151]
  bool household_move = false;
  bool to_relative = false;
};

struct CohortDiagnostics {
  int n_strategic_eligible = 0;  // deception-eligible treated-post students
  int n_strategic_injected = 0;
  int n_baseline_movers = 0;
  int n_household_movers = 0;
};

struct Cohort {
  Economy economy;
  std::vector<RankOrderList> rols;
  std::vector<int> actions;  // current action per student (movers != 0)
  std::vector<MoveEvent> events;
  CohortDiagnostics diag;
};

// Deterministic synthetic cohort for one year: geography, preferences,
// priorities, baseline moves and (post-reform) strategic moves injected
// for deception-eligible students at the anticipated cutoffs.
Cohort generate_cohort(const ScenarioConfig& cfg, int year);

// The cohort economy with (w, gamma) resolved per region/year. Throws on
// a year outside the scenario's cohorts.
Economy economy_for_year(const ScenarioConfig& cfg, int year);

// One student-year panel over all cohorts (individual moves only).
Panel build_panel(const ScenarioConfig& cfg);

// complier-share ratio, clamped to [0,1]; negative beta clamps to 0.
// (thin wrapper kept next to the classifier; see econometrics for the fit)
double manipulation_probability(double beta, double moved_share_treated_post);

// Subgroup cell: female x income>p50 x education>p50 (8 cells).
int subgroup_of(const Covariates& cov, double income_median, double edu_median);
std::array<double, 2> cohort_medians(const Economy& e);  // {income, education}

// Flags manipulative movers: one uniform draw per individual treated-post
// move against its subgroup probability. Household moves are never
// flagged. Throws when a mover's subgroup has no probability.
std::set<int> classify_moves(const Economy& e, const std::vector<MoveEvent>& events,
                             const std::map<int, double>& subgroup_probs,
                             std::uint64_t rep_seed);

struct RepStats {
  double winners_mass = 0.0;
  double losers_mass = 0.0;
  double unaffected_mass = 0.0;
  double envy_share = 0.0;
};

struct GroupAverages {
  double mass = 0.0;  // probability-weighted
  double parental_income = 0.0;
  double parental_education_years = 0.0;
  double gpa = 0.0;
  double female_share = 0.0;
  double peer_gpa_baseline = 0.0;
  double peer_gpa_counterfactual = 0.0;
};

struct CounterfactualReport {
  std::vector<RepStats> per_rep;
  GroupAverages winners, losers, unaffected;
  int reps = 0;
  std::uint64_t master_seed = 0;
};

struct CounterfactualOptions {
  bool pooled_covariates = false;      // unweighted over ever-winners/losers
  bool peer_gpa_fixed_baseline = false;  // score schools by baseline peers
  int threads = 0;                     // 0: hardware concurrency
};

// Per rep: classify moves, reset flagged movers to their origin address,
// re-run IA with unchanged rank order lists, and compare each student's
// assigned rank against the baseline.
CounterfactualReport run_counterfactual(const Economy& e,
                                        const std::vector<RankOrderList>& rols,
                                        const std::vector<int>& baseline_actions,
                                        const std::vector<MoveEvent>& events,
                                        const std::map<int, double>& subgroup_probs,
                                        int reps, std::uint64_t master_seed,
                                        const CounterfactualOptions& opts = {});

// Table layout: Unaffected / Losers / Winners columns of covariate means
// plus baseline and counterfactual peer GPA. CSV text.
std::string winners_losers_table(const CounterfactualReport& report);

// Synthetic student-year panel with a planted linear-probability move
// process; used to close the loop between the DiD fit, the complier-share
// back-out, and a known manipulation rate.
struct PanelDgpConfig {
  int n_municipalities = 20;
  int treated_municipalities = 5;
  int students_per_muni_year = 100;
  std::vector<int> years = {2008, 2009, 2010, 2011, 2012, 2013, 2014, 2015};
  int first_post_year = 2012;
  double base_move_rate = 0.006;
  double effect = 0.006;              // added to treated-post move probability
  double muni_effect_sd = 0.001;
  double year_effect_sd = 0.001;
  // When set, the per-subgroup manipulation share among treated-post
  // movers; extra moves are injected so the planted share is exact.
  std::map<int, double> subgroup_manipulation_share;
  double placebo_move_rate = 0.006;   // penultimate-year moves, never strategic
};

Panel simulate_panel(const PanelDgpConfig& cfg, std::uint64_t seed);

}  // namespace envymarket
