#include <doctest.h>

#include <cmath>

#include "envymarket/io.hpp"
#include "envymarket/policy.hpp"

using namespace envymarket;

namespace {

ScenarioConfig small_scenario() {
  ScenarioConfig cfg;
  cfg.n_students = 200;
  cfg.cohorts = {2010, 2011, 2012, 2013};
  cfg.city_count = 2;
  cfg.n_schools = 4;
  cfg.manipulation_reps = 5;
  cfg.master_seed = 11;
  return normalize_scenario(cfg);
}

// Capacity-one school: B's on-site move displaces A unless it is removed.
struct Displacement {
  Economy e;
  std::vector<RankOrderList> rols;
  std::vector<int> actions;
  std::vector<MoveEvent> events;
};

Displacement displacement_fixture() {
  Displacement d;
  Economy& e = d.e;
  e.w = 1.0;
  e.gamma = 0.2;
  e.d_max = 10.0;
  e.schools.push_back({0, 1.0, {0.0, 0.0}});
  Student a, b;
  a.id = 0;
  a.utilities = {1.0};
  a.exog_priority = {0.9};
  a.actions = {{4.0, 0.0}};
  a.cov.treated = true;
  a.cov.post = true;
  b.id = 1;
  b.utilities = {1.0};
  b.exog_priority = {0.1};
  b.actions = {{9.0, 0.0}, {0.5, 0.0}};
  b.cov.treated = true;
  b.cov.post = true;
  e.students = {a, b};
  d.rols = {{0}, {0}};
  d.actions = {kNullAction, 1};
  d.events.push_back({1, {9.0, 0.0}, {0.5, 0.0}, 10, false, true});
  return d;
}

std::map<int, double> uniform_probs(double p) {
  std::map<int, double> probs;
  for (int cell = 0; cell < 8; ++cell) probs[cell] = p;
  return probs;
}

}  // namespace

TEST_CASE("cohort generation is deterministic and mass-consistent") {
  const ScenarioConfig cfg = small_scenario();
  const Cohort a = generate_cohort(cfg, 2013);
  const Cohort b = generate_cohort(cfg, 2013);
  CHECK(economy_to_json(a.economy) == economy_to_json(b.economy));
  CHECK(a.actions == b.actions);
  CHECK(a.events.size() == b.events.size());
  CHECK(validate_economy(a.economy).empty());
  CHECK(a.economy.n_students() == 200);
  // every mover's action index points at a real address
  for (int i = 0; i < a.economy.n_students(); ++i) {
    const auto& st = a.economy.students[static_cast<std::size_t>(i)];
    CHECK(a.actions[static_cast<std::size_t>(i)] < static_cast<int>(st.actions.size()));
  }
  for (const auto& ev : a.events) {
    CHECK(ev.day_offset >= 0);
    CHECK(ev.day_offset <= 151);
  }
}

TEST_CASE("strategic injection only fires post-reform for treated students") {
  const ScenarioConfig cfg = small_scenario();
  const Cohort pre = generate_cohort(cfg, 2010);
  CHECK(pre.diag.n_strategic_eligible == 0);
  CHECK(pre.diag.n_strategic_injected == 0);

  const Cohort post = generate_cohort(cfg, 2013);
  CHECK(post.diag.n_strategic_injected <= post.diag.n_strategic_eligible);
  for (const auto& ev : post.events)
    if (ev.to_relative) {
      const auto& cov = post.economy.students[static_cast<std::size_t>(ev.student)].cov;
      CHECK(cov.treated);
      CHECK(cov.post);
      CHECK(!ev.household_move);
    }
}

TEST_CASE("subgroup cells split on gender and the two parental medians") {
  Covariates cov;
  cov.female = true;
  cov.parental_income = 350.0;
  cov.parental_education_years = 12.0;
  CHECK(subgroup_of(cov, 300.0, 13.0) == 3);  // female + income-high
  cov.female = false;
  cov.parental_education_years = 15.0;
  CHECK(subgroup_of(cov, 300.0, 13.0) == 6);  // income-high + edu-high
  cov.parental_income = 200.0;
  CHECK(subgroup_of(cov, 300.0, 13.0) == 4);
}

TEST_CASE("move classification honors household flags and subgroup probabilities") {
  const Displacement d = displacement_fixture();
  CHECK(classify_moves(d.e, d.events, uniform_probs(1.0), 1) == std::set<int>{1});
  CHECK(classify_moves(d.e, d.events, uniform_probs(0.0), 1).empty());

  SUBCASE("household moves never get flagged") {
    auto events = d.events;
    events[0].household_move = true;
    CHECK(classify_moves(d.e, events, uniform_probs(1.0), 1).empty());
  }
  SUBCASE("untreated movers are out of scope") {
    Displacement d2 = displacement_fixture();
    d2.e.students[1].cov.treated = false;
    CHECK(classify_moves(d2.e, d2.events, uniform_probs(1.0), 1).empty());
  }
  SUBCASE("a mover without a subgroup probability is an error") {
    CHECK_THROWS_AS(classify_moves(d.e, d.events, {}, 1), std::runtime_error);
  }
}

TEST_CASE("counterfactual reruns conserve mass and identify the displaced winner") {
  const Displacement d = displacement_fixture();
  const CounterfactualReport r =
      run_counterfactual(d.e, d.rols, d.actions, d.events, uniform_probs(1.0), 20, 9);
  REQUIRE(r.per_rep.size() == 20);
  for (const auto& rep : r.per_rep) {
    CHECK(rep.winners_mass + rep.losers_mass + rep.unaffected_mass ==
          doctest::Approx(d.e.total_mass()));
    CHECK(rep.winners_mass == doctest::Approx(1.0));  // student A gets the seat back
    CHECK(rep.losers_mass == doctest::Approx(1.0));   // the manipulative mover drops out
  }
  CHECK(r.winners.mass == doctest::Approx(1.0));
  CHECK(r.winners.parental_income ==
        doctest::Approx(d.e.students[0].cov.parental_income));
}

TEST_CASE("zero flag probability reproduces the baseline exactly") {
  const Displacement d = displacement_fixture();
  const CounterfactualReport r =
      run_counterfactual(d.e, d.rols, d.actions, d.events, uniform_probs(0.0), 10, 9);
  for (const auto& rep : r.per_rep) {
    CHECK(rep.winners_mass == 0.0);
    CHECK(rep.losers_mass == 0.0);
    CHECK(rep.unaffected_mass == doctest::Approx(d.e.total_mass()));
  }
}

TEST_CASE("the counterfactual is deterministic across thread counts") {
  const ScenarioConfig cfg = small_scenario();
  const Cohort cohort = generate_cohort(cfg, 2013);
  CounterfactualOptions seq, par;
  seq.threads = 1;
  par.threads = 4;
  const auto a = run_counterfactual(cohort.economy, cohort.rols, cohort.actions,
                                    cohort.events, uniform_probs(0.5), 8, 2, seq);
  const auto b = run_counterfactual(cohort.economy, cohort.rols, cohort.actions,
                                    cohort.events, uniform_probs(0.5), 8, 2, par);
  REQUIRE(a.per_rep.size() == b.per_rep.size());
  for (std::size_t k = 0; k < a.per_rep.size(); ++k) {
    CHECK(a.per_rep[k].winners_mass == b.per_rep[k].winners_mass);
    CHECK(a.per_rep[k].losers_mass == b.per_rep[k].losers_mass);
    CHECK(a.per_rep[k].envy_share == b.per_rep[k].envy_share);
  }
  CHECK(a.winners.gpa == b.winners.gpa);
}

TEST_CASE("the winners/losers table is a fixed-layout CSV") {
  const Displacement d = displacement_fixture();
  const CounterfactualReport r =
      run_counterfactual(d.e, d.rols, d.actions, d.events, uniform_probs(1.0), 4, 9);
  const std::string csv = winners_losers_table(r);
  CHECK(csv.rfind("statistic,unaffected,losers,winners\n", 0) == 0);
  CHECK(csv.find("\nmass,") != std::string::npos);
  CHECK(csv.find("\npeer_gpa_counterfactual,") != std::string::npos);
  CHECK_THROWS_AS(winners_losers_table(CounterfactualReport{}), std::runtime_error);
}

TEST_CASE("the panel DGP plants exact subgroup manipulation shares") {
  PanelDgpConfig cfg;
  cfg.students_per_muni_year = 400;
  cfg.muni_effect_sd = 0.0;
  cfg.year_effect_sd = 0.0;
  cfg.subgroup_manipulation_share = {{0, 0.5}, {1, 0.5}, {2, 0.5}, {3, 0.5},
                                     {4, 0.5}, {5, 0.5}, {6, 0.5}, {7, 0.5}};
  const Panel panel = simulate_panel(cfg, 21);
  // planted: treated-post move rate doubles (share 0.5 of moves manipulative)
  double tp = 0.0, tp_moves = 0.0, base = 0.0, base_moves = 0.0;
  for (const auto& r : panel) {
    if (r.treated && r.post) {
      tp += 1.0;
      tp_moves += r.moved;
    } else {
      base += 1.0;
      base_moves += r.moved;
    }
  }
  const double p_tp = tp_moves / tp, p_base = base_moves / base;
  CHECK(std::abs(p_base - cfg.base_move_rate) < 0.003);
  CHECK(std::abs(p_tp - 2.0 * cfg.base_move_rate) < 0.004);
}

TEST_CASE("scenario panels carry one row per student-year with demand fields") {
  const ScenarioConfig cfg = small_scenario();
  const Panel panel = build_panel(cfg);
  CHECK(panel.size() == static_cast<std::size_t>(200 * 4));
  for (const auto& r : panel) {
    CHECK(r.muni_demand.has_value());
    CHECK(r.muni_supply.has_value());
    CHECK((r.post == 1) == (r.year >= 2012));
  }
}
