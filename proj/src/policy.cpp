#include "envymarket/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "envymarket/deception.hpp"
#include "envymarket/equilibrium.hpp"
#include "envymarket/rng.hpp"

namespace envymarket {

namespace {

constexpr std::uint64_t kGeoStream = 0x6e0u;  // geography is shared across cohorts
constexpr std::uint64_t kPlaceboStream = 0x91ace80u;

struct Geography {
  std::vector<Address> cities;
  std::vector<School> schools;
  std::vector<int> school_muni;
  std::vector<double> quality;
};

Geography build_geography(const ScenarioConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.master_seed, kGeoStream));
  std::uniform_real_distribution<double> unif(0.0, cfg.spread_km);
  std::normal_distribution<double> jitter(0.0, cfg.spread_km / 20.0);
  std::normal_distribution<double> quality(0.0, cfg.quality_sd);

  Geography g;
  for (int c = 0; c < cfg.city_count; ++c) g.cities.push_back({unif(rng), unif(rng)});

  const double cap = std::max(1.0, std::floor(cfg.capacity_ratio *
                                              static_cast<double>(cfg.n_students) /
                                              static_cast<double>(cfg.n_schools)));
  for (int s = 0; s < cfg.n_schools; ++s) {
    School sc;
    sc.id = s;
    sc.capacity = cap;
    if (cfg.school_placement == "city_center") {
      const Address& c = g.cities[static_cast<std::size_t>(s % cfg.city_count)];
      sc.location = {c.x + jitter(rng), c.y + jitter(rng)};
    } else {
      sc.location = {unif(rng), unif(rng)};
    }
    g.schools.push_back(sc);
    g.quality.push_back(quality(rng));
  }

  // Degenerate geometry guard.
  if (cfg.n_schools >= 2) {
    double max_gap = 0.0;
    for (std::size_t a = 0; a < g.schools.size(); ++a)
      for (std::size_t b = a + 1; b < g.schools.size(); ++b)
        max_gap = std::max(max_gap, std::hypot(g.schools[a].location.x - g.schools[b].location.x,
                                               g.schools[a].location.y - g.schools[b].location.y));
    if (max_gap < 1e-9) throw std::runtime_error("degenerate geometry: all schools co-located");
  }

  for (const auto& sc : g.schools) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < cfg.city_count; ++c) {
      const double d = std::hypot(sc.location.x - g.cities[static_cast<std::size_t>(c)].x,
                                  sc.location.y - g.cities[static_cast<std::size_t>(c)].y);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    g.school_muni.push_back(best);
  }
  return g;
}

int global_reform_year(const ScenarioConfig& cfg) {
  int year = std::numeric_limits<int>::max();
  for (const auto& seg : cfg.reforms)
    if (!seg.region && seg.w && *seg.w > 0.0) year = std::min(year, seg.year_from);
  return year;
}

}  // namespace

Cohort generate_cohort(const ScenarioConfig& cfg, int year) {
  const Geography geo = build_geography(cfg);
  std::mt19937_64 rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(year)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> home_jitter(0.0, cfg.spread_km / 10.0);
  std::normal_distribution<double> flat_jitter(0.0, 0.5);
  std::normal_distribution<double> noise(0.0, cfg.noise_sd);
  std::normal_distribution<double> income_d(300.0, 100.0);
  std::normal_distribution<double> edu_d(13.0, 2.0);
  std::normal_distribution<double> gpa_d(0.0, 1.0);

  const Regime global = resolve_regime(cfg, year, -1);
  const bool post = year >= global_reform_year(cfg);

  Cohort out;
  Economy& e = out.economy;
  e.schools = geo.schools;
  e.w = global.w;
  e.gamma = global.gamma;
  e.metric = DistanceMetric::Euclidean;

  for (int i = 0; i < cfg.n_students; ++i) {
    Student st;
    st.id = i;
    st.weight = 1.0;
    const int city = i % cfg.city_count;
    const Address home{geo.cities[static_cast<std::size_t>(city)].x + home_jitter(rng),
                       geo.cities[static_cast<std::size_t>(city)].y + home_jitter(rng)};
    st.actions.push_back(home);

    st.cov.cohort_year = year;
    st.cov.municipality = city;
    st.cov.post = post;
    st.cov.parental_income = income_d(rng);
    st.cov.parental_education_years = edu_d(rng);
    st.cov.gpa = gpa_d(rng);
    st.cov.female = unit(rng) < 0.5;

    int top = 0;
    double top_v = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.n_schools; ++s) {
      const double dist = std::hypot(home.x - geo.schools[static_cast<std::size_t>(s)].location.x,
                                     home.y - geo.schools[static_cast<std::size_t>(s)].location.y);
      const double v = 1.0 + geo.quality[static_cast<std::size_t>(s)] -
                       cfg.distance_weight * dist + noise(rng);
      st.utilities.push_back(v);
      st.exog_priority.push_back(unit(rng));
      if (v > top_v) {
        top_v = v;
        top = s;
      }
    }
    // A relative's flat near the student's favorite school: the address
    // that deception would use.
    const Address& sl = geo.schools[static_cast<std::size_t>(top)].location;
    st.actions.push_back({sl.x + flat_jitter(rng), sl.y + flat_jitter(rng)});

    const Regime local = resolve_regime(cfg, year, city);
    if (local.gamma != global.gamma) st.gamma_override = local.gamma;
    e.students.push_back(std::move(st));
  }

  if (cfg.d_max) {
    e.d_max = *cfg.d_max;
  } else {
    double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
    auto feed = [&](const Address& a) {
      lo_x = std::min(lo_x, a.x);
      lo_y = std::min(lo_y, a.y);
      hi_x = std::max(hi_x, a.x);
      hi_y = std::max(hi_y, a.y);
    };
    for (const auto& s : e.schools) feed(s.location);
    for (const auto& st : e.students) feed(st.actions[0]);
    e.d_max = std::max(1e-9, std::hypot(hi_x - lo_x, hi_y - lo_y));
  }

  for (int i = 0; i < cfg.n_students; ++i)
    out.rols.push_back(true_rol(e, i, cfg.rol_cap));

  // Treated: municipalities in the top demand quartile (first listings
  // over local capacity).
  {
    std::vector<double> listings(static_cast<std::size_t>(cfg.city_count), 0.0);
    std::vector<double> capacity(static_cast<std::size_t>(cfg.city_count), 0.0);
    for (int s = 0; s < cfg.n_schools; ++s)
      capacity[static_cast<std::size_t>(geo.school_muni[static_cast<std::size_t>(s)])] +=
          geo.schools[static_cast<std::size_t>(s)].capacity;
    for (int i = 0; i < cfg.n_students; ++i)
      if (!out.rols[static_cast<std::size_t>(i)].empty())
        listings[static_cast<std::size_t>(
            geo.school_muni[static_cast<std::size_t>(out.rols[static_cast<std::size_t>(i)][0])])] += 1.0;
    std::vector<double> demand(static_cast<std::size_t>(cfg.city_count));
    for (int c = 0; c < cfg.city_count; ++c)
      demand[static_cast<std::size_t>(c)] =
          capacity[static_cast<std::size_t>(c)] > 0.0
              ? listings[static_cast<std::size_t>(c)] / capacity[static_cast<std::size_t>(c)]
              : 0.0;
    std::vector<int> order(static_cast<std::size_t>(cfg.city_count));
    for (int c = 0; c < cfg.city_count; ++c) order[static_cast<std::size_t>(c)] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (demand[static_cast<std::size_t>(a)] != demand[static_cast<std::size_t>(b)])
        return demand[static_cast<std::size_t>(a)] > demand[static_cast<std::size_t>(b)];
      return a < b;
    });
    const int n_treated = std::max(1, (cfg.city_count + 3) / 4);
    std::vector<bool> treated(static_cast<std::size_t>(cfg.city_count), false);
    for (int k = 0; k < n_treated; ++k) treated[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;
    for (auto& st : e.students)
      st.cov.treated = treated[static_cast<std::size_t>(st.cov.municipality)];
  }

  out.actions.assign(static_cast<std::size_t>(cfg.n_students), kNullAction);

  // Baseline (non-strategic) moves.
  std::uniform_int_distribution<int> window(0, 151);
  for (int i = 0; i < cfg.n_students; ++i) {
    auto& st = e.students[static_cast<std::size_t>(i)];
    const double u = unit(rng);
    const bool household = u < cfg.household_move_rate;
    const bool individual = !household && u < cfg.household_move_rate + cfg.base_move_rate;
    if (!household && !individual) continue;
    const int city = st.cov.municipality;
    const Address to{geo.cities[static_cast<std::size_t>(city)].x + home_jitter(rng),
                     geo.cities[static_cast<std::size_t>(city)].y + home_jitter(rng)};
    st.actions.push_back(to);
    const int a = static_cast<int>(st.actions.size()) - 1;
    out.actions[static_cast<std::size_t>(i)] = a;
    out.events.push_back({i, st.actions[0], to, window(rng), household, false});
    if (household)
      ++out.diag.n_household_movers;
    else
      ++out.diag.n_baseline_movers;
  }

  // Strategic moves for deception-eligible treated-post students, at the
  // anticipated (pre-move) market-clearing cutoffs.
  if (post && e.w > 0.0) {
    const EquilibriumResult eq = solve_equilibrium(e, cfg.master_seed);
    std::uniform_int_distribution<int> late_window(0, 30);
    for (int i = 0; i < cfg.n_students; ++i) {
      auto& st = e.students[static_cast<std::size_t>(i)];
      if (!st.cov.treated || out.actions[static_cast<std::size_t>(i)] != kNullAction) continue;
      const DemandDecision d = individual_demand(e, i, eq.cutoffs);
      if (!d.with_deception) continue;
      ++out.diag.n_strategic_eligible;
      const Regime local = resolve_regime(cfg, year, st.cov.municipality);
      if (unit(rng) >= cfg.strategic_move_rate) continue;
      if (local.revert_prob > 0.0 && unit(rng) < local.revert_prob) continue;  // reverted
      out.actions[static_cast<std::size_t>(i)] = d.action_used;
      out.events.push_back(
          {i, st.actions[0], st.actions[static_cast<std::size_t>(d.action_used)],
           late_window(rng), false, true});
      ++out.diag.n_strategic_injected;
    }
  }
  return out;
}

Economy economy_for_year(const ScenarioConfig& cfg, int year) {
  if (std::find(cfg.cohorts.begin(), cfg.cohorts.end(), year) == cfg.cohorts.end())
    throw std::runtime_error("year " + std::to_string(year) + " not covered by scenario");
  return generate_cohort(cfg, year).economy;
}

Panel build_panel(const ScenarioConfig& cfg) {
  Panel panel;
  for (int year : cfg.cohorts) {
    const Cohort cohort = generate_cohort(cfg, year);
    std::vector<bool> moved(static_cast<std::size_t>(cohort.economy.n_students()), false);
    for (const auto& ev : cohort.events)
      if (!ev.household_move) moved[static_cast<std::size_t>(ev.student)] = true;

    // Municipality demand/supply measures for alternative treatment cuts.
    std::vector<double> listings(static_cast<std::size_t>(cfg.city_count), 0.0);
    std::vector<double> seats(static_cast<std::size_t>(cfg.city_count), 0.0);
    std::vector<double> heads(static_cast<std::size_t>(cfg.city_count), 0.0);
    const Geography geo = build_geography(cfg);
    for (int s = 0; s < cfg.n_schools; ++s)
      seats[static_cast<std::size_t>(geo.school_muni[static_cast<std::size_t>(s)])] +=
          geo.schools[static_cast<std::size_t>(s)].capacity;
    for (int i = 0; i < cohort.economy.n_students(); ++i) {
      heads[static_cast<std::size_t>(
          cohort.economy.students[static_cast<std::size_t>(i)].cov.municipality)] += 1.0;
      if (!cohort.rols[static_cast<std::size_t>(i)].empty())
        listings[static_cast<std::size_t>(geo.school_muni[static_cast<std::size_t>(
            cohort.rols[static_cast<std::size_t>(i)][0])])] += 1.0;
    }

    for (int i = 0; i < cohort.economy.n_students(); ++i) {
      const auto& st = cohort.economy.students[static_cast<std::size_t>(i)];
      PanelRecord r;
      r.student_id = static_cast<long>(year) * 1000000L + st.id;
      r.year = year;
      r.municipality = st.cov.municipality;
      r.moved = moved[static_cast<std::size_t>(i)] ? 1 : 0;
      r.moved_placebo =
          keyed_uniform(derive_seed(cfg.master_seed, kPlaceboStream ^ static_cast<std::uint64_t>(year)),
                        static_cast<std::uint64_t>(st.id)) < cfg.base_move_rate
              ? 1
              : 0;
      r.treated = st.cov.treated ? 1 : 0;
      r.post = st.cov.post ? 1 : 0;
      r.female = st.cov.female;
      r.parental_income = st.cov.parental_income;
      r.parental_education_years = st.cov.parental_education_years;
      r.gpa = st.cov.gpa;
      const auto m = static_cast<std::size_t>(st.cov.municipality);
      r.muni_demand = seats[m] > 0.0 ? listings[m] / seats[m] : 0.0;
      r.muni_supply = heads[m] > 0.0 ? seats[m] / heads[m] : 0.0;
      panel.push_back(std::move(r));
    }
  }
  return panel;
}

int subgroup_of(const Covariates& cov, double income_median, double edu_median) {
  return (cov.female ? 1 : 0) + (cov.parental_income > income_median ? 2 : 0) +
         (cov.parental_education_years > edu_median ? 4 : 0);
}

std::array<double, 2> cohort_medians(const Economy& e) {
  std::vector<double> income, edu;
  for (const auto& st : e.students) {
    income.push_back(st.cov.parental_income);
    edu.push_back(st.cov.parental_education_years);
  }
  auto median = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    return v.empty() ? 0.0 : v[v.size() / 2];
  };
  return {median(income), median(edu)};
}

std::set<int> classify_moves(const Economy& e, const std::vector<MoveEvent>& events,
                             const std::map<int, double>& subgroup_probs,
                             std::uint64_t rep_seed) {
  const auto medians = cohort_medians(e);
  std::set<int> flagged;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& ev = events[k];
    if (ev.household_move) continue;  // household moves are never flagged
    const auto& cov = e.students[static_cast<std::size_t>(ev.student)].cov;
    if (!cov.treated || !cov.post) continue;
    const int cell = subgroup_of(cov, medians[0], medians[1]);
    const auto it = subgroup_probs.find(cell);
    if (it == subgroup_probs.end())
      throw std::runtime_error("mover in subgroup " + std::to_string(cell) +
                               " has no classification probability");
    const double u = keyed_uniform(rep_seed, (static_cast<std::uint64_t>(ev.student) << 16) ^ k);
    if (u < it->second) flagged.insert(ev.student);
  }
  return flagged;
}

namespace {

int rol_rank(const RankOrderList& rol, int school) {
  for (std::size_t r = 0; r < rol.size(); ++r)
    if (rol[r] == school) return static_cast<int>(r) + 1;
  return static_cast<int>(rol.size()) + 1;  // unmatched (or unlisted)
}

std::vector<double> peer_gpa_by_school(const Economy& e, const MatchOutcome& m,
                                       const std::vector<double>& z_gpa) {
  std::vector<double> sum(static_cast<std::size_t>(e.n_schools()), 0.0);
  std::vector<double> mass(static_cast<std::size_t>(e.n_schools()), 0.0);
  for (int i = 0; i < e.n_students(); ++i) {
    const int s = m.assignment[static_cast<std::size_t>(i)];
    if (s == kUnmatched) continue;
    sum[static_cast<std::size_t>(s)] +=
        e.students[static_cast<std::size_t>(i)].weight * z_gpa[static_cast<std::size_t>(i)];
    mass[static_cast<std::size_t>(s)] += e.students[static_cast<std::size_t>(i)].weight;
  }
  std::vector<double> out(static_cast<std::size_t>(e.n_schools()), 0.0);
  for (int s = 0; s < e.n_schools(); ++s)
    if (mass[static_cast<std::size_t>(s)] > 0.0)
      out[static_cast<std::size_t>(s)] =
          sum[static_cast<std::size_t>(s)] / mass[static_cast<std::size_t>(s)];
  return out;
}

}  // namespace

CounterfactualReport run_counterfactual(const Economy& e,
                                        const std::vector<RankOrderList>& rols,
                                        const std::vector<int>& baseline_actions,
                                        const std::vector<MoveEvent>& events,
                                        const std::map<int, double>& subgroup_probs,
                                        int reps, std::uint64_t master_seed,
                                        const CounterfactualOptions& opts) {
  if (reps < 1) throw std::runtime_error("reps must be >= 1");
  const int n = e.n_students();

  // Standardized GPA for peer measures.
  std::vector<double> z_gpa(static_cast<std::size_t>(n));
  {
    double mean = 0.0, m2 = 0.0;
    for (const auto& st : e.students) mean += st.cov.gpa;
    mean /= std::max(1, n);
    for (const auto& st : e.students) m2 += (st.cov.gpa - mean) * (st.cov.gpa - mean);
    const double sd = n > 1 ? std::sqrt(m2 / (n - 1)) : 1.0;
    for (int i = 0; i < n; ++i)
      z_gpa[static_cast<std::size_t>(i)] =
          sd > 0.0 ? (e.students[static_cast<std::size_t>(i)].cov.gpa - mean) / sd : 0.0;
  }

  const MatchOutcome baseline = run_ia(e, rols, baseline_actions, master_seed);
  const std::vector<double> peer_base = peer_gpa_by_school(e, baseline, z_gpa);

  std::vector<int> base_rank(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    base_rank[static_cast<std::size_t>(i)] =
        rol_rank(rols[static_cast<std::size_t>(i)],
                 baseline.assignment[static_cast<std::size_t>(i)]);

  struct RepOutput {
    RepStats stats;
    std::vector<signed char> cls;  // -1 loser, 0 unaffected, +1 winner
    std::vector<double> peer_cf;   // per student, their counterfactual school's score
  };

  auto run_rep = [&](int rep) {
    const std::uint64_t rep_seed = derive_seed(master_seed, static_cast<std::uint64_t>(rep));
    std::set<int> flagged;
    try {
      flagged = classify_moves(e, events, subgroup_probs, rep_seed);
    } catch (const std::exception& ex) {
      throw std::runtime_error("rep " + std::to_string(rep) + " (seed " +
                               std::to_string(rep_seed) + "): " + ex.what());
    }
    std::vector<int> actions = baseline_actions;
    for (int i : flagged) actions[static_cast<std::size_t>(i)] = kNullAction;
    const MatchOutcome cf = run_ia(e, rols, actions, master_seed);
    const std::vector<double> peer_cf_school =
        opts.peer_gpa_fixed_baseline ? peer_base : peer_gpa_by_school(e, cf, z_gpa);

    RepOutput out;
    out.cls.resize(static_cast<std::size_t>(n), 0);
    out.peer_cf.resize(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      const int r = rol_rank(rols[static_cast<std::size_t>(i)],
                             cf.assignment[static_cast<std::size_t>(i)]);
      const double wgt = e.students[static_cast<std::size_t>(i)].weight;
      if (r < base_rank[static_cast<std::size_t>(i)]) {
        out.cls[static_cast<std::size_t>(i)] = 1;
        out.stats.winners_mass += wgt;
      } else if (r > base_rank[static_cast<std::size_t>(i)]) {
        out.cls[static_cast<std::size_t>(i)] = -1;
        out.stats.losers_mass += wgt;
      } else {
        out.stats.unaffected_mass += wgt;
      }
      const int s = cf.assignment[static_cast<std::size_t>(i)];
      out.peer_cf[static_cast<std::size_t>(i)] =
          s == kUnmatched ? 0.0 : peer_cf_school[static_cast<std::size_t>(s)];
    }
    out.stats.envy_share = audit_empirical_envy(e, rols, baseline, flagged).share_with_envy;
    return out;
  };

  std::vector<RepOutput> rep_out(static_cast<std::size_t>(reps));
  const int threads = opts.threads > 0
                          ? opts.threads
                          : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (threads <= 1 || reps == 1) {
    for (int rep = 0; rep < reps; ++rep) rep_out[static_cast<std::size_t>(rep)] = run_rep(rep);
  } else {
    std::vector<std::future<void>> tasks;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
      tasks.push_back(std::async(std::launch::async, [&] {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1))
          rep_out[static_cast<std::size_t>(rep)] = run_rep(rep);
      }));
    for (auto& t : tasks) t.get();
  }

  CounterfactualReport report;
  report.reps = reps;
  report.master_seed = master_seed;
  for (const auto& r : rep_out) report.per_rep.push_back(r.stats);

  // Per-student win/loss frequencies and accumulated counterfactual peer
  // scores, then frequency-weighted (or pooled) covariate means.
  std::vector<int> wins(static_cast<std::size_t>(n), 0), losses(static_cast<std::size_t>(n), 0);
  std::vector<double> cf_win(static_cast<std::size_t>(n), 0.0), cf_loss(static_cast<std::size_t>(n), 0.0),
      cf_unaff(static_cast<std::size_t>(n), 0.0);
  for (const auto& r : rep_out)
    for (int i = 0; i < n; ++i) {
      if (r.cls[static_cast<std::size_t>(i)] > 0) {
        ++wins[static_cast<std::size_t>(i)];
        cf_win[static_cast<std::size_t>(i)] += r.peer_cf[static_cast<std::size_t>(i)];
      } else if (r.cls[static_cast<std::size_t>(i)] < 0) {
        ++losses[static_cast<std::size_t>(i)];
        cf_loss[static_cast<std::size_t>(i)] += r.peer_cf[static_cast<std::size_t>(i)];
      } else {
        cf_unaff[static_cast<std::size_t>(i)] += r.peer_cf[static_cast<std::size_t>(i)];
      }
    }

  auto fill_group = [&](GroupAverages& g, auto count_of, const std::vector<double>& cf_sum) {
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
      const double cnt = count_of(i);
      if (cnt <= 0.0) continue;
      const double wgt = (opts.pooled_covariates ? 1.0 : cnt / reps) *
                         e.students[static_cast<std::size_t>(i)].weight;
      const auto& cov = e.students[static_cast<std::size_t>(i)].cov;
      mass += wgt;
      g.parental_income += wgt * cov.parental_income;
      g.parental_education_years += wgt * cov.parental_education_years;
      g.gpa += wgt * cov.gpa;
      g.female_share += wgt * (cov.female ? 1.0 : 0.0);
      const int bs = baseline.assignment[static_cast<std::size_t>(i)];
      g.peer_gpa_baseline += wgt * (bs == kUnmatched ? 0.0 : peer_base[static_cast<std::size_t>(bs)]);
      g.peer_gpa_counterfactual += wgt * (cf_sum[static_cast<std::size_t>(i)] / cnt);
    }
    if (mass > 0.0) {
      g.parental_income /= mass;
      g.parental_education_years /= mass;
      g.gpa /= mass;
      g.female_share /= mass;
      g.peer_gpa_baseline /= mass;
      g.peer_gpa_counterfactual /= mass;
    }
    if (!opts.pooled_covariates) {
      g.mass = mass;
    } else {
      g.mass = mass;  // pooled: mass of ever-members
    }
  };

  fill_group(report.winners, [&](int i) { return static_cast<double>(wins[static_cast<std::size_t>(i)]); },
             cf_win);
  fill_group(report.losers,
             [&](int i) { return static_cast<double>(losses[static_cast<std::size_t>(i)]); }, cf_loss);
  fill_group(report.unaffected,
             [&](int i) {
               return static_cast<double>(reps - wins[static_cast<std::size_t>(i)] -
                                          losses[static_cast<std::size_t>(i)]);
             },
             cf_unaff);
  return report;
}

std::string winners_losers_table(const CounterfactualReport& report) {
  if (report.reps < 1 || report.per_rep.empty())
    throw std::runtime_error("empty counterfactual report");
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "statistic,unaffected,losers,winners\n";
  auto row = [&](const std::string& name, auto get) {
    out << name << ',' << get(report.unaffected) << ',' << get(report.losers) << ','
        << get(report.winners) << "\n";
  };
  row("mass", [](const GroupAverages& g) { return g.mass; });
  row("parental_income", [](const GroupAverages& g) { return g.parental_income; });
  row("parental_education_years",
      [](const GroupAverages& g) { return g.parental_education_years; });
  row("gpa", [](const GroupAverages& g) { return g.gpa; });
  row("female_share", [](const GroupAverages& g) { return g.female_share; });
  row("peer_gpa_baseline", [](const GroupAverages& g) { return g.peer_gpa_baseline; });
  row("peer_gpa_counterfactual",
      [](const GroupAverages& g) { return g.peer_gpa_counterfactual; });
  return out.str();
}

Panel simulate_panel(const PanelDgpConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> income_d(300.0, 100.0);
  std::normal_distribution<double> edu_d(13.0, 2.0);
  std::normal_distribution<double> gpa_d(0.0, 1.0);
  std::normal_distribution<double> muni_eff_d(0.0, cfg.muni_effect_sd);
  std::normal_distribution<double> year_eff_d(0.0, cfg.year_effect_sd);

  std::vector<double> muni_eff(static_cast<std::size_t>(cfg.n_municipalities));
  for (auto& v : muni_eff) v = muni_eff_d(rng);
  std::map<int, double> year_eff;
  for (int y : cfg.years) year_eff[y] = year_eff_d(rng);

  const bool subgroup_mode = !cfg.subgroup_manipulation_share.empty();

  Panel panel;
  long next_id = 0;
  for (int y : cfg.years) {
    const bool post = y >= cfg.first_post_year;
    for (int m = 0; m < cfg.n_municipalities; ++m) {
      const bool treated = m < cfg.treated_municipalities;
      for (int i = 0; i < cfg.students_per_muni_year; ++i) {
        PanelRecord r;
        r.student_id = next_id++;
        r.year = y;
        r.municipality = m;
        r.treated = treated ? 1 : 0;
        r.post = post ? 1 : 0;
        r.female = unit(rng) < 0.5;
        r.parental_income = income_d(rng);
        r.parental_education_years = edu_d(rng);
        r.gpa = gpa_d(rng);
        // Demand decreasing in municipality id, so treated municipalities
        // carry the top demand; supply runs the other way.
        r.muni_demand = 1.0 - static_cast<double>(m) / cfg.n_municipalities;
        r.muni_supply = 0.5 + 0.5 * static_cast<double>(m) / cfg.n_municipalities;

        double p = cfg.base_move_rate + muni_eff[static_cast<std::size_t>(m)] + year_eff[y];
        if (treated && post) {
          if (subgroup_mode) {
            Covariates cov;
            cov.female = r.female;
            cov.parental_income = *r.parental_income;
            cov.parental_education_years = *r.parental_education_years;
            const int cell = subgroup_of(cov, 300.0, 13.0);
            const auto it = cfg.subgroup_manipulation_share.find(cell);
            const double share = it != cfg.subgroup_manipulation_share.end() ? it->second : 0.0;
            // Extra manipulative moves sized so the manipulative share of
            // treated-post moves equals the planted value.
            p += cfg.base_move_rate * share / std::max(1e-12, 1.0 - share);
          } else {
            p += cfg.effect;
          }
        }
        r.moved = unit(rng) < std::clamp(p, 0.0, 1.0) ? 1 : 0;
        r.moved_placebo = unit(rng) < cfg.placebo_move_rate ? 1 : 0;
        panel.push_back(std::move(r));
      }
    }
  }
  return panel;
}

}  // namespace envymarket
