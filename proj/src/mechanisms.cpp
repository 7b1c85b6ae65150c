#include "envymarket/mechanisms.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "envymarket/deception.hpp"

namespace envymarket {

namespace {

struct Applicant {
  int student = -1;
  double priority = 0.0;
  double lottery = 0.0;
};

// Descending realized priority, lottery as the strict tie-break.
bool beats(const Applicant& a, const Applicant& b) {
  if (a.priority != b.priority) return a.priority > b.priority;
  if (a.lottery != b.lottery) return a.lottery > b.lottery;
  return a.student < b.student;
}

MatchOutcome make_outcome(const Economy& e, Mechanism mech,
                          const std::vector<int>& actions, std::uint64_t seed) {
  MatchOutcome m;
  m.assignment.assign(static_cast<std::size_t>(e.n_students()), kUnmatched);
  m.chosen_action = actions;
  m.deceived.resize(static_cast<std::size_t>(e.n_students()));
  for (int i = 0; i < e.n_students(); ++i)
    m.deceived[static_cast<std::size_t>(i)] = actions[static_cast<std::size_t>(i)] != kNullAction;
  m.mechanism = mech;
  m.seed = seed;
  return m;
}

}  // namespace

RankOrderList true_rol(const Economy& e, int student_idx, int cap) {
  const auto& st = e.students[static_cast<std::size_t>(student_idx)];
  RankOrderList rol;
  for (int s = 0; s < e.n_schools(); ++s)
    if (st.utilities[static_cast<std::size_t>(s)] > 0.0) rol.push_back(s);
  std::sort(rol.begin(), rol.end(), [&](int a, int b) {
    return st.utilities[static_cast<std::size_t>(a)] > st.utilities[static_cast<std::size_t>(b)];
  });
  if (cap >= 0 && static_cast<int>(rol.size()) > cap) rol.resize(static_cast<std::size_t>(cap));
  return rol;
}

MatchOutcome run_da(const Economy& e, const std::vector<RankOrderList>& rols,
                    const std::vector<int>& actions, std::uint64_t seed) {
  MatchOutcome m = make_outcome(e, Mechanism::DA, actions, seed);
  const std::vector<double> lottery = tie_break_lottery(e, seed);

  std::vector<int> next(static_cast<std::size_t>(e.n_students()), 0);
  std::vector<int> held_at(static_cast<std::size_t>(e.n_students()), kUnmatched);
  // held[s] kept sorted best-first.
  std::vector<std::vector<Applicant>> held(static_cast<std::size_t>(e.n_schools()));

  for (;;) {
    // Every unheld student with list remaining proposes to its next choice.
    std::vector<std::vector<Applicant>> proposals(static_cast<std::size_t>(e.n_schools()));
    bool any = false;
    for (int i = 0; i < e.n_students(); ++i) {
      if (held_at[static_cast<std::size_t>(i)] != kUnmatched) continue;
      const auto& rol = rols[static_cast<std::size_t>(i)];
      if (next[static_cast<std::size_t>(i)] >= static_cast<int>(rol.size())) continue;
      const int s = rol[static_cast<std::size_t>(next[static_cast<std::size_t>(i)]++)];
      proposals[static_cast<std::size_t>(s)].push_back(
          {i, blend_priority(e, i, s, actions[static_cast<std::size_t>(i)]),
           lottery[static_cast<std::size_t>(i)]});
      any = true;
    }
    if (!any) break;

    for (int s = 0; s < e.n_schools(); ++s) {
      if (proposals[static_cast<std::size_t>(s)].empty()) continue;
      auto& pool = held[static_cast<std::size_t>(s)];
      pool.insert(pool.end(), proposals[static_cast<std::size_t>(s)].begin(),
                  proposals[static_cast<std::size_t>(s)].end());
      std::sort(pool.begin(), pool.end(), beats);
      const double cap = e.schools[static_cast<std::size_t>(s)].capacity;
      double used = 0.0;
      std::size_t keep = 0;
      while (keep < pool.size() &&
             used + e.students[static_cast<std::size_t>(pool[keep].student)].weight <=
                 cap + kMassTol) {
        used += e.students[static_cast<std::size_t>(pool[keep].student)].weight;
        ++keep;
      }
      for (std::size_t k = keep; k < pool.size(); ++k)
        held_at[static_cast<std::size_t>(pool[k].student)] = kUnmatched;
      pool.resize(keep);
      for (const auto& a : pool) held_at[static_cast<std::size_t>(a.student)] = s;
    }
  }

  m.assignment = held_at;
  m.cutoffs = cutoffs_of_matching(e, m);
  return m;
}

MatchOutcome run_ia(const Economy& e, const std::vector<RankOrderList>& rols,
                    const std::vector<int>& actions, std::uint64_t seed) {
  MatchOutcome m = make_outcome(e, Mechanism::IA, actions, seed);
  const std::vector<double> lottery = tie_break_lottery(e, seed);

  std::vector<double> remaining(static_cast<std::size_t>(e.n_schools()));
  for (int s = 0; s < e.n_schools(); ++s)
    remaining[static_cast<std::size_t>(s)] = e.schools[static_cast<std::size_t>(s)].capacity;

  std::size_t max_rounds = 0;
  for (const auto& rol : rols) max_rounds = std::max(max_rounds, rol.size());

  for (std::size_t round = 0; round < max_rounds; ++round) {
    std::vector<std::vector<Applicant>> applicants(static_cast<std::size_t>(e.n_schools()));
    for (int i = 0; i < e.n_students(); ++i) {
      if (m.assignment[static_cast<std::size_t>(i)] != kUnmatched) continue;
      const auto& rol = rols[static_cast<std::size_t>(i)];
      if (round >= rol.size()) continue;
      const int s = rol[round];
      applicants[static_cast<std::size_t>(s)].push_back(
          {i, blend_priority(e, i, s, actions[static_cast<std::size_t>(i)]),
           lottery[static_cast<std::size_t>(i)]});
    }
    for (int s = 0; s < e.n_schools(); ++s) {
      auto& pool = applicants[static_cast<std::size_t>(s)];
      std::sort(pool.begin(), pool.end(), beats);
      for (const auto& a : pool) {
        const double wgt = e.students[static_cast<std::size_t>(a.student)].weight;
        if (wgt <= remaining[static_cast<std::size_t>(s)] + kMassTol) {
          m.assignment[static_cast<std::size_t>(a.student)] = s;
          remaining[static_cast<std::size_t>(s)] -= wgt;
        }
      }
    }
  }
  m.cutoffs = cutoffs_of_matching(e, m);
  return m;
}

MatchOutcome run_mechanism(Mechanism mech, const Economy& e,
                           const std::vector<RankOrderList>& rols,
                           const std::vector<int>& actions, std::uint64_t seed) {
  return mech == Mechanism::DA ? run_da(e, rols, actions, seed)
                               : run_ia(e, rols, actions, seed);
}

namespace {

// All ordered sublists (including the empty list) of schools 0..n-1.
void enumerate_rols(int n_schools, RankOrderList& cur, std::vector<bool>& used,
                    std::vector<RankOrderList>& out) {
  out.push_back(cur);
  for (int s = 0; s < n_schools; ++s) {
    if (used[static_cast<std::size_t>(s)]) continue;
    used[static_cast<std::size_t>(s)] = true;
    cur.push_back(s);
    enumerate_rols(n_schools, cur, used, out);
    cur.pop_back();
    used[static_cast<std::size_t>(s)] = false;
  }
}

double assigned_utility(const Economy& e, const MatchOutcome& m, int i) {
  const int s = m.assignment[static_cast<std::size_t>(i)];
  return s == kUnmatched ? 0.0 : e.students[static_cast<std::size_t>(i)].utilities[static_cast<std::size_t>(s)];
}

}  // namespace

std::optional<MisreportWitness> find_misreport_witness(const Economy& e,
                                                       Mechanism mech,
                                                       int max_students,
                                                       std::uint64_t seed) {
  if (e.n_students() > max_students || e.n_schools() > 4)
    throw std::runtime_error("search space cap exceeded");

  std::vector<RankOrderList> truthful(static_cast<std::size_t>(e.n_students()));
  for (int i = 0; i < e.n_students(); ++i) truthful[static_cast<std::size_t>(i)] = true_rol(e, i);
  const std::vector<int> actions(static_cast<std::size_t>(e.n_students()), kNullAction);

  std::vector<RankOrderList> all;
  RankOrderList cur;
  std::vector<bool> used(static_cast<std::size_t>(e.n_schools()), false);
  enumerate_rols(e.n_schools(), cur, used, all);
  std::sort(all.begin(), all.end());  // merge order: lexicographic ROL

  const MatchOutcome base = run_mechanism(mech, e, truthful, actions, seed);
  for (int i = 0; i < e.n_students(); ++i) {
    const double u0 = assigned_utility(e, base, i);
    for (const auto& alt : all) {
      if (alt == truthful[static_cast<std::size_t>(i)]) continue;
      std::vector<RankOrderList> rols = truthful;
      rols[static_cast<std::size_t>(i)] = alt;
      const MatchOutcome m = run_mechanism(mech, e, rols, actions, seed);
      const double u1 = assigned_utility(e, m, i);
      if (u1 > u0 + kTieTol)
        return MisreportWitness{i, truthful[static_cast<std::size_t>(i)], alt, u1 - u0};
    }
  }
  return std::nullopt;
}

std::optional<DeceptionWitness> find_deception_witness(const Economy& e,
                                                       Mechanism mech,
                                                       std::uint64_t seed) {
  std::vector<RankOrderList> truthful(static_cast<std::size_t>(e.n_students()));
  for (int i = 0; i < e.n_students(); ++i) truthful[static_cast<std::size_t>(i)] = true_rol(e, i);
  std::vector<int> actions(static_cast<std::size_t>(e.n_students()), kNullAction);

  const MatchOutcome base = run_mechanism(mech, e, truthful, actions, seed);
  for (int i = 0; i < e.n_students(); ++i) {
    const double u0 = assigned_utility(e, base, i);
    const int n_actions = static_cast<int>(e.students[static_cast<std::size_t>(i)].actions.size());
    for (int a = 1; a < n_actions; ++a) {
      actions[static_cast<std::size_t>(i)] = a;
      const MatchOutcome m = run_mechanism(mech, e, truthful, actions, seed);
      const double u1 = assigned_utility(e, m, i) - e.effective_gamma(i);
      if (u1 > u0 + kTieTol) return DeceptionWitness{i, a, u1 - u0};
    }
    actions[static_cast<std::size_t>(i)] = kNullAction;
  }
  return std::nullopt;
}

}  // namespace envymarket
