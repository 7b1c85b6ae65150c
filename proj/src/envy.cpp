#include "envymarket/envy.hpp"

#include <algorithm>

#include "envymarket/deception.hpp"

namespace envymarket {

namespace {

std::vector<double> school_load(const Economy& e, const MatchOutcome& m) {
  std::vector<double> load(static_cast<std::size_t>(e.n_schools()), 0.0);
  for (int i = 0; i < e.n_students(); ++i) {
    const int s = m.assignment[static_cast<std::size_t>(i)];
    if (s != kUnmatched)
      load[static_cast<std::size_t>(s)] += e.students[static_cast<std::size_t>(i)].weight;
  }
  return load;
}

double assigned_utility(const Economy& e, const MatchOutcome& m, int i) {
  const int s = m.assignment[static_cast<std::size_t>(i)];
  return s == kUnmatched ? 0.0
                         : e.students[static_cast<std::size_t>(i)].utilities[static_cast<std::size_t>(s)];
}

std::vector<EnvyRecord> envy_scan(const Economy& e, const MatchOutcome& m,
                                  double w_for_priority, EnvyKind kind) {
  std::vector<EnvyRecord> out;
  const std::vector<double> load = school_load(e, m);

  auto realized = [&](int i, int s) {
    const int a = m.chosen_action.empty() ? kNullAction
                                          : m.chosen_action[static_cast<std::size_t>(i)];
    return blend_priority(e, i, s, a, w_for_priority);
  };

  for (int i = 0; i < e.n_students(); ++i) {
    const double own = assigned_utility(e, m, i);
    for (int s = 0; s < e.n_schools(); ++s) {
      if (s == m.assignment[static_cast<std::size_t>(i)]) continue;
      const double v = e.students[static_cast<std::size_t>(i)].utilities[static_cast<std::size_t>(s)];
      if (!(v > own + kTieTol)) continue;  // must strictly prefer s
      const double cap = e.schools[static_cast<std::size_t>(s)].capacity;
      if (load[static_cast<std::size_t>(s)] < cap - kMassTol && cap > kMassTol) {
        out.push_back({i, -1, s, kind});  // vacant seat
        continue;
      }
      const double pi = realized(i, s);
      for (int j = 0; j < e.n_students(); ++j) {
        if (j == i || m.assignment[static_cast<std::size_t>(j)] != s) continue;
        if (pi > realized(j, s)) out.push_back({i, j, s, kind});
      }
    }
  }
  return out;
}

}  // namespace

std::vector<EnvyRecord> audit_justified_envy(const Economy& e,
                                             const MatchOutcome& m) {
  return envy_scan(e, m, e.w, EnvyKind::Justified);
}

std::vector<EnvyRecord> audit_invariant_justified_envy(const Economy& e,
                                                       const MatchOutcome& m) {
  return envy_scan(e, m, 0.0, EnvyKind::InvariantJustified);
}

EmpiricalEnvySummary audit_empirical_envy(const Economy& e,
                                          const std::vector<RankOrderList>& rols,
                                          const MatchOutcome& m,
                                          const std::set<int>& movers) {
  EmpiricalEnvySummary out;
  out.school_share.assign(static_cast<std::size_t>(e.n_schools()), 0.0);
  out.school_non_enrolled_mass.assign(static_cast<std::size_t>(e.n_schools()), 0.0);
  std::vector<double> school_envier_mass(static_cast<std::size_t>(e.n_schools()), 0.0);

  const std::vector<double> load = school_load(e, m);
  std::vector<double> first_listings(static_cast<std::size_t>(e.n_schools()), 0.0);
  for (int i = 0; i < e.n_students(); ++i)
    if (!rols[static_cast<std::size_t>(i)].empty())
      first_listings[static_cast<std::size_t>(rols[static_cast<std::size_t>(i)][0])] +=
          e.students[static_cast<std::size_t>(i)].weight;

  double envier_mass = 0.0;
  for (int i = 0; i < e.n_students(); ++i) {
    const auto& rol = rols[static_cast<std::size_t>(i)];
    if (rol.empty()) continue;
    const int s = rol[0];
    if (m.assignment[static_cast<std::size_t>(i)] == s) continue;  // enrolled at first choice
    const double wi = e.students[static_cast<std::size_t>(i)].weight;
    out.n_non_enrolled_mass += wi;
    out.school_non_enrolled_mass[static_cast<std::size_t>(s)] += wi;
    // Oversubscribed: listed first more often than enrolled.
    if (!(first_listings[static_cast<std::size_t>(s)] > load[static_cast<std::size_t>(s)] + kMassTol))
      continue;

    const double di = action_distance(e, i, kNullAction, s);
    bool any = false;
    for (int j : movers) {
      if (j == i || m.assignment[static_cast<std::size_t>(j)] != s) continue;
      const int aj = m.chosen_action[static_cast<std::size_t>(j)];
      if (aj == kNullAction) continue;
      const double dj_orig = action_distance(e, j, kNullAction, s);
      const double dj_new = action_distance(e, j, aj, s);
      if (di < dj_orig && di > dj_new) {
        out.records.push_back({i, j, s, EnvyKind::EmpiricalManipulation});
        any = true;
      }
    }
    if (any) {
      envier_mass += wi;
      school_envier_mass[static_cast<std::size_t>(s)] += wi;
    }
  }

  out.share_with_envy = out.n_non_enrolled_mass > 0.0 ? envier_mass / out.n_non_enrolled_mass : 0.0;
  for (int s = 0; s < e.n_schools(); ++s)
    out.school_share[static_cast<std::size_t>(s)] =
        out.school_non_enrolled_mass[static_cast<std::size_t>(s)] > 0.0
            ? school_envier_mass[static_cast<std::size_t>(s)] /
                  out.school_non_enrolled_mass[static_cast<std::size_t>(s)]
            : 0.0;
  return out;
}

}  // namespace envymarket
