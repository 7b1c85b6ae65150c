#include "envymarket/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "envymarket/deception.hpp"
#include "envymarket/rng.hpp"

namespace envymarket {

double Economy::total_mass() const {
  double m = 0.0;
  for (const auto& st : students) m += st.weight;
  return m;
}

double Economy::effective_gamma(int student_idx) const {
  const auto& st = students[static_cast<std::size_t>(student_idx)];
  return st.gamma_override.value_or(gamma);
}

int Economy::school_index(int school_id) const {
  for (int s = 0; s < n_schools(); ++s)
    if (schools[static_cast<std::size_t>(s)].id == school_id) return s;
  return -1;
}

int Economy::student_index(int student_id) const {
  for (int i = 0; i < n_students(); ++i)
    if (students[static_cast<std::size_t>(i)].id == student_id) return i;
  return -1;
}

double action_distance(const Economy& e, int student_idx, int action_idx,
                       int school_idx) {
  if (e.metric == DistanceMetric::TimeMatrix) {
    return e.time_matrix[static_cast<std::size_t>(student_idx)]
                        [static_cast<std::size_t>(action_idx)]
                        [static_cast<std::size_t>(school_idx)];
  }
  const Address& a =
      e.students[static_cast<std::size_t>(student_idx)].actions[static_cast<std::size_t>(action_idx)];
  const Address& loc = e.schools[static_cast<std::size_t>(school_idx)].location;
  return std::hypot(a.x - loc.x, a.y - loc.y);
}

namespace {

bool finite_address(const Address& a) {
  return std::isfinite(a.x) && std::isfinite(a.y);
}

}  // namespace

std::vector<std::string> validate_economy(const Economy& e) {
  std::vector<std::string> out;
  auto bad = [&out](const std::string& entity, const std::string& rule) {
    out.push_back(entity + ": " + rule);
  };

  if (!(e.w >= 0.0 && e.w <= 1.0)) bad("economy", "w out of [0,1]");
  if (!(e.gamma > 0.0)) bad("economy", "gamma must be > 0");
  if (!(e.d_max > 0.0)) bad("economy", "d_max must be > 0");
  if (e.total_mass() <= 0.0) bad("economy", "total student mass must be > 0");

  std::unordered_map<int, int> school_ids, student_ids;
  for (const auto& s : e.schools) {
    if (++school_ids[s.id] > 1) bad("school " + std::to_string(s.id), "duplicate id");
    if (!(s.capacity >= 0.0)) bad("school " + std::to_string(s.id), "capacity must be >= 0");
    if (!finite_address(s.location)) bad("school " + std::to_string(s.id), "non-finite location");
  }

  const auto ns = static_cast<std::size_t>(e.n_schools());
  for (int i = 0; i < e.n_students(); ++i) {
    const auto& st = e.students[static_cast<std::size_t>(i)];
    const std::string who = "student " + std::to_string(st.id);
    if (++student_ids[st.id] > 1) bad(who, "duplicate id");
    if (!(st.weight > 0.0)) bad(who, "weight must be > 0");
    if (st.actions.size() < 2) bad(who, "|actions| < 2");
    for (const auto& a : st.actions)
      if (!finite_address(a)) { bad(who, "non-finite action address"); break; }
    if (st.utilities.size() != ns) bad(who, "utilities must cover every school");
    if (st.exog_priority.size() != ns) bad(who, "exog_priority must cover every school");
    if (st.gamma_override && !(*st.gamma_override > 0.0)) bad(who, "gamma_override must be > 0");

    for (std::size_t s = 0; s < std::min(st.exog_priority.size(), ns); ++s) {
      const double p = st.exog_priority[s];
      if (!(p >= 0.0 && p <= 1.0)) { bad(who, "exog_priority out of [0,1]"); break; }
    }
    // Strict ordinal preferences, including against the unmatched option.
    const std::size_t nu = std::min(st.utilities.size(), ns);
    bool tied = false;
    for (std::size_t a = 0; a < nu && !tied; ++a) {
      if (!std::isfinite(st.utilities[a])) { bad(who, "non-finite utility"); break; }
      if (std::abs(st.utilities[a]) <= kTieTol) tied = true;
      for (std::size_t b = a + 1; b < nu && !tied; ++b)
        if (std::abs(st.utilities[a] - st.utilities[b]) <= kTieTol) tied = true;
    }
    if (tied) bad(who, "ordinal preferences not strict");
  }
  return out;
}

bool check_feasibility(const Economy& e, const MatchOutcome& m) {
  if (m.assignment.size() != static_cast<std::size_t>(e.n_students())) return false;
  std::vector<double> load(static_cast<std::size_t>(e.n_schools()), 0.0);
  for (int i = 0; i < e.n_students(); ++i) {
    const int s = m.assignment[static_cast<std::size_t>(i)];
    if (s == kUnmatched) continue;
    if (s < 0 || s >= e.n_schools()) return false;
    load[static_cast<std::size_t>(s)] += e.students[static_cast<std::size_t>(i)].weight;
  }
  for (int s = 0; s < e.n_schools(); ++s)
    if (load[static_cast<std::size_t>(s)] > e.schools[static_cast<std::size_t>(s)].capacity + kMassTol)
      return false;
  return true;
}

CutoffVector cutoffs_of_matching(const Economy& e, const MatchOutcome& m) {
  if (!check_feasibility(e, m)) throw std::runtime_error("infeasible matching");

  // Realized priority under the chosen action.
  auto realized = [&](int i, int s) {
    const int a = m.chosen_action.empty() ? kNullAction : m.chosen_action[static_cast<std::size_t>(i)];
    return blend_priority(e, i, s, a);
  };

  CutoffVector out = CutoffVector::unconstrained(e.n_schools());
  std::vector<double> load(static_cast<std::size_t>(e.n_schools()), 0.0);
  std::vector<double> min_p(static_cast<std::size_t>(e.n_schools()),
                            std::numeric_limits<double>::infinity());
  for (int i = 0; i < e.n_students(); ++i) {
    const int s = m.assignment[static_cast<std::size_t>(i)];
    if (s == kUnmatched) continue;
    load[static_cast<std::size_t>(s)] += e.students[static_cast<std::size_t>(i)].weight;
    min_p[static_cast<std::size_t>(s)] = std::min(min_p[static_cast<std::size_t>(s)], realized(i, s));
  }
  for (int s = 0; s < e.n_schools(); ++s) {
    if (load[static_cast<std::size_t>(s)] <
        e.schools[static_cast<std::size_t>(s)].capacity - kMassTol)
      continue;  // slack seat: unconstrained
    if (load[static_cast<std::size_t>(s)] > 0.0)
      out.p[static_cast<std::size_t>(s)] = min_p[static_cast<std::size_t>(s)];
    else if (e.schools[static_cast<std::size_t>(s)].capacity <= kMassTol)
      out.p[static_cast<std::size_t>(s)] = 1.0;  // zero-capacity school admits nobody
  }
  return out;
}

std::vector<double> tie_break_lottery(const Economy& e, std::uint64_t seed) {
  std::vector<double> u(static_cast<std::size_t>(e.n_students()));
  for (int i = 0; i < e.n_students(); ++i)
    u[static_cast<std::size_t>(i)] =
        keyed_uniform(seed, static_cast<std::uint64_t>(e.students[static_cast<std::size_t>(i)].id));
  return u;
}

}  // namespace envymarket
