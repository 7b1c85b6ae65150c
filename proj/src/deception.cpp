#include "envymarket/deception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace envymarket {

double blend_priority(const Economy& e, int student_idx, int school_idx,
                      int action_idx, double w) {
  const double manip =
      1.0 - std::min(action_distance(e, student_idx, action_idx, school_idx) / e.d_max, 1.0);
  const double exog =
      e.students[static_cast<std::size_t>(student_idx)].exog_priority[static_cast<std::size_t>(school_idx)];
  return w * manip + (1.0 - w) * exog;
}

double blend_priority(const Economy& e, int student_idx, int school_idx,
                      int action_idx) {
  return blend_priority(e, student_idx, school_idx, action_idx, e.w);
}

int entry_maximizing_action(const Economy& e, int student_idx, int school_idx,
                            double w) {
  const auto& st = e.students[static_cast<std::size_t>(student_idx)];
  int best = kNullAction;
  double best_p = blend_priority(e, student_idx, school_idx, kNullAction, w);
  for (int a = 1; a < static_cast<int>(st.actions.size()); ++a) {
    const double p = blend_priority(e, student_idx, school_idx, a, w);
    if (p > best_p + kTieTol) {
      best = a;
      best_p = p;
    }
  }
  return best;
}

int entry_maximizing_action(const Economy& e, int student_idx, int school_idx) {
  return entry_maximizing_action(e, student_idx, school_idx, e.w);
}

DemandDecision individual_demand(const Economy& e, int student_idx,
                                 const CutoffVector& cutoffs, double w,
                                 double gamma) {
  const auto& st = e.students[static_cast<std::size_t>(student_idx)];
  DemandDecision best;  // staying unmatched: net 0, null action

  for (int s = 0; s < e.n_schools(); ++s) {
    const double v = st.utilities[static_cast<std::size_t>(s)];
    const double cutoff = cutoffs.value_or(s, -std::numeric_limits<double>::infinity());
    const double p_clean = blend_priority(e, student_idx, s, kNullAction, w);

    DemandDecision cand;
    if (p_clean >= cutoff) {
      if (v <= 0.0) continue;
      cand = {s, false, kNullAction, v};
    } else {
      const int a_star = entry_maximizing_action(e, student_idx, s, w);
      if (blend_priority(e, student_idx, s, a_star, w) < cutoff) continue;
      if (v - gamma <= 0.0) continue;
      cand = {s, true, a_star, v - gamma};
    }
    // Strictly-higher net wins; at a tie, clean entry beats deception
    // entry (footnote tie rule), then the lower school index.
    if (cand.net_utility > best.net_utility + kTieTol) {
      best = cand;
    } else if (cand.net_utility > best.net_utility - kTieTol) {
      if (best.with_deception && !cand.with_deception) best = cand;
    }
  }
  return best;
}

DemandDecision individual_demand(const Economy& e, int student_idx,
                                 const CutoffVector& cutoffs) {
  return individual_demand(e, student_idx, cutoffs, e.w,
                           e.effective_gamma(student_idx));
}

bool optimal_deception(const Economy& e, int student_idx,
                       const CutoffVector& cutoffs, double w, double gamma) {
  return individual_demand(e, student_idx, cutoffs, w, gamma).with_deception;
}

bool optimal_deception(const Economy& e, int student_idx,
                       const CutoffVector& cutoffs) {
  return optimal_deception(e, student_idx, cutoffs, e.w,
                           e.effective_gamma(student_idx));
}

}  // namespace envymarket
