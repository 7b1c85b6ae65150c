#pragma once

#include "envymarket/core.hpp"

namespace envymarket {

// Realized priority of a student at a school under an action:
//   w * p_manip(a) + (1 - w) * p_exog
// where p_manip(a) = 1 - min(dist(a, school) / d_max, 1). The affine map
// keeps the distance ordering and pins p_manip to [0,1].
double blend_priority(const Economy& e, int student_idx, int school_idx,
                      int action_idx);
double blend_priority(const Economy& e, int student_idx, int school_idx,
                      int action_idx, double w);

// Action maximizing blend_priority at the school; ties break toward the
// null action, then the lowest index.
int entry_maximizing_action(const Economy& e, int student_idx, int school_idx);
int entry_maximizing_action(const Economy& e, int student_idx, int school_idx,
                            double w);

struct DemandDecision {
  int demanded_school = kUnmatched;  // school index or kUnmatched
  bool with_deception = false;
  int action_used = kNullAction;
  double net_utility = 0.0;
};

// Favorite school in net utility among the affordable ones; clean entry
// nets v, deception entry nets v - gamma, staying unmatched nets 0. A tie
// between deception entry at s and clean entry at s' resolves to the
// clean entry.
DemandDecision individual_demand(const Economy& e, int student_idx,
                                 const CutoffVector& cutoffs);
DemandDecision individual_demand(const Economy& e, int student_idx,
                                 const CutoffVector& cutoffs, double w,
                                 double gamma);

// The deception indicator of the demand decision.
bool optimal_deception(const Economy& e, int student_idx,
                       const CutoffVector& cutoffs);
bool optimal_deception(const Economy& e, int student_idx,
                       const CutoffVector& cutoffs, double w, double gamma);

}  // namespace envymarket
