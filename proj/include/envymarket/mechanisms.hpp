#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "envymarket/core.hpp"

namespace envymarket {

// Ordered school indices; no duplicates. Students without a list stay
// unmatched, and unlisted schools are never assigned.
using RankOrderList = std::vector<int>;

// The rank order list induced by a student's utilities: positive-utility
// schools in descending utility, optionally capped (Danish cap is 5).
RankOrderList true_rol(const Economy& e, int student_idx, int cap = -1);

// Student-proposing deferred acceptance over realized priorities.
// Priority ties break by a lottery keyed on (economy, seed).
MatchOutcome run_da(const Economy& e, const std::vector<RankOrderList>& rols,
                    const std::vector<int>& actions, std::uint64_t seed);

// Immediate acceptance: round-r admissions are permanent; within a round
// schools admit in descending realized priority up to remaining capacity.
MatchOutcome run_ia(const Economy& e, const std::vector<RankOrderList>& rols,
                    const std::vector<int>& actions, std::uint64_t seed);

MatchOutcome run_mechanism(Mechanism mech, const Economy& e,
                           const std::vector<RankOrderList>& rols,
                           const std::vector<int>& actions, std::uint64_t seed);

struct MisreportWitness {
  int student_idx = -1;
  RankOrderList truthful;
  RankOrderList misreport;
  double gain = 0.0;
};

// Exhaustive search for a profitable preference misreport (all ordered
// sublists, every student, actions held fixed at null). Throws when the
// instance exceeds max_students students or 4 schools.
std::optional<MisreportWitness> find_misreport_witness(const Economy& e,
                                                       Mechanism mech,
                                                       int max_students,
                                                       std::uint64_t seed = 0);

struct DeceptionWitness {
  int student_idx = -1;
  int action_idx = kNullAction;
  double gain = 0.0;  // net of the deception cost
};

// Search for a student who strictly gains (net of gamma) by switching
// from the null action, truthful reports all around.
std::optional<DeceptionWitness> find_deception_witness(const Economy& e,
                                                       Mechanism mech,
                                                       std::uint64_t seed = 0);

}  // namespace envymarket
