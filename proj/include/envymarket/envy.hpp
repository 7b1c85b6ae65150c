#pragma once

#include <set>
#include <vector>

#include "envymarket/core.hpp"
#include "envymarket/mechanisms.hpp"

namespace envymarket {

enum class EnvyKind { Justified, InvariantJustified, EmpiricalManipulation };

struct EnvyRecord {
  int envier = -1;          // student index
  int envied = -1;          // student index, or -1 for vacant-seat envy
  int school = -1;          // school index
  EnvyKind kind = EnvyKind::Justified;
};

// (i, j, s) where i prefers s to its assignment, j is assigned to s and
// i's realized priority at s strictly exceeds j's; vacant-seat envy is
// flagged with envied = -1.
std::vector<EnvyRecord> audit_justified_envy(const Economy& e,
                                             const MatchOutcome& m);

// Same scan with priorities recomputed at w = 0 (pure exogenous
// component), regardless of the actions taken.
std::vector<EnvyRecord> audit_invariant_justified_envy(const Economy& e,
                                                       const MatchOutcome& m);

struct EmpiricalEnvySummary {
  std::vector<EnvyRecord> records;
  double share_with_envy = 0.0;     // among non-first-choice-enrolled students
  double n_non_enrolled_mass = 0.0;
  // Per-school shares, keyed by the envier's first-listed school.
  std::vector<double> school_share;
  std::vector<double> school_non_enrolled_mass;
};

// The distance-triple audit: a student not enrolled at its oversubscribed
// first choice envies an admitted mover who started farther away but
// ended up closer. Oversubscription compares first listings to enrolled
// mass.
EmpiricalEnvySummary audit_empirical_envy(const Economy& e,
                                          const std::vector<RankOrderList>& rols,
                                          const MatchOutcome& m,
                                          const std::set<int>& movers);

}  // namespace envymarket
