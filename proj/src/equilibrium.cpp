#include "envymarket/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "envymarket/rng.hpp"

namespace envymarket {

AggregateDemand aggregate_demand(const Economy& e, const CutoffVector& cutoffs,
                                 double w, double gamma) {
  AggregateDemand out;
  out.demand.assign(static_cast<std::size_t>(e.n_schools()), 0.0);
  out.decisions.resize(static_cast<std::size_t>(e.n_students()));
  // Fixed summation order by student index keeps the reduction deterministic.
  for (int i = 0; i < e.n_students(); ++i) {
    const DemandDecision d = individual_demand(e, i, cutoffs, w, gamma);
    out.decisions[static_cast<std::size_t>(i)] = d;
    if (d.demanded_school != kUnmatched)
      out.demand[static_cast<std::size_t>(d.demanded_school)] +=
          e.students[static_cast<std::size_t>(i)].weight;
    if (d.with_deception) out.deception_mass += e.students[static_cast<std::size_t>(i)].weight;
  }
  return out;
}

AggregateDemand aggregate_demand(const Economy& e, const CutoffVector& cutoffs) {
  AggregateDemand out;
  out.demand.assign(static_cast<std::size_t>(e.n_schools()), 0.0);
  out.decisions.resize(static_cast<std::size_t>(e.n_students()));
  for (int i = 0; i < e.n_students(); ++i) {
    const DemandDecision d = individual_demand(e, i, cutoffs);
    out.decisions[static_cast<std::size_t>(i)] = d;
    if (d.demanded_school != kUnmatched)
      out.demand[static_cast<std::size_t>(d.demanded_school)] +=
          e.students[static_cast<std::size_t>(i)].weight;
    if (d.with_deception) out.deception_mass += e.students[static_cast<std::size_t>(i)].weight;
  }
  return out;
}

ClearingCheck is_market_clearing(const Economy& e, const CutoffVector& cutoffs,
                                 double tol) {
  ClearingCheck out;
  const AggregateDemand agg = aggregate_demand(e, cutoffs);
  double worst = 0.0;
  for (int s = 0; s < e.n_schools(); ++s) {
    const double d = agg.demand[static_cast<std::size_t>(s)];
    const double c = e.schools[static_cast<std::size_t>(s)].capacity;
    if (d > c + tol) {
      worst = std::max(worst, d - c);
      out.violations.push_back("school " + std::to_string(e.schools[static_cast<std::size_t>(s)].id) +
                               ": demand exceeds capacity");
    }
    if (!cutoffs.is_unconstrained(s) && std::abs(d - c) > tol) {
      worst = std::max(worst, std::abs(d - c));
      out.violations.push_back("school " + std::to_string(e.schools[static_cast<std::size_t>(s)].id) +
                               ": finite cutoff but demand != capacity");
    }
  }
  out.residual = worst;
  out.clearing = out.violations.empty();
  return out;
}

namespace {

// Cutoff clearing school s in isolation: the realized priority of the
// demander at which cumulative mass reaches capacity (boundary admitted
// fully). Returns nullopt when demand fits.
std::optional<double> clearing_cutoff(const Economy& e, const AggregateDemand& agg,
                                      int s, const std::vector<double>& lottery,
                                      double tol) {
  const double cap = e.schools[static_cast<std::size_t>(s)].capacity;
  double demand = agg.demand[static_cast<std::size_t>(s)];
  if (demand <= cap + tol) return std::nullopt;

  struct Entry {
    double p, lot, weight;
  };
  std::vector<Entry> entries;
  for (int i = 0; i < e.n_students(); ++i) {
    const auto& d = agg.decisions[static_cast<std::size_t>(i)];
    if (d.demanded_school != s) continue;
    entries.push_back({blend_priority(e, i, s, d.action_used),
                       lottery[static_cast<std::size_t>(i)],
                       e.students[static_cast<std::size_t>(i)].weight});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.p != b.p) return a.p > b.p;
    return a.lot > b.lot;
  });
  double used = 0.0;
  for (const auto& en : entries) {
    used += en.weight;
    if (used >= cap - tol) return en.p;
  }
  return entries.empty() ? std::nullopt : std::optional<double>(entries.back().p);
}

}  // namespace

EquilibriumResult solve_equilibrium(const Economy& e, std::uint64_t seed,
                                    const SolveOptions& opts) {
  const int n_schools = e.n_schools();
  const std::vector<double> lottery = tie_break_lottery(e, seed);
  const int max_iter =
      opts.max_iter > 0 ? opts.max_iter : 10 * std::max(1, n_schools) * std::max(1, e.n_students());

  EquilibriumResult res;
  res.cutoffs = opts.has_start ? opts.start : CutoffVector::unconstrained(n_schools);

  // Warm starts in the interior can cycle (relax/re-constrain oscillation);
  // the sweep from the slack state is the reliable one, so fall back to it
  // once if a warm start burns half the budget without clearing.
  bool restarted = !opts.has_start;

  while (res.iterations < max_iter) {
    const CutoffVector before = res.cutoffs;

    if (opts.jacobi) {
      const AggregateDemand agg = aggregate_demand(e, res.cutoffs);
      CutoffVector next = res.cutoffs;
      for (int s = 0; s < n_schools; ++s) {
        const auto target = clearing_cutoff(e, agg, s, lottery, opts.tol);
        if (target) {
          next.p[static_cast<std::size_t>(s)] = *target;
        } else if (!res.cutoffs.is_unconstrained(s) &&
                   agg.demand[static_cast<std::size_t>(s)] <
                       e.schools[static_cast<std::size_t>(s)].capacity - opts.tol) {
          next.p[static_cast<std::size_t>(s)] = std::nullopt;
        }
        ++res.iterations;
      }
      res.cutoffs = next;
    } else {
      for (int s = 0; s < n_schools; ++s) {  // Gauss-Seidel in school id order
        const AggregateDemand agg = aggregate_demand(e, res.cutoffs);
        const auto target = clearing_cutoff(e, agg, s, lottery, opts.tol);
        if (target) {
          res.cutoffs.p[static_cast<std::size_t>(s)] = *target;
        } else if (!res.cutoffs.is_unconstrained(s) &&
                   agg.demand[static_cast<std::size_t>(s)] <
                       e.schools[static_cast<std::size_t>(s)].capacity - opts.tol) {
          res.cutoffs.p[static_cast<std::size_t>(s)] = std::nullopt;
        }
        ++res.iterations;
      }
    }

    for (int s = 0; s < n_schools; ++s) {
      const bool was = before.is_unconstrained(s), now = res.cutoffs.is_unconstrained(s);
      if ((!was && now) ||
          (!was && !now && *res.cutoffs.p[static_cast<std::size_t>(s)] <
                               *before.p[static_cast<std::size_t>(s)] - kTieTol))
        ++res.monotone_violations;
    }

    const ClearingCheck check = is_market_clearing(e, res.cutoffs, opts.tol);
    res.residual = check.residual;
    if (check.clearing) {
      res.converged = true;
      break;
    }
    // Stalled: no cutoff moved but still not clearing.
    bool moved = false;
    for (int s = 0; s < n_schools && !moved; ++s) {
      const bool was = before.is_unconstrained(s), now = res.cutoffs.is_unconstrained(s);
      if (was != now) moved = true;
      else if (!was && *before.p[static_cast<std::size_t>(s)] !=
                           *res.cutoffs.p[static_cast<std::size_t>(s)])
        moved = true;
    }
    if ((!moved || res.iterations >= max_iter / 2) && !restarted) {
      res.cutoffs = CutoffVector::unconstrained(n_schools);
      restarted = true;
      continue;
    }
    if (!moved) break;
  }

  const AggregateDemand agg = aggregate_demand(e, res.cutoffs);
  res.aggregate_demand = agg.demand;
  res.aggregate_deception = agg.deception_mass;
  if (!res.converged) res.residual = is_market_clearing(e, res.cutoffs, opts.tol).residual;
  return res;
}

MultistartResult multistart_equilibrium(const Economy& e, std::uint64_t seed,
                                        int starts, const SolveOptions& opts) {
  MultistartResult out;
  out.runs.push_back(solve_equilibrium(e, seed, opts));
  for (int k = 0; k < starts; ++k) {
    SolveOptions o = opts;
    o.has_start = true;
    o.start = CutoffVector::unconstrained(e.n_schools());
    for (int s = 0; s < e.n_schools(); ++s)
      o.start.p[static_cast<std::size_t>(s)] =
          keyed_uniform(derive_seed(seed, 7000 + static_cast<std::uint64_t>(k)),
                        static_cast<std::uint64_t>(s));
    out.runs.push_back(solve_equilibrium(e, seed, o));
  }

  out.agree = true;
  const double band = 10.0 * opts.tol;
  for (const auto& run : out.runs) {
    if (!run.converged) out.agree = false;
    for (int s = 0; s < e.n_schools(); ++s) {
      const auto& a = out.runs.front().cutoffs.p[static_cast<std::size_t>(s)];
      const auto& b = run.cutoffs.p[static_cast<std::size_t>(s)];
      if (a.has_value() != b.has_value()) {
        out.agree = false;
        out.max_disagreement = std::max(out.max_disagreement, 1.0);
      } else if (a && b) {
        const double gap = std::abs(*a - *b);
        out.max_disagreement = std::max(out.max_disagreement, gap);
        if (gap > band) out.agree = false;
      }
    }
  }
  return out;
}

Decomposition decompose_comparative_statics(const Economy& e, Parameter param,
                                            double h, std::uint64_t seed) {
  if (h <= 0.0) h = param == Parameter::W ? 0.05 : 0.05 * e.gamma;

  Economy bumped = e;
  if (param == Parameter::W) {
    if (e.w + h > 1.0) throw std::runtime_error("w + h leaves [0,1]");
    bumped.w = e.w + h;
  } else {
    bumped.gamma = e.gamma + h;
  }

  const EquilibriumResult base = solve_equilibrium(e, seed);
  if (!base.converged) throw std::runtime_error("equilibrium solve failed at baseline");
  const EquilibriumResult shifted = solve_equilibrium(bumped, seed);
  if (!shifted.converged) throw std::runtime_error("equilibrium solve failed at shifted parameter");

  const double x0 = base.aggregate_deception;
  const double x1 = shifted.aggregate_deception;
  // Cutoffs frozen at the baseline equilibrium.
  const double x1_frozen = aggregate_demand(bumped, base.cutoffs).deception_mass;

  Decomposition d;
  d.total = (x1 - x0) / h;
  d.direct = (x1_frozen - x0) / h;
  d.general_equilibrium = d.total - d.direct;
  return d;
}

}  // namespace envymarket
