#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "envymarket/core.hpp"
#include "envymarket/deception.hpp"

namespace envymarket {

struct AggregateDemand {
  std::vector<double> demand;     // mass per school index
  double deception_mass = 0.0;    // weight-sum of deception indicators
  std::vector<DemandDecision> decisions;  // per student index
};

AggregateDemand aggregate_demand(const Economy& e, const CutoffVector& cutoffs);
AggregateDemand aggregate_demand(const Economy& e, const CutoffVector& cutoffs,
                                 double w, double gamma);

struct ClearingCheck {
  bool clearing = false;
  double residual = 0.0;  // max violation in mass units
  std::vector<std::string> violations;
};

// D_s <= C_s everywhere and D_s = C_s at every finite cutoff, within tol.
ClearingCheck is_market_clearing(const Economy& e, const CutoffVector& cutoffs,
                                 double tol = kMassTol);

struct EquilibriumResult {
  CutoffVector cutoffs;
  std::vector<double> aggregate_demand;
  double aggregate_deception = 0.0;
  int iterations = 0;  // school-level cutoff updates
  bool converged = false;
  double residual = 0.0;
  int monotone_violations = 0;  // cutoff decreases between sweeps (diagnostic)
};

struct SolveOptions {
  double tol = kMassTol;
  int max_iter = -1;          // default 10 * |S| * N school updates
  bool jacobi = false;        // simultaneous updates instead of Gauss-Seidel
  bool has_start = false;
  CutoffVector start;         // initial cutoffs when has_start
};

// Fixed-point iteration on cutoffs: raise each oversubscribed school to
// the capacity-th highest realized priority among its demanders, drop to
// unconstrained when undersubscribed at a finite cutoff.
EquilibriumResult solve_equilibrium(const Economy& e, std::uint64_t seed,
                                    const SolveOptions& opts = {});

struct MultistartResult {
  std::vector<EquilibriumResult> runs;
  bool agree = false;          // component-wise within 10 * tol
  double max_disagreement = 0.0;
};

// Uniqueness diagnostic: solve from k random interior cutoff starts plus
// the all-unconstrained start.
MultistartResult multistart_equilibrium(const Economy& e, std::uint64_t seed,
                                        int starts,
                                        const SolveOptions& opts = {});

struct Decomposition {
  double total = 0.0;
  double direct = 0.0;               // cutoffs frozen at the baseline
  double general_equilibrium = 0.0;  // total - direct
};

enum class Parameter { W, Gamma };

// Forward finite-difference decomposition of d(aggregate deception)/d(param).
// Default steps: h = 0.05 for w, h = 0.05 * gamma for gamma.
Decomposition decompose_comparative_statics(const Economy& e, Parameter param,
                                            double h = 0.0,
                                            std::uint64_t seed = 0);

}  // namespace envymarket
