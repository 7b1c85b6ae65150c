#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace envymarket {

// Tolerance under which two utilities count as tied (strict preferences
// are enforced at this scale).
inline constexpr double kTieTol = 1e-12;

// Mass tolerance for feasibility / market clearing checks.
inline constexpr double kMassTol = 1e-9;

inline constexpr int kUnmatched = -1;
inline constexpr int kNullAction = 0;

struct Address {
  double x = 0.0;  // km
  double y = 0.0;  // km
};

struct School {
  int id = 0;
  double capacity = 0.0;  // seat count in finite mode, mass otherwise
  Address location;
};

struct Covariates {
  int cohort_year = 0;
  int municipality = 0;
  bool treated = false;
  bool post = false;
  double parental_income = 0.0;
  double gpa = 0.0;
  bool female = false;
  double parental_education_years = 0.0;
};

struct Student {
  int id = 0;
  double weight = 1.0;
  std::vector<double> utilities;       // by school index; unmatched is 0
  std::vector<double> exog_priority;   // by school index, in [0,1]
  std::vector<Address> actions;        // actions[0] is the null action
  std::optional<double> gamma_override;  // regional deception-cost regimes
  Covariates cov;
};

enum class DistanceMetric { Euclidean, TimeMatrix };

struct Economy {
  std::vector<Student> students;
  std::vector<School> schools;
  double w = 0.0;       // manipulability weight, in [0,1]
  double gamma = 1.0;   // deception cost, > 0
  double d_max = 1.0;   // distance normalization, > 0
  DistanceMetric metric = DistanceMetric::Euclidean;
  // time_matrix[student][action][school]; only used with TimeMatrix.
  std::vector<std::vector<std::vector<double>>> time_matrix;

  int n_students() const { return static_cast<int>(students.size()); }
  int n_schools() const { return static_cast<int>(schools.size()); }
  double total_mass() const;
  double effective_gamma(int student_idx) const;
  int school_index(int school_id) const;   // -1 when unknown
  int student_index(int student_id) const; // -1 when unknown
};

// Distance between a student's action address and a school, in the
// economy's metric.
double action_distance(const Economy& e, int student_idx, int action_idx,
                       int school_idx);

// Per-school cutoff; nullopt is the unconstrained (-inf) sentinel.
struct CutoffVector {
  std::vector<std::optional<double>> p;

  static CutoffVector unconstrained(int n_schools) {
    CutoffVector c;
    c.p.assign(static_cast<std::size_t>(n_schools), std::nullopt);
    return c;
  }
  bool is_unconstrained(int s) const { return !p[static_cast<std::size_t>(s)].has_value(); }
  double value_or(int s, double fallback) const {
    const auto& v = p[static_cast<std::size_t>(s)];
    return v ? *v : fallback;
  }
  int size() const { return static_cast<int>(p.size()); }
};

enum class Mechanism { IA, DA };

struct MatchOutcome {
  std::vector<int> assignment;    // by student index; school index or kUnmatched
  CutoffVector cutoffs;
  std::vector<int> chosen_action; // by student index
  std::vector<bool> deceived;     // chosen_action != 0
  Mechanism mechanism = Mechanism::DA;
  std::uint64_t seed = 0;
};

// Diagnostics, never thrown: each entry names the offending entity and rule.
std::vector<std::string> validate_economy(const Economy& e);

bool check_feasibility(const Economy& e, const MatchOutcome& m);

// Minimal realized priority among admitted students per school; throws
// std::runtime_error("infeasible matching") on an infeasible input.
CutoffVector cutoffs_of_matching(const Economy& e, const MatchOutcome& m);

// Per-student lottery numbers used to break priority ties; drawn once per
// (economy, seed) and reused across mechanisms and counterfactual reruns.
std::vector<double> tie_break_lottery(const Economy& e, std::uint64_t seed);

}  // namespace envymarket
