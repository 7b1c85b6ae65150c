#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace envymarket {

struct PanelRecord {
  long student_id = 0;
  int moved = 0;
  std::optional<int> moved_placebo;  // penultimate-year move outcome
  int treated = 0;
  int post = 0;
  int year = 0;
  int municipality = 0;  // cluster id
  std::optional<double> parental_income;
  std::optional<double> parental_education_years;
  std::optional<double> gpa;
  bool female = false;
  // Optional municipality-level measures for alternative treatment
  // definitions in the specification curve.
  std::optional<double> muni_demand;
  std::optional<double> muni_supply;
};

using Panel = std::vector<PanelRecord>;

struct FitSpec {
  bool fixed_effects = true;   // year + municipality dummies
  bool controls = true;        // income, education, female + missing dummies
  bool gpa_control = true;
  bool placebo_outcome = false;  // regress moved_placebo instead of moved
};

struct RegressionFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;           // CR1 cluster-robust
  Eigen::MatrixXd vcov;
  Eigen::VectorXd residuals;
  int n_obs = 0;
  int n_clusters = 0;
  double mdv = 0.0;             // mean outcome among untreated rows
  int interaction_col = -1;     // treated x post

  double beta_interaction() const { return beta(interaction_col); }
  double se_interaction() const { return se(interaction_col); }
};

// OLS of the move indicator on treated x post, year and municipality
// fixed effects, and controls; standard errors clustered by municipality
// with the CR1 small-sample factor [G/(G-1)][(N-1)/(N-K)].
RegressionFit fit_ols_fe(const Panel& panel, const FitSpec& spec = {});

// complier share: clamp(beta / mover share in the treated-post
// cell, 0, 1). Throws on a zero denominator.
double manipulation_probability(double beta, double moved_share_treated_post);

struct DidResult {
  RegressionFit fit;
  double moved_share_treated_post = 0.0;
  double manipulation_share = 0.0;
};

using RowFilter = std::function<bool(const PanelRecord&)>;

DidResult fit_did(const Panel& panel, const RowFilter& filter = nullptr,
                  const FitSpec& spec = {});

// Same specification on the penultimate-year move outcome.
RegressionFit run_placebo(const Panel& panel, const FitSpec& spec = {});

enum class TreatmentDef { DemandP50, DemandP75, DemandP90, SupplyP75 };

struct SpecVariant {
  TreatmentDef treatment = TreatmentDef::DemandP50;
  bool controls = true;
  bool gpa_control = true;
  bool fixed_effects = true;
  std::string descriptor() const;
};

struct SpecCurvePoint {
  SpecVariant variant;
  std::optional<RegressionFit> fit;
  std::string error;  // non-empty when this variant failed
};

// One LPM fit per variant; redefines `treated` from the municipality
// demand/supply quantiles before fitting. Per-variant errors are
// recorded and the sweep continues.
std::vector<SpecCurvePoint> spec_curve(const Panel& panel,
                                       const std::vector<SpecVariant>& variants);

std::vector<SpecVariant> default_spec_variants();

// Panel CSV round-trip (documented header; empty fields are missing).
Panel read_panel_csv(const std::string& path);
void write_panel_csv(const std::string& path, const Panel& panel);

}  // namespace envymarket
