#include "envymarket/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace envymarket {

namespace {

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
  std::vector<int> cluster;  // municipality per row
  std::vector<int> treated;
  int interaction_col = -1;
};

// Controls with no variation (single-sex subgroups, all-missing columns)
// carry no information and would only collide with the intercept.
bool varies(const std::vector<double>& col) {
  const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
  return *hi - *lo > 1e-12;
}

// Mean-impute a possibly-missing control; adds the value column when any
// value is observed and a missingness indicator when some are missing.
void add_control(Design& d, const std::string& name,
                 const std::vector<std::optional<double>>& values,
                 std::vector<std::vector<double>>& cols) {
  const std::size_t n = values.size();
  std::size_t n_obs = 0;
  double sum = 0.0;
  for (const auto& v : values)
    if (v) {
      ++n_obs;
      sum += *v;
    }
  const double mean = n_obs > 0 ? sum / static_cast<double>(n_obs) : 0.0;
  if (n_obs > 0) {
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r) col[r] = values[r].value_or(mean);
    if (varies(col)) {
      cols.push_back(std::move(col));
      d.names.push_back(name);
    }
  }
  if (n_obs < n && n_obs > 0) {
    std::vector<double> miss(n);
    for (std::size_t r = 0; r < n; ++r) miss[r] = values[r] ? 0.0 : 1.0;
    cols.push_back(std::move(miss));
    d.names.push_back("missing_" + name);
  }
}

Design build_design(const Panel& panel, const FitSpec& spec) {
  if (panel.empty()) throw std::runtime_error("empty panel");
  const std::size_t n = panel.size();

  Design d;
  d.y.resize(static_cast<Eigen::Index>(n));
  d.cluster.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = panel[r];
    if (spec.placebo_outcome) {
      if (!row.moved_placebo) throw std::runtime_error("panel lacks placebo move outcomes");
      d.y(static_cast<Eigen::Index>(r)) = *row.moved_placebo;
    } else {
      d.y(static_cast<Eigen::Index>(r)) = row.moved;
    }
    d.cluster.push_back(row.municipality);
    d.treated.push_back(row.treated);
  }

  std::vector<std::vector<double>> cols;
  cols.emplace_back(n, 1.0);
  d.names.push_back("const");

  {
    std::vector<double> inter(n);
    for (std::size_t r = 0; r < n; ++r)
      inter[r] = static_cast<double>(panel[r].treated * panel[r].post);
    cols.push_back(std::move(inter));
    d.names.push_back("treated_x_post");
    d.interaction_col = static_cast<int>(cols.size()) - 1;
  }

  if (spec.fixed_effects) {
    // One reference level per block: the lexicographically smallest year
    // and municipality are dropped.
    std::set<int> years, munis;
    for (const auto& row : panel) {
      years.insert(row.year);
      munis.insert(row.municipality);
    }
    for (auto it = std::next(years.begin()); it != years.end(); ++it) {
      std::vector<double> col(n);
      for (std::size_t r = 0; r < n; ++r) col[r] = panel[r].year == *it ? 1.0 : 0.0;
      cols.push_back(std::move(col));
      d.names.push_back("year_" + std::to_string(*it));
    }
    for (auto it = std::next(munis.begin()); it != munis.end(); ++it) {
      std::vector<double> col(n);
      for (std::size_t r = 0; r < n; ++r)
        col[r] = panel[r].municipality == *it ? 1.0 : 0.0;
      cols.push_back(std::move(col));
      d.names.push_back("muni_" + std::to_string(*it));
    }
  } else {
    std::vector<double> tr(n), po(n);
    for (std::size_t r = 0; r < n; ++r) {
      tr[r] = panel[r].treated;
      po[r] = panel[r].post;
    }
    cols.push_back(std::move(tr));
    d.names.push_back("treated");
    cols.push_back(std::move(po));
    d.names.push_back("post");
  }

  if (spec.controls) {
    std::vector<std::optional<double>> income(n), edu(n);
    std::vector<double> female(n);
    for (std::size_t r = 0; r < n; ++r) {
      income[r] = panel[r].parental_income;
      edu[r] = panel[r].parental_education_years;
      female[r] = panel[r].female ? 1.0 : 0.0;
    }
    add_control(d, "parental_income", income, cols);
    add_control(d, "parental_education_years", edu, cols);
    if (varies(female)) {
      cols.push_back(std::move(female));
      d.names.push_back("female");
    }
  }
  if (spec.gpa_control) {
    std::vector<std::optional<double>> gpa(n);
    for (std::size_t r = 0; r < n; ++r) gpa[r] = panel[r].gpa;
    add_control(d, "gpa", gpa, cols);
  }

  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < n; ++r)
      d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cols[c][r];
  return d;
}

}  // namespace

RegressionFit fit_ols_fe(const Panel& panel, const FitSpec& spec) {
  Design d = build_design(panel, spec);
  const Eigen::Index n = d.X.rows(), k = d.X.cols();
  if (n <= k) throw std::runtime_error("more regressors than observations");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    const auto perm = qr.colsPermutation().indices();
    std::string msg = "rank-deficient design; collinear columns:";
    for (Eigen::Index j = qr.rank(); j < k; ++j)
      msg += " " + d.names[static_cast<std::size_t>(perm(j))];
    throw std::runtime_error(msg);
  }

  RegressionFit fit;
  fit.names = d.names;
  fit.interaction_col = d.interaction_col;
  fit.n_obs = static_cast<int>(n);
  fit.beta = qr.solve(d.y);
  fit.residuals = d.y - d.X * fit.beta;

  std::map<int, std::vector<Eigen::Index>> clusters;
  for (Eigen::Index r = 0; r < n; ++r) clusters[d.cluster[static_cast<std::size_t>(r)]].push_back(r);
  fit.n_clusters = static_cast<int>(clusters.size());
  if (fit.n_clusters < 2) throw std::runtime_error("fewer than 2 clusters");

  // CR1 sandwich.
  const Eigen::MatrixXd bread = (d.X.transpose() * d.X).inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [cid, rows] : clusters) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(k);
    for (Eigen::Index r : rows) score += d.X.row(r).transpose() * fit.residuals(r);
    meat += score * score.transpose();
  }
  const double g = static_cast<double>(fit.n_clusters);
  const double c = g / (g - 1.0) * (static_cast<double>(n) - 1.0) /
                   (static_cast<double>(n) - static_cast<double>(k));
  fit.vcov = c * bread * meat * bread;
  fit.se.resize(k);
  for (Eigen::Index j = 0; j < k; ++j)
    fit.se(j) = std::sqrt(std::max(0.0, fit.vcov(j, j)));

  double mdv_sum = 0.0;
  int mdv_n = 0;
  for (Eigen::Index r = 0; r < n; ++r)
    if (d.treated[static_cast<std::size_t>(r)] == 0) {
      mdv_sum += d.y(r);
      ++mdv_n;
    }
  fit.mdv = mdv_n > 0 ? mdv_sum / mdv_n : 0.0;
  return fit;
}

double manipulation_probability(double beta, double moved_share_treated_post) {
  if (!(moved_share_treated_post > 0.0))
    throw std::runtime_error("no movers in treated-post cell");
  return std::clamp(beta / moved_share_treated_post, 0.0, 1.0);
}

DidResult fit_did(const Panel& panel, const RowFilter& filter, const FitSpec& spec) {
  Panel sub;
  for (const auto& row : panel)
    if (!filter || filter(row)) sub.push_back(row);
  if (sub.empty()) throw std::runtime_error("empty subgroup");

  DidResult out;
  out.fit = fit_ols_fe(sub, spec);

  double movers = 0.0, cell = 0.0;
  for (const auto& row : sub)
    if (row.treated == 1 && row.post == 1) {
      cell += 1.0;
      movers += row.moved;
    }
  out.moved_share_treated_post = cell > 0.0 ? movers / cell : 0.0;
  out.manipulation_share =
      manipulation_probability(out.fit.beta_interaction(), out.moved_share_treated_post);
  return out;
}

RegressionFit run_placebo(const Panel& panel, const FitSpec& spec) {
  bool any_post = false;
  for (const auto& row : panel) any_post = any_post || row.post == 1;
  if (!any_post) throw std::runtime_error("empty post period");
  FitSpec s = spec;
  s.placebo_outcome = true;
  return fit_ols_fe(panel, s);
}

std::string SpecVariant::descriptor() const {
  std::string t;
  switch (treatment) {
    case TreatmentDef::DemandP50: t = "demand>p50"; break;
    case TreatmentDef::DemandP75: t = "demand>p75"; break;
    case TreatmentDef::DemandP90: t = "demand>p90"; break;
    case TreatmentDef::SupplyP75: t = "supply>p75"; break;
  }
  return t + (controls ? "|controls" : "|no-controls") +
         (gpa_control ? "|gpa" : "|no-gpa") + (fixed_effects ? "|fe" : "|no-fe");
}

namespace {

double muni_quantile(const std::map<int, double>& by_muni, double p) {
  std::vector<double> v;
  v.reserve(by_muni.size());
  for (const auto& [m, x] : by_muni) v.push_back(x);
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(
      std::min(static_cast<double>(v.size() - 1), std::floor(p * static_cast<double>(v.size()))));
  return v[idx];
}

}  // namespace

std::vector<SpecCurvePoint> spec_curve(const Panel& panel,
                                       const std::vector<SpecVariant>& variants) {
  if (variants.empty()) throw std::runtime_error("empty variant set");
  std::vector<SpecCurvePoint> out;
  for (const auto& variant : variants) {
    SpecCurvePoint point;
    point.variant = variant;
    try {
      std::map<int, double> by_muni;
      const bool supply = variant.treatment == TreatmentDef::SupplyP75;
      for (const auto& row : panel) {
        const auto& v = supply ? row.muni_supply : row.muni_demand;
        if (!v) throw std::runtime_error("panel lacks municipality demand/supply measures");
        by_muni[row.municipality] = *v;
      }
      double p = 0.5;
      if (variant.treatment == TreatmentDef::DemandP75 || supply) p = 0.75;
      if (variant.treatment == TreatmentDef::DemandP90) p = 0.9;
      const double cut = muni_quantile(by_muni, p);

      Panel redefined = panel;
      for (auto& row : redefined) {
        const auto& v = supply ? row.muni_supply : row.muni_demand;
        row.treated = *v > cut ? 1 : 0;
      }
      FitSpec spec;
      spec.controls = variant.controls;
      spec.gpa_control = variant.gpa_control;
      spec.fixed_effects = variant.fixed_effects;
      point.fit = fit_ols_fe(redefined, spec);
    } catch (const std::exception& ex) {
      point.error = ex.what();
    }
    out.push_back(std::move(point));
  }
  return out;
}

std::vector<SpecVariant> default_spec_variants() {
  std::vector<SpecVariant> out;
  for (TreatmentDef t : {TreatmentDef::DemandP50, TreatmentDef::DemandP75,
                         TreatmentDef::DemandP90, TreatmentDef::SupplyP75})
    for (bool controls : {true, false})
      for (bool gpa : {true, false})
        for (bool fe : {true, false}) out.push_back({t, controls, gpa, fe});
  return out;
}

namespace {

const char* kPanelHeader =
    "student_id,year,municipality,moved,moved_placebo,treated,post,female,"
    "parental_income,parental_education_years,gpa,muni_demand,muni_supply";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> opt_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

Panel read_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open panel file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty panel file: " + path);
  Panel out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 13) throw std::runtime_error("malformed panel row: " + line);
    PanelRecord r;
    r.student_id = std::stol(f[0]);
    r.year = std::stoi(f[1]);
    r.municipality = std::stoi(f[2]);
    r.moved = std::stoi(f[3]);
    if (!f[4].empty()) r.moved_placebo = std::stoi(f[4]);
    r.treated = std::stoi(f[5]);
    r.post = std::stoi(f[6]);
    r.female = std::stoi(f[7]) != 0;
    r.parental_income = opt_double(f[8]);
    r.parental_education_years = opt_double(f[9]);
    r.gpa = opt_double(f[10]);
    r.muni_demand = opt_double(f[11]);
    r.muni_supply = opt_double(f[12]);
    out.push_back(r);
  }
  return out;
}

void write_panel_csv(const std::string& path, const Panel& panel) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write panel file: " + path);
  out << kPanelHeader << "\n";
  for (const auto& r : panel) {
    out << r.student_id << ',' << r.year << ',' << r.municipality << ',' << r.moved << ','
        << (r.moved_placebo ? std::to_string(*r.moved_placebo) : "") << ',' << r.treated << ','
        << r.post << ',' << (r.female ? 1 : 0) << ',' << fmt(r.parental_income) << ','
        << fmt(r.parental_education_years) << ',' << fmt(r.gpa) << ',' << fmt(r.muni_demand)
        << ',' << fmt(r.muni_supply) << "\n";
  }
}

}  // namespace envymarket
