#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace envymarket {

// One regime segment: applies from year_from onward, everywhere or in the
// listed municipalities. Regional segments may override gamma and
// revert_prob but not w (the manipulability weight is market-wide).
struct RegimeSegment {
  int year_from = 0;
  std::optional<std::vector<int>> region;  // municipality ids; nullopt = everywhere
  std::optional<double> w;
  std::optional<double> gamma;
  std::optional<double> revert_prob;  // chance a non-null action is reverted
};

struct ScenarioConfig {
  int schema_version = 1;
  // population
  int n_students = 1000;
  std::vector<int> cohorts = {2008, 2009, 2010, 2011, 2012, 2013, 2014, 2015};
  int rol_cap = 5;
  // geography
  int city_count = 4;
  double spread_km = 40.0;
  int n_schools = 8;
  std::string school_placement = "city_center";  // or "uniform"
  // preferences: utility = base + quality - distance_weight * dist + noise
  double distance_weight = 0.05;
  double quality_sd = 0.5;
  double noise_sd = 0.5;
  // capacity
  double capacity_ratio = 0.8;  // total seats per student
  // simulation
  int manipulation_reps = 150;
  std::uint64_t master_seed = 1;
  double gamma_base = 0.3;
  std::optional<double> d_max;  // default: bounding-box diameter
  double base_move_rate = 0.006;
  double household_move_rate = 0.025;
  double strategic_move_rate = 0.5;  // take-up among deception-eligible
  // reforms (normalized: always starts with a base segment at the first cohort year)
  std::vector<RegimeSegment> reforms;
};

struct Regime {
  double w = 0.0;
  double gamma = 1.0;
  double revert_prob = 0.0;
};

// Layered resolution: defaults, then applicable segments in year_from
// order (global before regional).
Regime resolve_regime(const ScenarioConfig& cfg, int year, int municipality);

// Throws std::runtime_error naming the violated rule.
void validate_scenario(const ScenarioConfig& cfg);

// Fills defaults and echoes them back; idempotent.
ScenarioConfig normalize_scenario(const ScenarioConfig& cfg);

nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const std::string& path, const ScenarioConfig& cfg);

}  // namespace envymarket
