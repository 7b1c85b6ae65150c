#include "envymarket/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "envymarket/io.hpp"

namespace envymarket {

using nlohmann::json;

Regime resolve_regime(const ScenarioConfig& cfg, int year, int municipality) {
  Regime r{0.0, cfg.gamma_base, 0.0};
  std::vector<const RegimeSegment*> applicable;
  for (const auto& seg : cfg.reforms) {
    if (seg.year_from > year) continue;
    if (seg.region &&
        std::find(seg.region->begin(), seg.region->end(), municipality) == seg.region->end())
      continue;
    applicable.push_back(&seg);
  }
  std::stable_sort(applicable.begin(), applicable.end(),
                   [](const RegimeSegment* a, const RegimeSegment* b) {
                     if (a->year_from != b->year_from) return a->year_from < b->year_from;
                     return !a->region && b->region;  // global layers first
                   });
  for (const auto* seg : applicable) {
    if (seg->w) r.w = *seg->w;
    if (seg->gamma) r.gamma = *seg->gamma;
    if (seg->revert_prob) r.revert_prob = *seg->revert_prob;
  }
  return r;
}

void validate_scenario(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& rule) { throw std::runtime_error("scenario: " + rule); };
  if (cfg.n_students <= 0) fail("n_students must be positive");
  if (cfg.n_schools <= 0) fail("n_schools must be positive");
  if (cfg.city_count <= 0) fail("city_count must be positive");
  if (cfg.cohorts.empty()) fail("cohorts must be non-empty");
  if (!(cfg.spread_km > 0.0)) fail("spread_km must be positive");
  if (cfg.school_placement != "city_center" && cfg.school_placement != "uniform")
    fail("unknown school_placement rule");
  if (!(cfg.capacity_ratio > 0.0)) fail("capacity_ratio must be positive");
  if (cfg.manipulation_reps < 1) fail("manipulation_reps must be >= 1");
  if (!(cfg.gamma_base > 0.0)) fail("gamma_base must be > 0");
  if (cfg.d_max && !(*cfg.d_max > 0.0)) fail("d_max must be > 0");
  for (double rate : {cfg.base_move_rate, cfg.household_move_rate, cfg.strategic_move_rate})
    if (!(rate >= 0.0 && rate <= 1.0)) fail("move rates must lie in [0,1]");
  if (cfg.rol_cap < 1) fail("rol_cap must be >= 1");

  const int first_year = *std::min_element(cfg.cohorts.begin(), cfg.cohorts.end());
  bool covered = false;
  for (const auto& seg : cfg.reforms)
    if (!seg.region && seg.year_from <= first_year) covered = true;
  if (!covered) fail("reform segments do not cover all scenario years");

  for (const auto& seg : cfg.reforms) {
    if (seg.w && !(*seg.w >= 0.0 && *seg.w <= 1.0)) fail("segment w out of [0,1]");
    if (seg.gamma && !(*seg.gamma > 0.0)) fail("segment gamma must be > 0");
    if (seg.revert_prob && !(*seg.revert_prob >= 0.0 && *seg.revert_prob <= 1.0))
      fail("segment revert_prob out of [0,1]");
    if (seg.region) {
      if (seg.w) fail("regional segments cannot set w");
      for (int m : seg.region->empty() ? std::vector<int>{} : *seg.region)
        if (m < 0 || m >= cfg.city_count) fail("segment region references unknown municipality");
    }
  }
  // Regions within a year must be disjoint.
  std::set<int> years;
  for (const auto& seg : cfg.reforms) years.insert(seg.year_from);
  for (int y : years) {
    std::set<int> seen;
    for (const auto& seg : cfg.reforms) {
      if (seg.year_from != y || !seg.region) continue;
      for (int m : *seg.region)
        if (!seen.insert(m).second) fail("overlapping regime regions in year " + std::to_string(y));
    }
  }
}

ScenarioConfig normalize_scenario(const ScenarioConfig& cfg) {
  ScenarioConfig out = cfg;
  const int first_year = out.cohorts.empty()
                             ? 0
                             : *std::min_element(out.cohorts.begin(), out.cohorts.end());
  bool has_base = false;
  for (const auto& seg : out.reforms)
    if (!seg.region && seg.year_from <= first_year) has_base = true;
  if (!has_base && !out.cohorts.empty()) {
    // Vague-rules baseline: non-manipulable priorities (w = 0).
    RegimeSegment base;
    base.year_from = first_year;
    base.w = 0.0;
    base.gamma = out.gamma_base;
    out.reforms.insert(out.reforms.begin(), base);
  }
  if (out.reforms.size() == 1 && !out.cohorts.empty()) {
    // Default reform: full manipulability from the median cohort year on.
    RegimeSegment post;
    std::vector<int> sorted = out.cohorts;
    std::sort(sorted.begin(), sorted.end());
    post.year_from = sorted[sorted.size() / 2];
    post.w = 1.0;
    out.reforms.push_back(post);
  }
  std::stable_sort(out.reforms.begin(), out.reforms.end(),
                   [](const RegimeSegment& a, const RegimeSegment& b) {
                     if (a.year_from != b.year_from) return a.year_from < b.year_from;
                     return !a.region && b.region;
                   });
  validate_scenario(out);
  return out;
}

json scenario_to_json(const ScenarioConfig& cfg) {
  json reforms = json::array();
  for (const auto& seg : cfg.reforms) {
    json js{{"year_from", seg.year_from}};
    js["region"] = seg.region ? json(*seg.region) : json(nullptr);
    if (seg.w) js["w"] = *seg.w;
    if (seg.gamma) js["gamma"] = *seg.gamma;
    if (seg.revert_prob) js["revert_prob"] = *seg.revert_prob;
    reforms.push_back(std::move(js));
  }
  json j{{"schema_version", cfg.schema_version},
         {"population",
          {{"n_students", cfg.n_students}, {"cohorts", cfg.cohorts}, {"rol_cap", cfg.rol_cap}}},
         {"geography",
          {{"city_count", cfg.city_count},
           {"spread_km", cfg.spread_km},
           {"n_schools", cfg.n_schools},
           {"school_placement", cfg.school_placement}}},
         {"preferences",
          {{"distance_weight", cfg.distance_weight},
           {"quality_sd", cfg.quality_sd},
           {"noise_sd", cfg.noise_sd}}},
         {"reforms", reforms},
         {"simulation",
          {{"manipulation_reps", cfg.manipulation_reps},
           {"master_seed", cfg.master_seed},
           {"capacity_ratio", cfg.capacity_ratio},
           {"gamma_base", cfg.gamma_base},
           {"base_move_rate", cfg.base_move_rate},
           {"household_move_rate", cfg.household_move_rate},
           {"strategic_move_rate", cfg.strategic_move_rate}}}};
  if (cfg.d_max) j["simulation"]["d_max"] = *cfg.d_max;
  return j;
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig cfg;
  maybe(j, "schema_version", cfg.schema_version);
  if (j.contains("population")) {
    const auto& p = j.at("population");
    maybe(p, "n_students", cfg.n_students);
    maybe(p, "cohorts", cfg.cohorts);
    maybe(p, "rol_cap", cfg.rol_cap);
  }
  if (j.contains("geography")) {
    const auto& g = j.at("geography");
    maybe(g, "city_count", cfg.city_count);
    maybe(g, "spread_km", cfg.spread_km);
    maybe(g, "n_schools", cfg.n_schools);
    maybe(g, "school_placement", cfg.school_placement);
  }
  if (j.contains("preferences")) {
    const auto& p = j.at("preferences");
    maybe(p, "distance_weight", cfg.distance_weight);
    maybe(p, "quality_sd", cfg.quality_sd);
    maybe(p, "noise_sd", cfg.noise_sd);
  }
  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    maybe(s, "manipulation_reps", cfg.manipulation_reps);
    maybe(s, "master_seed", cfg.master_seed);
    maybe(s, "capacity_ratio", cfg.capacity_ratio);
    maybe(s, "gamma_base", cfg.gamma_base);
    maybe(s, "base_move_rate", cfg.base_move_rate);
    maybe(s, "household_move_rate", cfg.household_move_rate);
    maybe(s, "strategic_move_rate", cfg.strategic_move_rate);
    if (s.contains("d_max")) cfg.d_max = s.at("d_max").get<double>();
  }
  if (j.contains("reforms")) {
    cfg.reforms.clear();
    for (const auto& js : j.at("reforms")) {
      RegimeSegment seg;
      seg.year_from = js.at("year_from").get<int>();
      if (js.contains("region") && !js.at("region").is_null())
        seg.region = js.at("region").get<std::vector<int>>();
      if (js.contains("w")) seg.w = js.at("w").get<double>();
      if (js.contains("gamma")) seg.gamma = js.at("gamma").get<double>();
      if (js.contains("revert_prob")) seg.revert_prob = js.at("revert_prob").get<double>();
      cfg.reforms.push_back(std::move(seg));
    }
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& ex) {
    throw std::runtime_error("scenario parse error in " + path + ": " + ex.what());
  }
  return normalize_scenario(scenario_from_json(j));
}

void save_scenario(const std::string& path, const ScenarioConfig& cfg) {
  write_text_file(path, scenario_to_json(cfg).dump(2) + "\n");
}

}  // namespace envymarket
