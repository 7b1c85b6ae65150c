#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "envymarket/core.hpp"
#include "envymarket/mechanisms.hpp"

namespace envymarket {

// Economy <-> JSON; round-trips losslessly (doubles as shortest
// round-trip decimals, unconstrained cutoffs as explicit sentinels).
nlohmann::json economy_to_json(const Economy& e);
Economy economy_from_json(const nlohmann::json& j);
void write_economy(const std::string& path, const Economy& e);
Economy read_economy(const std::string& path);

nlohmann::json outcome_to_json(const Economy& e, const MatchOutcome& m);
MatchOutcome outcome_from_json(const Economy& e, const nlohmann::json& j);
void write_outcome(const std::string& path, const Economy& e, const MatchOutcome& m);
MatchOutcome read_outcome(const Economy& e, const std::string& path);

// ROL CSV: student_id,rank,school_id (ranks 1-based, ascending).
std::vector<RankOrderList> read_rols_csv(const std::string& path, const Economy& e);
void write_rols_csv(const std::string& path, const Economy& e,
                    const std::vector<RankOrderList>& rols);

// Actions CSV: student_id,action_index. Students absent from the file
// take the null action.
std::vector<int> read_actions_csv(const std::string& path, const Economy& e);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace envymarket
