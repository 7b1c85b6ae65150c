#include "envymarket/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace envymarket {

using nlohmann::json;

namespace {

json address_to_json(const Address& a) { return json{{"x", a.x}, {"y", a.y}}; }

Address address_from_json(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>()}; }

}  // namespace

json economy_to_json(const Economy& e) {
  json schools = json::array();
  for (const auto& s : e.schools)
    schools.push_back({{"id", s.id},
                       {"capacity", s.capacity},
                       {"location", address_to_json(s.location)}});

  json students = json::array();
  for (const auto& st : e.students) {
    json utilities = json::object(), exog = json::object();
    for (int s = 0; s < e.n_schools(); ++s) {
      const std::string key = std::to_string(e.schools[static_cast<std::size_t>(s)].id);
      utilities[key] = st.utilities[static_cast<std::size_t>(s)];
      exog[key] = st.exog_priority[static_cast<std::size_t>(s)];
    }
    json actions = json::array();
    for (const auto& a : st.actions) actions.push_back(address_to_json(a));
    json jst{{"id", st.id},
             {"weight", st.weight},
             {"utilities", utilities},
             {"exog_priority", exog},
             {"actions", actions},
             {"covariates",
              {{"cohort_year", st.cov.cohort_year},
               {"municipality", st.cov.municipality},
               {"treated", st.cov.treated},
               {"post", st.cov.post},
               {"parental_income", st.cov.parental_income},
               {"gpa", st.cov.gpa},
               {"female", st.cov.female},
               {"parental_education_years", st.cov.parental_education_years}}}};
    if (st.gamma_override) jst["gamma_override"] = *st.gamma_override;
    students.push_back(std::move(jst));
  }

  json j{{"schools", schools},
         {"students", students},
         {"w", e.w},
         {"gamma", e.gamma},
         {"d_max", e.d_max},
         {"metric", e.metric == DistanceMetric::Euclidean ? "euclidean" : "time_matrix"}};
  if (e.metric == DistanceMetric::TimeMatrix) j["time_matrix"] = e.time_matrix;
  return j;
}

Economy economy_from_json(const json& j) {
  Economy e;
  e.w = j.at("w").get<double>();
  e.gamma = j.at("gamma").get<double>();
  e.d_max = j.at("d_max").get<double>();
  const std::string metric = j.at("metric").get<std::string>();
  if (metric == "euclidean") {
    e.metric = DistanceMetric::Euclidean;
  } else if (metric == "time_matrix") {
    e.metric = DistanceMetric::TimeMatrix;
    e.time_matrix = j.at("time_matrix").get<std::vector<std::vector<std::vector<double>>>>();
  } else {
    throw std::runtime_error("unknown metric: " + metric);
  }

  for (const auto& js : j.at("schools")) {
    School s;
    s.id = js.at("id").get<int>();
    s.capacity = js.at("capacity").get<double>();
    s.location = address_from_json(js.at("location"));
    e.schools.push_back(s);
  }

  for (const auto& js : j.at("students")) {
    Student st;
    st.id = js.at("id").get<int>();
    st.weight = js.at("weight").get<double>();
    for (const auto& s : e.schools) {
      const std::string key = std::to_string(s.id);
      st.utilities.push_back(js.at("utilities").at(key).get<double>());
      st.exog_priority.push_back(js.at("exog_priority").at(key).get<double>());
    }
    for (const auto& ja : js.at("actions")) st.actions.push_back(address_from_json(ja));
    if (js.contains("gamma_override")) st.gamma_override = js.at("gamma_override").get<double>();
    if (js.contains("covariates")) {
      const auto& jc = js.at("covariates");
      st.cov.cohort_year = jc.at("cohort_year").get<int>();
      st.cov.municipality = jc.at("municipality").get<int>();
      st.cov.treated = jc.at("treated").get<bool>();
      st.cov.post = jc.at("post").get<bool>();
      st.cov.parental_income = jc.at("parental_income").get<double>();
      st.cov.gpa = jc.at("gpa").get<double>();
      st.cov.female = jc.at("female").get<bool>();
      st.cov.parental_education_years = jc.at("parental_education_years").get<double>();
    }
    e.students.push_back(std::move(st));
  }
  return e;
}

json outcome_to_json(const Economy& e, const MatchOutcome& m) {
  json assignment = json::array();
  json chosen = json::array(), deceived = json::array();
  for (int i = 0; i < e.n_students(); ++i) {
    const int s = m.assignment[static_cast<std::size_t>(i)];
    assignment.push_back(json::array(
        {e.students[static_cast<std::size_t>(i)].id,
         s == kUnmatched ? json(nullptr) : json(e.schools[static_cast<std::size_t>(s)].id)}));
    chosen.push_back(m.chosen_action.empty() ? kNullAction
                                             : m.chosen_action[static_cast<std::size_t>(i)]);
    deceived.push_back(!m.deceived.empty() && m.deceived[static_cast<std::size_t>(i)]);
  }
  json cutoffs = json::object();
  for (int s = 0; s < m.cutoffs.size(); ++s) {
    const std::string key = std::to_string(e.schools[static_cast<std::size_t>(s)].id);
    cutoffs[key] = m.cutoffs.is_unconstrained(s)
                       ? json{{"unconstrained", true}}
                       : json{{"unconstrained", false}, {"value", *m.cutoffs.p[static_cast<std::size_t>(s)]}};
  }
  return json{{"assignment", assignment},
              {"cutoffs", cutoffs},
              {"chosen_action", chosen},
              {"deceived", deceived},
              {"mechanism", m.mechanism == Mechanism::DA ? "da" : "ia"},
              {"seed", m.seed}};
}

MatchOutcome outcome_from_json(const Economy& e, const json& j) {
  MatchOutcome m;
  m.assignment.assign(static_cast<std::size_t>(e.n_students()), kUnmatched);
  for (const auto& pair : j.at("assignment")) {
    const int i = e.student_index(pair.at(0).get<int>());
    if (i < 0) throw std::runtime_error("unknown student id in outcome");
    if (!pair.at(1).is_null()) {
      const int s = e.school_index(pair.at(1).get<int>());
      if (s < 0) throw std::runtime_error("unknown school id in outcome");
      m.assignment[static_cast<std::size_t>(i)] = s;
    }
  }
  m.chosen_action = j.at("chosen_action").get<std::vector<int>>();
  m.deceived = j.at("deceived").get<std::vector<bool>>();
  m.mechanism = j.at("mechanism").get<std::string>() == "da" ? Mechanism::DA : Mechanism::IA;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.cutoffs = CutoffVector::unconstrained(e.n_schools());
  for (int s = 0; s < e.n_schools(); ++s) {
    const auto& jc = j.at("cutoffs").at(std::to_string(e.schools[static_cast<std::size_t>(s)].id));
    if (!jc.at("unconstrained").get<bool>())
      m.cutoffs.p[static_cast<std::size_t>(s)] = jc.at("value").get<double>();
  }
  return m;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

void write_economy(const std::string& path, const Economy& e) {
  write_text_file(path, economy_to_json(e).dump(2) + "\n");
}

Economy read_economy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open economy file: " + path);
  json j;
  in >> j;
  return economy_from_json(j);
}

void write_outcome(const std::string& path, const Economy& e, const MatchOutcome& m) {
  write_text_file(path, outcome_to_json(e, m).dump(2) + "\n");
}

MatchOutcome read_outcome(const Economy& e, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open outcome file: " + path);
  json j;
  in >> j;
  return outcome_from_json(e, j);
}

std::vector<RankOrderList> read_rols_csv(const std::string& path, const Economy& e) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ROL file: " + path);
  std::string line;
  std::getline(in, line);  // header
  // (student index, rank, school index)
  std::vector<std::tuple<int, int, int>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw std::runtime_error("malformed ROL row: " + line);
    const int i = e.student_index(std::stoi(a));
    const int s = e.school_index(std::stoi(c));
    if (i < 0 || s < 0) throw std::runtime_error("unknown id in ROL row: " + line);
    rows.emplace_back(i, std::stoi(b), s);
  }
  std::sort(rows.begin(), rows.end());
  std::vector<RankOrderList> rols(static_cast<std::size_t>(e.n_students()));
  for (const auto& [i, rank, s] : rows) {
    auto& rol = rols[static_cast<std::size_t>(i)];
    if (std::find(rol.begin(), rol.end(), s) != rol.end())
      throw std::runtime_error("duplicate school in ROL of student " +
                               std::to_string(e.students[static_cast<std::size_t>(i)].id));
    rol.push_back(s);
  }
  return rols;
}

void write_rols_csv(const std::string& path, const Economy& e,
                    const std::vector<RankOrderList>& rols) {
  std::ostringstream out;
  out << "student_id,rank,school_id\n";
  for (int i = 0; i < e.n_students(); ++i) {
    const auto& rol = rols[static_cast<std::size_t>(i)];
    for (std::size_t r = 0; r < rol.size(); ++r)
      out << e.students[static_cast<std::size_t>(i)].id << ',' << (r + 1) << ','
          << e.schools[static_cast<std::size_t>(rol[r])].id << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<int> read_actions_csv(const std::string& path, const Economy& e) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open actions file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<int> actions(static_cast<std::size_t>(e.n_students()), kNullAction);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw std::runtime_error("malformed actions row: " + line);
    const int i = e.student_index(std::stoi(a));
    if (i < 0) throw std::runtime_error("unknown student id in actions row: " + line);
    const int idx = std::stoi(b);
    const auto n = static_cast<int>(e.students[static_cast<std::size_t>(i)].actions.size());
    if (idx < 0 || idx >= n) throw std::runtime_error("action index out of range: " + line);
    actions[static_cast<std::size_t>(i)] = idx;
  }
  return actions;
}

}  // namespace envymarket
