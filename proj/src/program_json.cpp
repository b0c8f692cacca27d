#include "scenconf/program_json.hpp"

#include <stdexcept>

#include <json.hpp>

namespace scenconf {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const char* where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok)
      throw std::invalid_argument(std::string(where) + ": unknown field '" +
                                  it.key() + "'");
  }
}

}  // namespace

std::string program_to_json(const LinearScenarioProgram& program) {
  json j;
  j["dimension"] = program.dimension;
  j["cost"] = program.cost;
  json cons = json::array();
  for (const auto& cr : program.constraints)
    cons.push_back(json::array({cr.a, cr.b}));
  j["constraints"] = std::move(cons);
  json box = json::array();
  for (const auto& bx : program.box) box.push_back(json::array({bx[0], bx[1]}));
  j["box"] = std::move(box);
  if (!program.row_sample.empty()) j["row_samples"] = program.row_sample;
  return j.dump(2) + "\n";
}

LinearScenarioProgram program_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("program: not a JSON object");
  reject_unknown(j, {"dimension", "cost", "constraints", "box", "row_samples"},
                 "program");
  for (const char* field : {"dimension", "cost", "constraints", "box"})
    if (!j.contains(field))
      throw std::invalid_argument(std::string("program: missing field '") +
                                  field + "'");

  LinearScenarioProgram p;
  if (!j["dimension"].is_number_integer())
    throw std::invalid_argument("program: dimension must be an integer");
  p.dimension = j["dimension"].get<int>();
  if (!j["cost"].is_array())
    throw std::invalid_argument("program: cost must be an array");
  p.cost = j["cost"].get<std::vector<double>>();
  if (!j["constraints"].is_array())
    throw std::invalid_argument("program: constraints must be an array");
  for (const auto& item : j["constraints"]) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_array() ||
        !item[1].is_number())
      throw std::invalid_argument(
          "program: each constraint must be [[coefficients], offset]");
    AffineRow row;
    row.a = item[0].get<std::vector<double>>();
    row.b = item[1].get<double>();
    p.constraints.push_back(std::move(row));
  }
  if (!j["box"].is_array())
    throw std::invalid_argument("program: box must be an array");
  for (const auto& item : j["box"]) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() ||
        !item[1].is_number())
      throw std::invalid_argument("program: each box entry must be [lo, hi]");
    p.box.push_back({item[0].get<double>(), item[1].get<double>()});
  }
  if (j.contains("row_samples")) {
    if (!j["row_samples"].is_array())
      throw std::invalid_argument("program: row_samples must be an array");
    p.row_sample = j["row_samples"].get<std::vector<int>>();
  }
  p.validate();
  return p;
}

std::string scores_to_json(const std::vector<double>& scores) {
  return json(scores).dump() + "\n";
}

std::vector<double> scores_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_array())
    throw std::invalid_argument("scores: expected a JSON array of reals");
  return j.get<std::vector<double>>();
}

}  // namespace scenconf
