#pragma once

#include <string>
#include <vector>

#include "scenconf/scenario.hpp"

// JSON round-trip for programs and score arrays. The program document is
//   {"dimension": d, "cost": [...], "constraints": [[[a...], b], ...],
//    "box": [[lo, hi], ...]}
// plus an optional "row_samples" array mapping each constraint row to its
// sample index (families whose samples contribute several rows). Parsing is
// strict: unknown fields are rejected by name.

namespace scenconf {

std::string program_to_json(const LinearScenarioProgram& program);
LinearScenarioProgram program_from_json(const std::string& text);

std::string scores_to_json(const std::vector<double>& scores);
std::vector<double> scores_from_json(const std::string& text);

}  // namespace scenconf
