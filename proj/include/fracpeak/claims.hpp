#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fracpeak {

// one verification row; criterion 0 marks supplementary rows that are
// reported but belong to no acceptance criterion
struct Claim {
    int criterion = 0;
    std::string claim;
    std::string citation;
    nlohmann::json measured;
    std::string tolerance;
    bool pass = false;
};

nlohmann::json to_json(const Claim& c);

// stage summaries keyed by stage name: operators, ground, green, projection,
// poisson, reduce, scan. Tolerances are fixed here, not configurable.
std::vector<Claim> evaluate_claims(const nlohmann::json& stages);

// reads the stage summaries from a run directory; throws DependencyError
// naming any that are missing
nlohmann::json load_stage_summaries(const std::filesystem::path& dir);

struct CriterionVerdict {
    int criterion = 0;
    std::string title;
    bool pass = false;
    std::vector<const Claim*> rows;
};
std::vector<CriterionVerdict> group_by_criterion(const std::vector<Claim>& claims);
std::string criterion_title(int criterion);

} // namespace fracpeak
