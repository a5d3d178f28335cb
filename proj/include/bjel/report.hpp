#pragma once

// JSON views of study and analysis results. Kept separate so the numeric
// headers stay free of the serialization dependency.

#include <nlohmann/json.hpp>

#include "bjel/analyze.hpp"
#include "bjel/simulation.hpp"

namespace bjel {

inline nlohmann::json to_json(const StudyResult& res) {
    nlohmann::json j;
    j["type"] = "study_result";
    j["population_size"] = res.population_size;
    j["sample_size"] = res.sample_size;
    j["kernel"] = res.kernel;
    j["design"] = res.design;
    j["replicates"] = res.replicates;
    j["failed"] = res.failed;
    j["level"] = res.level;
    j["seed"] = res.seed;
    j["theta_true"] = res.theta_true;
    j["methods"] = nlohmann::json::array();
    for (const auto& mm : res.per_method) {
        j["methods"].push_back({{"method", to_string(mm.method)},
                                {"cp", mm.cp},
                                {"lower_tail", mm.lower_tail},
                                {"upper_tail", mm.upper_tail},
                                {"avg_length", mm.avg_length},
                                {"avg_lower_bound", mm.avg_lower},
                                {"replicates_used", mm.used}});
    }
    if (!res.failure_notes.empty()) j["failure_notes"] = res.failure_notes;
    return j;
}

inline nlohmann::json to_json(const AnalysisResult& res) {
    nlohmann::json j;
    j["type"] = "analysis_result";
    j["method"] = to_string(res.method);
    j["kernel"] = res.kernel;
    j["n"] = res.n;
    j["estimate"] = res.estimate;
    j["lower"] = res.lower;
    j["upper"] = res.upper;
    j["level"] = res.level;
    j["scale_used"] = res.scale_used;
    if (!res.diagnostics.empty()) j["diagnostics"] = res.diagnostics;
    return j;
}

}  // namespace bjel
