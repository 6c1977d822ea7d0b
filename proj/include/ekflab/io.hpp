#pragma once

#include "ekflab/diagnostics.hpp"
#include "ekflab/filter.hpp"
#include "ekflab/scenarios.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace ekflab {

inline constexpr const char* kToolVersion = "0.1.0";

nlohmann::json vector_to_json(const Vector& v);
nlohmann::json matrix_to_json(const Matrix& m);

/// Trajectory CSV with the documented stable column set:
/// t, x1..xn, xhat1..xn, y1..yp, err, V, eigmin_P, eigmax_P.
/// Doubles are printed with %.17g; '.' decimal separator, '\n' rows.
std::string trajectory_csv(const FilterRun& run);

nlohmann::json trajectory_json(const FilterRun& run);

nlohmann::json diagnostics_to_json(const DiagnosticsReport& rep);

nlohmann::json scenario_to_json(const ScenarioConfig& config);

/// Parses a config object; fields not present fall back to `base`.
/// Unknown keys are rejected.
ScenarioConfig scenario_from_json(const nlohmann::json& j, const ScenarioConfig& base);

/// Reads a trajectory CSV produced by trajectory_csv back into the sample
/// series needed for diagnostics.
SampleSeries series_from_csv(const std::string& csv_text);

std::uint64_t fnv1a64(std::string_view bytes);

/// Digest of the canonicalized (sorted-key JSON) config bytes.
std::string config_digest(const nlohmann::json& canonical_config);

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string config_digest;
    std::string scenario;
    std::vector<std::string> output_paths;
    double duration_seconds = 0.0;
    std::string verdict;
};

nlohmann::json manifest_to_json(const RunManifest& m);

}  // namespace ekflab
