#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "cpsc/solve.hpp"

namespace cpsc {

inline constexpr const char* kVersion = "cpsc 0.1.0";

using Json = nlohmann::ordered_json;

// Resolved run configuration (gluing + solver), with every defaulted field
// echoed for reproducibility.
Json config_to_json(const GluingConfig& cfg, const CorrectorOptions& opt);

// Parses and validates a run configuration document.  Unknown keys and
// schema violations throw config_error with a descriptive message.
void parse_run_config(const Json& doc, GluingConfig& cfg, CorrectorOptions& opt);

Json report_to_json(const SolveReport& report, const GluingConfig& cfg,
                    const CorrectorOptions& opt);

Json floquet_to_json(const FloquetResult& r, Dimension n, double eps);

// per-chart field artifacts: <prefix>_<body_k|neck_k>.csv plus .meta.json
void write_chart_fields(const std::filesystem::path& dir, const std::string& prefix,
                        const GluedManifold& glued, const std::vector<DiscreteField>& fields);
std::vector<DiscreteField> read_chart_fields(const std::filesystem::path& dir,
                                             const std::string& prefix,
                                             const GluedManifold& glued);

void write_iteration_trace(const std::filesystem::path& file, const SolveReport& report);

}  // namespace cpsc
