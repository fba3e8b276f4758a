#pragma once

// Structured-text (JSON) forms of models, patches, manifests and reports.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scaleforge/evalloc.hpp"
#include "scaleforge/mixture.hpp"
#include "scaleforge/partition.hpp"
#include "scaleforge/regularize.hpp"
#include "scaleforge/shift.hpp"
#include "scaleforge/stats.hpp"

namespace scaleforge {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

using Json = nlohmann::json;

/// Common report envelope: schema name and version, toolkit version, config echo.
Json report_header(const std::string& schema, const Json& config);

/// Reads a JSON document and checks its schema name and version.
Json read_report(const std::filesystem::path& path, const std::string& schema);
void write_json(const std::filesystem::path& path, const Json& doc);

Json to_json(const EmpiricalDistribution& d);
EmpiricalDistribution distribution_from_json(const Json& j);

Json to_json(const GmmModel1D& m);
Json to_json(const GmmModel2D& m);
GmmModel2D gmm2d_from_json(const Json& j);

Json to_json(const BoxAnnotation& b);
BoxAnnotation box_from_json(const Json& j);

Json to_json(const Patch& p);
Patch patch_from_json(const Json& j);

Json to_json(const RegularizeResult& r);
std::vector<Patch> kept_patches_from_json(const Json& doc);

Json to_json(const BenchmarkManifest& m);
BenchmarkManifest manifest_from_json(const Json& j);

Json to_json(const Trial& t);
Json to_json(const ShiftReport& r);
Json to_json(const CorrelationSummary& s);
Json to_json(const LocMetrics& m);
Json to_json(const CalibrationReport& r);

}  // namespace scaleforge
