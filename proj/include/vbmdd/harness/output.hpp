#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "vbmdd/harness/experiment.hpp"

namespace vbmdd {

/// Results table as CSV: one row per method, then benchmark rows. Missing
/// values print as NA; methods with no successful repetition print FAILED(reason).
std::string table_to_csv(const ResultsTable& table);

/// JSON document with `schema_version`, the benchmarks, per-method rows and every cell.
nlohmann::json table_to_json(const ResultsTable& table);
ResultsTable table_from_json(const nlohmann::json& doc);

/// Per-repetition estimates: columns repetition, method, value (value is FAILED(reason) for failed cells).
std::string scatter_to_csv(const ResultsTable& table);
/// Self-contained SVG: one panel per method, estimate against repetition, with the bounds drawn as lines.
std::string scatter_to_svg(const ResultsTable& table);

/// Writes `<stem>.csv`, `<stem>.json`, `<stem>_scatter.csv` and `<stem>_scatter.svg`
/// for the requested formats into `dir`; returns the paths written. Throws
/// ArgumentError naming the path on IO failure.
std::vector<std::string> emit_outputs(const ResultsTable& table, const std::string& dir,
                                      const std::vector<std::string>& formats, const std::string& stem = "results");

}  // namespace vbmdd
