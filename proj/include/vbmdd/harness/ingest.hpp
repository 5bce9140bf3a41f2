#pragma once

#include <string>

#include "vbmdd/models/lpm.hpp"
#include "vbmdd/models/sfm.hpp"
#include "vbmdd/models/var.hpp"

namespace vbmdd {

/// A parsed CSV: header names and rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<string>");

/// VAR layout: one header row, one column per series, one row per period. A
/// leading column named `date` or holding ISO-8601 dates is ignored. The first
/// p rows are presample.
VarData ingest_var_csv(const CsvTable& table, int p);
/// SFM layout: firm_id, period, y, x1..xk. The panel must be balanced.
SfmData ingest_sfm_csv(const CsvTable& table, int sign);
/// LPM layout: subject_id, period, count, covariates. An `offset` column is
/// optional (default ln 8 in the first period and ln 2 afterwards); columns
/// whose names start with `z_` form the random-effect design (default: intercept).
LpmData ingest_lpm_csv(const CsvTable& table);

/// Writers for the same layouts (used by `synth`).
std::string var_to_csv(const VarData& data);
std::string sfm_to_csv(const SfmData& data);
std::string lpm_to_csv(const LpmData& data);

std::string describe(const VarData& data);
std::string describe(const SfmData& data);
std::string describe(const LpmData& data);

}  // namespace vbmdd
