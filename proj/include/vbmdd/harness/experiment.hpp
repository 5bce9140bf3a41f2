#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vbmdd/diagnostics.hpp"
#include "vbmdd/estimators/estimators.hpp"
#include "vbmdd/harness/config.hpp"

namespace vbmdd {

/// The model kernel named by the config with its data bound in.
struct LoadedModel {
  KernelPtr kernel;
  std::string summary;  // descriptive summary of the data
};

LoadedModel load_model(const ExperimentConfig& config);

/// Synthetic data for the configured family, in its CSV layout.
std::string synthetic_csv(const ExperimentConfig& config);

/// One (method, repetition) result.
struct EstimateCell {
  bool ok = false;
  double value = 0.0;
  std::string error;  // reason when !ok
  int iterations = 0;
  /// Batch-means standard error of ln p(y) within this run (RIS and IS only; NaN otherwise).
  double se_bm = 0.0;
};

struct MethodRow {
  std::string method;
  int succeeded = 0;
  int failed = 0;
  /// NaN when no repetition succeeded; nse is NaN with fewer than two successes.
  double mean = 0.0;
  double nse = 0.0;
  double se_bm = 0.0;
  double pct_in_bounds = 0.0;
  double mean_iterations = 0.0;
  std::string first_error;
};

struct BenchmarkRow {
  std::string name;  // exact | vblb | upper
  double value = 0.0;
};

struct ResultsTable {
  static constexpr int kSchemaVersion = 1;
  std::string model;
  int repetitions = 0;
  int draws = 0;
  std::uint64_t seed = 0;
  Bounds bounds;
  std::vector<BenchmarkRow> benchmarks;
  std::vector<MethodRow> rows;
  /// cells[method][repetition], methods in the configured order.
  std::vector<std::vector<EstimateCell>> cells;
  std::string vb_status;

  int failed_cells() const;
};

/// Runs every configured estimator on `repetitions` independent chains. The VB
/// fit is computed once. Estimator failures are recorded per cell.
ResultsTable run_experiment(const ExperimentConfig& config);
ResultsTable run_experiment(const ExperimentConfig& config, const ModelKernel& model);

/// Seeds: every chain and estimator gets its own stream derived from the base seed.
std::uint64_t chain_seed(std::uint64_t base, int repetition);
std::uint64_t estimator_seed(std::uint64_t base, int repetition, const std::string& method);

/// One estimator on one evaluated chain.
MddEstimate run_estimator(const std::string& method, const ModelKernel& model, const ChainEvaluation& chain,
                          const std::optional<VBResult>& vb, const ExperimentConfig& config, std::uint64_t seed);

}  // namespace vbmdd
