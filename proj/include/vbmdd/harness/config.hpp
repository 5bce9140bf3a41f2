#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vbmdd {

/// Settings of the synthetic generators; each family reads the keys it needs.
struct SynthSpec {
  std::uint64_t seed = 1;
  int N = 2;   // VAR variables, SFM firms, LPM subjects
  int T = 80;  // periods
  int p = 1;   // VAR lags
  int k = 2;   // SFM/LPM regressors
  int m = 1;   // LPM random effects
  double sigma = 0.2;
  double lambda = 5.0;
  double theta = 1.0;
  int n = 20;  // toy sample size
};

/// One experiment. Grammar of the file form: one `key = value` per line, `#`
/// starts a comment, lists are comma separated. Keys:
///   model         var-conjugate | var-independent | sfm-exp | sfm-exp-cdl | sfm-gamma | lpm | lpm-cdl | toy
///   data          synthetic | path to a CSV in the family's layout
///   prior.v       prior variance scale (family default when absent)
///   sfm.cost      true for a cost frontier
///   synth.*       seed, N, T, p, k, m, sigma, lambda, theta, n
///   estimators    list of registered method names
///   draws, burn_in, thin, draws_o, draws_is, repetitions, seed, threads
///   upper_bound   optional benchmark upper bound
///   geweke.alpha, pmd.states, swz.quantile, swz.draws, chib.reduced
///   out, formats  output directory and list of csv | json | svg
struct ExperimentConfig {
  std::string model = "var-conjugate";
  std::string data = "synthetic";
  std::optional<double> prior_v;
  bool sfm_cost = false;
  SynthSpec synth;

  std::vector<std::string> estimators{"ris-vb", "bs-vb", "is-vb"};
  int draws = 10000;
  int burn_in = 1000;
  int thin = 1;
  int draws_o = 0;  // 0: same as draws
  int draws_is = 10000;
  int repetitions = 100;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  std::optional<double> upper_bound;

  double geweke_alpha = 0.05;
  int pmd_states = 1000;
  double swz_quantile = 0.1;
  int swz_draws = 20000;
  int chib_reduced = 0;

  std::string out = "out";
  std::vector<std::string> formats{"csv", "json"};

  /// Throws ModelConfigError on invalid values or unknown estimator names.
  void validate() const;
};

/// Registered estimator names.
const std::vector<std::string>& registered_estimators();
const std::vector<std::string>& registered_models();

/// Applies one `key = value` assignment; throws ModelConfigError on unknown keys or bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// The configuration as `key = value` lines, in a fixed order (parse_config round-trips it).
std::string format_config(const ExperimentConfig& config);

}  // namespace vbmdd
