#include "vbmdd/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "vbmdd/error.hpp"
#include "vbmdd/harness/ingest.hpp"
#include "vbmdd/models/lpm.hpp"
#include "vbmdd/models/sfm.hpp"
#include "vbmdd/models/toy.hpp"
#include "vbmdd/models/var.hpp"

namespace vbmdd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_var(const std::string& m) { return m.rfind("var-", 0) == 0; }
bool is_sfm(const std::string& m) { return m.rfind("sfm-", 0) == 0; }
bool is_lpm(const std::string& m) { return m.rfind("lpm", 0) == 0; }

VarData var_data(const ExperimentConfig& c) {
  if (c.data != "synthetic") return ingest_var_csv(read_csv(c.data), c.synth.p);
  const Eigen::Index N = c.synth.N;
  const int p = c.synth.p;
  VarTrueParams truth;
  truth.A = Mat::Zero(1 + p * N, N);
  truth.A.row(0).setConstant(0.1);
  for (int l = 1; l <= p; ++l)
    for (Eigen::Index j = 0; j < N; ++j) truth.A(1 + (l - 1) * N + j, j) = std::pow(0.5, l);
  truth.Sigma = 0.5 * Mat::Identity(N, N) + Mat::Constant(N, N, 0.1);
  return var_synthetic(c.synth.seed, N, c.synth.T, p, truth);
}

SfmData sfm_data(const ExperimentConfig& c) {
  const int sign = c.sfm_cost ? 1 : -1;
  if (c.data != "synthetic") return ingest_sfm_csv(read_csv(c.data), sign);
  SfmTrueParams truth;
  truth.beta = Vec::Constant(c.synth.k, 0.5);
  truth.beta(0) = 1.0;
  truth.sigma = c.synth.sigma;
  truth.lambda = c.synth.lambda;
  truth.theta = c.synth.theta;
  const Inefficiency family = c.model == "sfm-gamma" ? Inefficiency::Gamma : Inefficiency::Exponential;
  return sfm_synthetic(c.synth.seed, c.synth.N, c.synth.T, c.synth.k, family, truth, sign);
}

LpmData lpm_data(const ExperimentConfig& c) {
  if (c.data != "synthetic") return ingest_lpm_csv(read_csv(c.data));
  LpmTrueParams truth;
  truth.beta = Vec::Constant(c.synth.k, 0.2);
  truth.mu = Vec::Zero(c.synth.m);
  truth.Sigma = 0.25 * Mat::Identity(c.synth.m, c.synth.m);
  return lpm_synthetic(c.synth.seed, c.synth.N, c.synth.T, c.synth.k, c.synth.m, truth);
}

GaussianMeanToy::Spec toy_spec(const ExperimentConfig& c) {
  GaussianMeanToy::Spec s;
  if (c.data != "synthetic") {
    const CsvTable t = read_csv(c.data);
    for (std::size_t r = 0; r < t.rows.size(); ++r) s.y.push_back(std::stod(t.rows[r].at(0)));
  } else {
    s.y = GaussianMeanToy::simulate(c.synth.n, 1.0, 1.0, c.synth.seed);
  }
  s.prior_var = c.prior_v.value_or(1.0);
  return s;
}

// Standard error of ln mean exp(terms) by batch means on the scaled terms.
double log_mean_se(const std::vector<double>& terms) {
  constexpr int kBatches = 50;
  const std::size_t usable = terms.size() - terms.size() % kBatches;
  if (usable < 2 * kBatches) return kNaN;
  const double mx = *std::max_element(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(usable));
  if (!std::isfinite(mx)) return kNaN;
  std::vector<double> w(usable);
  double mean = 0.0;
  for (std::size_t s = 0; s < usable; ++s) {
    w[s] = std::exp(terms[s] - mx);
    mean += w[s] / static_cast<double>(usable);
  }
  return batch_means_se(w, kBatches) / mean;
}

MethodRow summarize(const std::string& method, const std::vector<EstimateCell>& cells, const Bounds& bounds) {
  MethodRow row;
  row.method = method;
  std::vector<double> values;
  double se_sum = 0.0, it_sum = 0.0;
  int se_count = 0;
  for (const auto& c : cells) {
    if (!c.ok) {
      ++row.failed;
      if (row.first_error.empty()) row.first_error = c.error;
      continue;
    }
    ++row.succeeded;
    values.push_back(c.value);
    it_sum += c.iterations;
    if (std::isfinite(c.se_bm)) {
      se_sum += c.se_bm;
      ++se_count;
    }
  }
  if (values.empty()) {
    row.mean = row.nse = row.se_bm = row.pct_in_bounds = row.mean_iterations = kNaN;
    return row;
  }
  double mean = 0.0;
  for (double v : values) mean += v / static_cast<double>(values.size());
  row.mean = mean;
  row.nse = values.size() >= 2 ? nse(values) : kNaN;
  row.se_bm = se_count ? se_sum / se_count : kNaN;
  row.pct_in_bounds = percent_in_bounds(values, bounds);
  row.mean_iterations = it_sum / static_cast<double>(values.size());
  return row;
}

}  // namespace

int ResultsTable::failed_cells() const {
  int n = 0;
  for (const auto& row : rows) n += row.failed;
  return n;
}

LoadedModel load_model(const ExperimentConfig& c) {
  c.validate();
  LoadedModel out;
  if (is_var(c.model)) {
    VarData d = var_data(c);
    out.summary = describe(d);
    const double v = c.prior_v.value_or(10.0);
    const Eigen::Index N = d.N();
    const int p = d.p;
    if (c.model == "var-conjugate")
      out.kernel = std::make_shared<VarConjugateModel>(std::move(d), VarConjugatePrior::standard(N, p, v));
    else
      out.kernel = std::make_shared<VarIndependentModel>(std::move(d), VarIndependentPrior::standard(N, p, v));
  } else if (is_sfm(c.model)) {
    SfmData d = sfm_data(c);
    out.summary = describe(d);
    const double v = c.prior_v.value_or(100.0);
    const Eigen::Index k = d.k();
    if (c.model == "sfm-gamma")
      out.kernel = std::make_shared<SfmGammaModel>(std::move(d), SfmGammaPrior::standard(k, v));
    else
      out.kernel = std::make_shared<SfmExpModel>(std::move(d), SfmExpPrior::standard(k, v), c.model == "sfm-exp-cdl");
  } else if (is_lpm(c.model)) {
    LpmData d = lpm_data(c);
    out.summary = describe(d);
    LpmPrior prior = LpmPrior::standard(d.k(), d.m());
    if (c.prior_v) prior.V_beta = *c.prior_v * Mat::Identity(d.k(), d.k());
    out.kernel = std::make_shared<LpmModel>(std::move(d), std::move(prior), c.model == "lpm-cdl");
  } else {
    GaussianMeanToy::Spec s = toy_spec(c);
    out.summary = "toy data: n = " + std::to_string(s.y.size()) + " observations\n";
    out.kernel = std::make_shared<GaussianMeanToy>(std::move(s));
  }
  return out;
}

std::string synthetic_csv(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.data = "synthetic";
  c.validate();
  if (is_var(c.model)) return var_to_csv(var_data(c));
  if (is_sfm(c.model)) return sfm_to_csv(sfm_data(c));
  if (is_lpm(c.model)) return lpm_to_csv(lpm_data(c));
  std::string out = "y\n";
  for (double y : toy_spec(c).y) out += std::to_string(y) + "\n";
  return out;
}

std::uint64_t chain_seed(std::uint64_t base, int repetition) {
  return Rng::derive_seed(base, {static_cast<std::uint64_t>(repetition), hash_label("chain")});
}

std::uint64_t estimator_seed(std::uint64_t base, int repetition, const std::string& method) {
  return Rng::derive_seed(base, {static_cast<std::uint64_t>(repetition), hash_label(method)});
}

MddEstimate run_estimator(const std::string& method, const ModelKernel& model, const ChainEvaluation& chain,
                          const std::optional<VBResult>& vb, const ExperimentConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  const PosteriorDrawSet& draws = *chain.draws;
  const auto dash = method.find('-');
  const std::string kind = dash == std::string::npos ? method : method.substr(0, dash);
  const std::string weight = dash == std::string::npos ? "" : method.substr(dash + 1);
  if (method == "chm") return chm_estimate(model, chain, c.draws_is, rng);
  if (method == "chib") {
    ChibOptions o;
    o.reduced_run_length = c.chib_reduced;
    return chib_estimate(model, chain, o, rng.next_u64());
  }

  WeightingPtr w;
  if (weight == "vb") {
    if (!vb) throw EstimationError("VB fit unavailable");
    w = make_vb_weighting(*vb);
  } else if (weight == "pmd") {
    w = make_pmd_weighting(model, draws, c.pmd_states);
  } else if (weight == "geweke") {
    w = make_geweke_weighting(model.layout(), draws, c.geweke_alpha);
  } else if (weight == "normal") {
    w = make_geweke_weighting(model.layout(), draws, 0.0);
  } else if (weight == "swz") {
    SwzOptions o;
    o.kernel_quantile = c.swz_quantile;
    o.mc_draws = c.swz_draws;
    w = make_swz_weighting(model, chain, o, rng);
  } else if (weight == "prior") {
    w = make_prior_weighting(model);
  } else {
    throw ModelConfigError("unknown estimator '" + method + "'");
  }

  MddEstimate est;
  if (kind == "ris") {
    est = ris_estimate(chain, *w);
  } else if (kind == "bs") {
    BridgeOptions o;
    o.draws_o = c.draws_o;
    est = bs_estimate(model, chain, *w, o, rng);
  } else if (kind == "is") {
    est = is_estimate(model, *w, c.draws_is, rng);
  } else {
    throw ModelConfigError("unknown estimator '" + method + "'");
  }
  est.method = method;
  return est;
}

ResultsTable run_experiment(const ExperimentConfig& config) {
  const LoadedModel m = load_model(config);
  return run_experiment(config, *m.kernel);
}

ResultsTable run_experiment(const ExperimentConfig& c, const ModelKernel& model) {
  c.validate();
  ResultsTable table;
  table.model = model.name();
  table.repetitions = c.repetitions;
  table.draws = c.draws;
  table.seed = c.seed;

  std::optional<VBResult> vb;
  try {
    vb = model.fit_vb({});
    table.vb_status = vb->status;
  } catch (const std::exception& e) {
    table.vb_status = std::string("FAILED(") + e.what() + ")";
  }
  if (const auto exact = model.exact_log_mdd()) table.benchmarks.push_back({"exact", *exact});
  if (vb) {
    table.benchmarks.push_back({"vblb", vb->elbo});
    table.bounds.lower = vb->elbo;
  }
  if (c.upper_bound) {
    table.benchmarks.push_back({"upper", *c.upper_bound});
    table.bounds.upper = *c.upper_bound;
  }

  const std::size_t n_methods = c.estimators.size();
  table.cells.assign(n_methods, std::vector<EstimateCell>(static_cast<std::size_t>(c.repetitions)));
  ChainConfig chain_cfg;
  chain_cfg.draws = c.draws;
  chain_cfg.burn_in = c.burn_in;
  chain_cfg.thin = c.thin;

  auto run_repetition = [&](int rep) {
    const auto r = static_cast<std::size_t>(rep);
    PosteriorDrawSet draws;
    ChainEvaluation ev;
    try {
      draws = model.sample_posterior(chain_cfg, chain_seed(c.seed, rep));
      ev = evaluate_chain(model, draws);
    } catch (const std::exception& e) {
      for (std::size_t j = 0; j < n_methods; ++j) table.cells[j][r].error = std::string("chain: ") + e.what();
      return;
    }
    for (std::size_t j = 0; j < n_methods; ++j) {
      EstimateCell& cell = table.cells[j][r];
      const std::string& method = c.estimators[j];
      try {
        const MddEstimate est = run_estimator(method, model, ev, vb, c, estimator_seed(c.seed, rep, method));
        if (!std::isfinite(est.log_mdd)) throw EstimationError("non-finite estimate");
        cell.ok = true;
        cell.value = est.log_mdd;
        cell.iterations = est.iterations;
        const bool per_draw = method.rfind("ris-", 0) == 0 || method.rfind("is-", 0) == 0;
        cell.se_bm = per_draw ? log_mean_se(est.log_terms) : kNaN;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };

  const int threads = std::max(1, std::min(c.threads > 0 ? c.threads : static_cast<int>(std::thread::hardware_concurrency()),
                                           c.repetitions));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int rep = next++; rep < c.repetitions; rep = next++) run_repetition(rep);
    });
  for (auto& t : pool) t.join();

  for (std::size_t j = 0; j < n_methods; ++j) table.rows.push_back(summarize(c.estimators[j], table.cells[j], table.bounds));
  return table;
}

}  // namespace vbmdd
