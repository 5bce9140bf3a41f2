#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vbmdd/error.hpp"
#include "vbmdd/harness/experiment.hpp"
#include "vbmdd/harness/output.hpp"

using namespace vbmdd;

namespace {

struct Overrides {
  std::string config_path;
  std::vector<std::string> settings;
  std::optional<std::string> model, data, out, estimators;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps, draws, threads;
  std::optional<double> upper_bound;
  std::vector<std::string> formats;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "Experiment file of key = value lines");
  app->add_option("--set", o.settings, "Extra key=value settings applied after the config file");
  app->add_option("--model", o.model, "Model family");
  app->add_option("--data", o.data, "'synthetic' or a CSV path");
  app->add_option("--seed", o.seed, "Base seed");
  app->add_option("--reps", o.reps, "Repetitions");
  app->add_option("--draws", o.draws, "Posterior draws per chain");
  app->add_option("--threads", o.threads, "Worker threads (0: all cores)");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--format", o.formats, "csv, json and/or svg")->delimiter(',');
  app->add_option("--estimators", o.estimators, "Comma-separated estimator names");
  app->add_option("--upper-bound", o.upper_bound, "Upper benchmark bound for %-in-bounds");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  for (const auto& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ModelConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.model) c.model = *o.model;
  if (o.data) c.data = *o.data;
  if (o.seed) c.seed = *o.seed;
  if (o.reps) c.repetitions = *o.reps;
  if (o.draws) c.draws = *o.draws;
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.out = *o.out;
  if (!o.formats.empty()) c.formats = o.formats;
  if (o.estimators) apply_setting(c, "estimators", *o.estimators);
  if (o.upper_bound) c.upper_bound = *o.upper_bound;
  c.validate();
  return c;
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw ArgumentError("cannot write '" + path.string() + "'");
  std::cerr << "wrote " << path.string() << "\n";
}

nlohmann::json matrix_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

int cmd_synth(const Overrides& o) {
  const ExperimentConfig c = resolve(o);
  const std::string csv = synthetic_csv(c);
  if (o.out)
    write_text(c.out, "data.csv", csv);
  else
    std::cout << csv;
  return 0;
}

int cmd_fit_vb(const Overrides& o) {
  const ExperimentConfig c = resolve(o);
  const LoadedModel m = load_model(c);
  std::cerr << m.summary;
  const VBResult vb = m.kernel->fit_vb({});
  nlohmann::json doc{{"schema_version", ResultsTable::kSchemaVersion},
                     {"model", m.kernel->name()},
                     {"elbo", vb.elbo},
                     {"iterations", vb.iterations},
                     {"converged", vb.converged},
                     {"status", vb.status},
                     {"elbo_trace", vb.elbo_trace}};
  for (const auto& h : vb.hyper) doc["hyper"][h.name] = matrix_json(h.value);
  if (const auto exact = m.kernel->exact_log_mdd()) doc["exact_log_mdd"] = *exact;
  const std::string text = doc.dump(2) + "\n";
  if (o.out)
    write_text(c.out, "vb.json", text);
  else
    std::cout << text;
  return 0;
}

int cmd_sample(const Overrides& o) {
  const ExperimentConfig c = resolve(o);
  const LoadedModel m = load_model(c);
  std::cerr << m.summary;
  ChainConfig cfg;
  cfg.draws = c.draws;
  cfg.burn_in = c.burn_in;
  cfg.thin = c.thin;
  const PosteriorDrawSet d = m.kernel->sample_posterior(cfg, chain_seed(c.seed, 0));
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << "\n";
  std::ostringstream os;
  os << std::setprecision(17);
  bool first = true;
  for (const auto& b : m.kernel->layout().blocks())
    for (Eigen::Index j = 0; j < b.size; ++j) {
      os << (first ? "" : ",") << b.name << "[" << j << "]";
      first = false;
    }
  os << "\n";
  for (Eigen::Index s = 0; s < d.size(); ++s) {
    for (Eigen::Index j = 0; j < d.theta.rows(); ++j) os << (j ? "," : "") << d.theta(j, s);
    os << "\n";
  }
  if (o.out)
    write_text(c.out, "draws.csv", os.str());
  else
    std::cout << os.str();
  return 0;
}

int cmd_experiment(const Overrides& o, bool single) {
  ExperimentConfig c = resolve(o);
  if (single) c.repetitions = 1;
  const LoadedModel m = load_model(c);
  std::cerr << m.summary;
  const ResultsTable table = run_experiment(c, *m.kernel);
  std::cout << table_to_csv(table);
  for (const auto& path : emit_outputs(table, c.out, c.formats)) std::cerr << "wrote " << path << "\n";
  const int failed = table.failed_cells();
  if (failed) std::cerr << failed << " estimator cell(s) failed\n";
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal data density estimation with variational Bayes weighting densities"};
  app.require_subcommand(1);
  Overrides o;
  CLI::App* synth = app.add_subcommand("synth", "Write synthetic data in the family's CSV layout");
  CLI::App* fit = app.add_subcommand("fit-vb", "Fit the variational approximation and print its parameters");
  CLI::App* sample = app.add_subcommand("sample", "Draw one posterior chain");
  CLI::App* estimate = app.add_subcommand("estimate", "Run the estimators on a single chain");
  CLI::App* experiment = app.add_subcommand("experiment", "Repeat chains and estimators and tabulate the results");
  for (CLI::App* sub : {synth, fit, sample, estimate, experiment}) add_common(sub, o);
  CLI11_PARSE(app, argc, argv);
  try {
    if (synth->parsed()) return cmd_synth(o);
    if (fit->parsed()) return cmd_fit_vb(o);
    if (sample->parsed()) return cmd_sample(o);
    if (estimate->parsed()) return cmd_experiment(o, true);
    return cmd_experiment(o, false);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
