#include "vbmdd/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "vbmdd/error.hpp"

namespace vbmdd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ModelConfigError("config: " + key + " = '" + value + "' is not a valid number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ModelConfigError("config: " + key + " = '" + value + "' is not a boolean");
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::string number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

const std::vector<std::string>& registered_estimators() {
  static const std::vector<std::string> names{"ris-vb",  "bs-vb",     "is-vb",  "ris-pmd", "bs-pmd",
                                              "is-pmd",  "ris-geweke", "bs-normal", "ris-swz", "bs-swz",
                                              "ris-prior", "is-prior", "chm",    "chib"};
  return names;
}

const std::vector<std::string>& registered_models() {
  static const std::vector<std::string> names{"var-conjugate", "var-independent", "sfm-exp", "sfm-exp-cdl",
                                              "sfm-gamma",     "lpm",             "lpm-cdl", "toy"};
  return names;
}

void ExperimentConfig::validate() const {
  const auto& models = registered_models();
  if (std::find(models.begin(), models.end(), model) == models.end())
    throw ModelConfigError("config: unknown model '" + model + "'");
  const auto& known = registered_estimators();
  if (estimators.empty()) throw ModelConfigError("config: at least one estimator is required");
  for (const auto& e : estimators)
    if (std::find(known.begin(), known.end(), e) == known.end())
      throw ModelConfigError("config: unknown estimator '" + e + "'");
  if (repetitions < 1) throw ModelConfigError("config: repetitions must be at least 1");
  if (draws < 1 || burn_in < 0 || thin < 1 || draws_o < 0 || draws_is < 1)
    throw ModelConfigError("config: draw counts must be positive");
  if (threads < 0) throw ModelConfigError("config: threads must be non-negative");
  if (!(geweke_alpha >= 0.0 && geweke_alpha < 1.0)) throw ModelConfigError("config: geweke.alpha must lie in [0, 1)");
  if (pmd_states < 1 || swz_draws < 1 || chib_reduced < 0) throw ModelConfigError("config: invalid method options");
  if (!(swz_quantile > 0.0 && swz_quantile < 1.0)) throw ModelConfigError("config: swz.quantile must lie in (0, 1)");
  if (prior_v && !(*prior_v > 0.0)) throw ModelConfigError("config: prior.v must be positive");
  for (const auto& f : formats)
    if (f != "csv" && f != "json" && f != "svg") throw ModelConfigError("config: unknown format '" + f + "'");
  if (synth.N < 1 || synth.T < 1 || synth.p < 1 || synth.k < 1 || synth.m < 1 || synth.n < 1)
    throw ModelConfigError("config: synthetic dimensions must be positive");
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  using Setter = std::function<void(const std::string&)>;
  auto integer = [&](int& dst) { return Setter([&dst, &key](const std::string& s) { dst = parse_number<int>(key, s); }); };
  auto real = [&](double& dst) {
    return Setter([&dst, &key](const std::string& s) { dst = parse_number<double>(key, s); });
  };
  const std::map<std::string, Setter> table{
      {"model", [&](const std::string& s) { c.model = s; }},
      {"data", [&](const std::string& s) { c.data = s; }},
      {"prior.v", [&](const std::string& s) { c.prior_v = parse_number<double>(key, s); }},
      {"sfm.cost", [&](const std::string& s) { c.sfm_cost = parse_bool(key, s); }},
      {"synth.seed", [&](const std::string& s) { c.synth.seed = parse_number<std::uint64_t>(key, s); }},
      {"synth.N", integer(c.synth.N)},
      {"synth.T", integer(c.synth.T)},
      {"synth.p", integer(c.synth.p)},
      {"synth.k", integer(c.synth.k)},
      {"synth.m", integer(c.synth.m)},
      {"synth.n", integer(c.synth.n)},
      {"synth.sigma", real(c.synth.sigma)},
      {"synth.lambda", real(c.synth.lambda)},
      {"synth.theta", real(c.synth.theta)},
      {"estimators", [&](const std::string& s) { c.estimators = split_list(s); }},
      {"draws", integer(c.draws)},
      {"burn_in", integer(c.burn_in)},
      {"thin", integer(c.thin)},
      {"draws_o", integer(c.draws_o)},
      {"draws_is", integer(c.draws_is)},
      {"repetitions", integer(c.repetitions)},
      {"seed", [&](const std::string& s) { c.seed = parse_number<std::uint64_t>(key, s); }},
      {"threads", integer(c.threads)},
      {"upper_bound",
       [&](const std::string& s) {
         if (s.empty() || s == "none")
           c.upper_bound.reset();
         else
           c.upper_bound = parse_number<double>(key, s);
       }},
      {"geweke.alpha", real(c.geweke_alpha)},
      {"pmd.states", integer(c.pmd_states)},
      {"swz.quantile", real(c.swz_quantile)},
      {"swz.draws", integer(c.swz_draws)},
      {"chib.reduced", integer(c.chib_reduced)},
      {"out", [&](const std::string& s) { c.out = s; }},
      {"formats", [&](const std::string& s) { c.formats = split_list(s); }},
  };
  const auto it = table.find(key);
  if (it == table.end()) throw ModelConfigError("config: unknown key '" + key + "'");
  it->second(v);
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ModelConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    apply_setting(c, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "model = " << c.model << "\n"
     << "data = " << c.data << "\n";
  if (c.prior_v) os << "prior.v = " << number(*c.prior_v) << "\n";
  os << "sfm.cost = " << (c.sfm_cost ? "true" : "false") << "\n"
     << "synth.seed = " << c.synth.seed << "\n"
     << "synth.N = " << c.synth.N << "\n"
     << "synth.T = " << c.synth.T << "\n"
     << "synth.p = " << c.synth.p << "\n"
     << "synth.k = " << c.synth.k << "\n"
     << "synth.m = " << c.synth.m << "\n"
     << "synth.n = " << c.synth.n << "\n"
     << "synth.sigma = " << number(c.synth.sigma) << "\n"
     << "synth.lambda = " << number(c.synth.lambda) << "\n"
     << "synth.theta = " << number(c.synth.theta) << "\n"
     << "estimators = " << join(c.estimators) << "\n"
     << "draws = " << c.draws << "\n"
     << "burn_in = " << c.burn_in << "\n"
     << "thin = " << c.thin << "\n"
     << "draws_o = " << c.draws_o << "\n"
     << "draws_is = " << c.draws_is << "\n"
     << "repetitions = " << c.repetitions << "\n"
     << "seed = " << c.seed << "\n"
     << "threads = " << c.threads << "\n";
  if (c.upper_bound) os << "upper_bound = " << number(*c.upper_bound) << "\n";
  os << "geweke.alpha = " << number(c.geweke_alpha) << "\n"
     << "pmd.states = " << c.pmd_states << "\n"
     << "swz.quantile = " << number(c.swz_quantile) << "\n"
     << "swz.draws = " << c.swz_draws << "\n"
     << "chib.reduced = " << c.chib_reduced << "\n"
     << "out = " << c.out << "\n"
     << "formats = " << join(c.formats) << "\n";
  return os.str();
}

}  // namespace vbmdd
