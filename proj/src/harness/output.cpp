#include "vbmdd/harness/output.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "vbmdd/error.hpp"

namespace vbmdd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "NA" : (x > 0 ? "Inf" : "-Inf");
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

// CSV-safe cell: quotes when the text holds a comma, quote or newline.
std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
  return out + "\"";
}

std::string failed(const std::string& reason) { return "FAILED(" + reason + ")"; }

nlohmann::json jnum(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }
double from_jnum(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw ArgumentError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string table_to_csv(const ResultsTable& t) {
  std::ostringstream os;
  os << "method,succeeded,failed,mean_log_mdd,nse,se_bm,pct_in_bounds,mean_iterations,status\n";
  for (const auto& r : t.rows) {
    const bool none = r.succeeded == 0;
    os << csv_cell(r.method) << "," << r.succeeded << "," << r.failed << ","
       << (none ? csv_cell(failed(r.first_error)) : num(r.mean)) << "," << num(r.nse) << "," << num(r.se_bm) << ","
       << num(r.pct_in_bounds) << "," << num(r.mean_iterations) << ","
       << (r.failed ? csv_cell(failed(r.first_error)) : std::string(r.succeeded < 2 ? "ok (NSE needs 2+ repetitions)" : "ok"))
       << "\n";
  }
  for (const auto& b : t.benchmarks) os << "benchmark:" << b.name << ",,," << num(b.value) << ",,,,,\n";
  return os.str();
}

nlohmann::json table_to_json(const ResultsTable& t) {
  nlohmann::json doc;
  doc["schema_version"] = ResultsTable::kSchemaVersion;
  doc["model"] = t.model;
  doc["repetitions"] = t.repetitions;
  doc["draws"] = t.draws;
  doc["seed"] = t.seed;
  doc["vb_status"] = t.vb_status;
  doc["bounds"] = {{"lower", jnum(t.bounds.lower)}, {"upper", jnum(t.bounds.upper)}};
  doc["benchmarks"] = nlohmann::json::array();
  for (const auto& b : t.benchmarks) doc["benchmarks"].push_back({{"name", b.name}, {"value", jnum(b.value)}});
  doc["methods"] = nlohmann::json::array();
  for (std::size_t j = 0; j < t.rows.size(); ++j) {
    const auto& r = t.rows[j];
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : t.cells.at(j)) {
      if (c.ok)
        cells.push_back({{"value", c.value}, {"iterations", c.iterations}, {"se_bm", jnum(c.se_bm)}});
      else
        cells.push_back({{"error", c.error}});
    }
    doc["methods"].push_back({{"method", r.method},
                              {"succeeded", r.succeeded},
                              {"failed", r.failed},
                              {"mean_log_mdd", jnum(r.mean)},
                              {"nse", jnum(r.nse)},
                              {"se_bm", jnum(r.se_bm)},
                              {"pct_in_bounds", jnum(r.pct_in_bounds)},
                              {"mean_iterations", jnum(r.mean_iterations)},
                              {"first_error", r.first_error},
                              {"cells", cells}});
  }
  return doc;
}

ResultsTable table_from_json(const nlohmann::json& doc) {
  if (doc.value("schema_version", 0) != ResultsTable::kSchemaVersion)
    throw ArgumentError("results JSON: unsupported schema_version");
  ResultsTable t;
  t.model = doc.at("model").get<std::string>();
  t.repetitions = doc.at("repetitions").get<int>();
  t.draws = doc.at("draws").get<int>();
  t.seed = doc.at("seed").get<std::uint64_t>();
  t.vb_status = doc.at("vb_status").get<std::string>();
  const double lo = from_jnum(doc.at("bounds").at("lower")), hi = from_jnum(doc.at("bounds").at("upper"));
  t.bounds.lower = std::isnan(lo) ? -std::numeric_limits<double>::infinity() : lo;
  t.bounds.upper = std::isnan(hi) ? std::numeric_limits<double>::infinity() : hi;
  for (const auto& b : doc.at("benchmarks")) t.benchmarks.push_back({b.at("name"), from_jnum(b.at("value"))});
  for (const auto& m : doc.at("methods")) {
    MethodRow r;
    r.method = m.at("method");
    r.succeeded = m.at("succeeded");
    r.failed = m.at("failed");
    r.mean = from_jnum(m.at("mean_log_mdd"));
    r.nse = from_jnum(m.at("nse"));
    r.se_bm = from_jnum(m.at("se_bm"));
    r.pct_in_bounds = from_jnum(m.at("pct_in_bounds"));
    r.mean_iterations = from_jnum(m.at("mean_iterations"));
    r.first_error = m.at("first_error");
    std::vector<EstimateCell> cells;
    for (const auto& c : m.at("cells")) {
      EstimateCell cell;
      if (c.contains("error")) {
        cell.error = c.at("error");
      } else {
        cell.ok = true;
        cell.value = c.at("value");
        cell.iterations = c.at("iterations");
        cell.se_bm = from_jnum(c.at("se_bm"));
      }
      cells.push_back(std::move(cell));
    }
    t.rows.push_back(std::move(r));
    t.cells.push_back(std::move(cells));
  }
  return t;
}

std::string scatter_to_csv(const ResultsTable& t) {
  std::ostringstream os;
  os << "repetition,method,value\n";
  for (std::size_t j = 0; j < t.rows.size(); ++j)
    for (std::size_t r = 0; r < t.cells[j].size(); ++r) {
      const auto& c = t.cells[j][r];
      os << r << "," << csv_cell(t.rows[j].method) << "," << (c.ok ? num(c.value) : csv_cell(failed(c.error))) << "\n";
    }
  return os.str();
}

std::string scatter_to_svg(const ResultsTable& t) {
  const double panel_w = 640, panel_h = 180, left = 90, top = 30, gap = 40;
  const std::size_t n = t.rows.size();
  const double height = top + n * (panel_h + gap) + 10;
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + panel_w + 20 << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">" << xml_escape(t.model)
     << ": log-MDD estimates by repetition</text>\n";
  for (std::size_t j = 0; j < n; ++j) {
    const double y0 = top + j * (panel_h + gap);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : t.cells[j])
      if (c.ok) lo = std::min(lo, c.value), hi = std::max(hi, c.value);
    for (double b : {t.bounds.lower, t.bounds.upper})
      if (std::isfinite(b) && std::isfinite(lo)) lo = std::min(lo, b), hi = std::max(hi, b);
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double reps = std::max<double>(1.0, static_cast<double>(t.cells[j].size()) - 1.0);
    auto px = [&](double r) { return left + panel_w * r / reps; };
    auto py = [&](double v) { return y0 + panel_h * (hi - v) / (hi - lo); };
    os << "<g>\n<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << panel_w << "\" height=\"" << panel_h
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << left << "\" y=\"" << y0 - 4 << "\">" << xml_escape(t.rows[j].method) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << y0 + 10 << "\" text-anchor=\"end\">" << num(hi) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << y0 + panel_h << "\" text-anchor=\"end\">" << num(lo) << "</text>\n";
    for (double b : {t.bounds.lower, t.bounds.upper})
      if (std::isfinite(b))
        os << "<line x1=\"" << left << "\" x2=\"" << left + panel_w << "\" y1=\"" << py(b) << "\" y2=\"" << py(b)
           << "\" stroke=\"#c33\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t r = 0; r < t.cells[j].size(); ++r) {
      const auto& c = t.cells[j][r];
      if (c.ok)
        os << "<circle cx=\"" << px(static_cast<double>(r)) << "\" cy=\"" << py(c.value)
           << "\" r=\"2.5\" fill=\"#1f5fa8\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> emit_outputs(const ResultsTable& table, const std::string& dir,
                                      const std::vector<std::string>& formats, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ArgumentError("cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = base / name;
    write_file(path, text);
    written.push_back(path.string());
  };
  for (const auto& f : formats) {
    if (f == "csv") {
      emit(stem + ".csv", table_to_csv(table));
      emit(stem + "_scatter.csv", scatter_to_csv(table));
    } else if (f == "json") {
      emit(stem + ".json", table_to_json(table).dump(2) + "\n");
    } else if (f == "svg") {
      emit(stem + "_scatter.svg", scatter_to_svg(table));
    } else {
      throw ArgumentError("unknown output format '" + f + "'");
    }
  }
  return written;
}

}  // namespace vbmdd
