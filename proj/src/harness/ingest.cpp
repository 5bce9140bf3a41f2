#include "vbmdd/harness/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <regex>
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

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (ch == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (ch == ',' && !quoted) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

std::string cell_name(const CsvTable& t, std::size_t row, std::size_t col) {
  return "row " + std::to_string(row + 2) + ", column '" + (col < t.header.size() ? t.header[col] : "?") + "'";
}

double number_at(const CsvTable& t, std::size_t row, std::size_t col) {
  const std::string& s = t.rows[row][col];
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ArgumentError("CSV: " + cell_name(t, row, col) + " is not a finite number: '" + s + "'");
  return v;
}

bool is_iso_date(const std::string& s) {
  static const std::regex re(R"(\d{4}(-\d{2}(-\d{2})?|[Qq][1-4]|-?[Mm]\d{2}))");
  return std::regex_match(s, re);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void require_columns(const CsvTable& t, const std::vector<std::string>& names, const std::string& family) {
  if (t.header.size() < names.size())
    throw ArgumentError(family + " CSV: expected columns " + std::to_string(names.size()) + " or more, got " +
                        std::to_string(t.header.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    if (lower(t.header[j]) != names[j])
      throw ArgumentError(family + " CSV: column " + std::to_string(j + 1) + " must be '" + names[j] + "', found '" +
                          t.header[j] + "'");
  if (t.rows.empty()) throw ArgumentError(family + " CSV: no data rows");
}

// Groups rows by unit and period and checks that every unit covers the same periods.
struct Panel {
  std::vector<std::string> units;
  std::vector<double> periods;
  std::vector<std::size_t> order;  // row indices, unit-major then period
};

Panel balanced_panel(const CsvTable& t, const std::string& family) {
  std::map<std::string, std::map<double, std::size_t>> by_unit;
  std::vector<std::string> first_seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& unit = t.rows[r][0];
    if (unit.empty()) throw ArgumentError(family + " CSV: " + cell_name(t, r, 0) + " is empty");
    const double period = number_at(t, r, 1);
    auto [it, fresh] = by_unit.try_emplace(unit);
    if (fresh) first_seen.push_back(unit);
    if (!it->second.emplace(period, r).second)
      throw ArgumentError(family + " CSV: " + cell_name(t, r, 1) + " repeats a period of unit '" + unit + "'");
  }
  Panel p;
  p.units = first_seen;
  for (const auto& [period, row] : by_unit.at(first_seen.front())) p.periods.push_back(period);
  for (const auto& u : first_seen) {
    const auto& periods = by_unit.at(u);
    if (periods.size() != p.periods.size())
      throw ArgumentError(family + " CSV: unbalanced panel, unit '" + u + "' has " + std::to_string(periods.size()) +
                          " periods, expected " + std::to_string(p.periods.size()));
    std::size_t j = 0;
    for (const auto& [period, row] : periods) {
      if (period != p.periods[j++])
        throw ArgumentError(family + " CSV: unbalanced panel, unit '" + u + "' has different periods");
      p.order.push_back(row);
    }
  }
  return p;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ArgumentError("CSV " + source + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                          " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ArgumentError("CSV " + source + ": empty file");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("CSV: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

VarData ingest_var_csv(const CsvTable& t, int p) {
  if (t.rows.empty()) throw ArgumentError("VAR CSV: no data rows");
  std::size_t first = 0;
  if (lower(t.header[0]) == "date" || is_iso_date(t.rows[0][0])) first = 1;
  if (t.header.size() <= first) throw ArgumentError("VAR CSV: no series columns");
  const Eigen::Index n = static_cast<Eigen::Index>(t.header.size() - first);
  Mat levels(static_cast<Eigen::Index>(t.rows.size()), n);
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t j = first; j < t.header.size(); ++j)
      levels(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j - first)) = number_at(t, r, j);
  if (levels.rows() <= p) throw ArgumentError("VAR CSV: need more rows than lags");
  return VarData::from_levels(levels, p);
}

SfmData ingest_sfm_csv(const CsvTable& t, int sign) {
  require_columns(t, {"firm_id", "period", "y"}, "SFM");
  if (t.header.size() < 4) throw ArgumentError("SFM CSV: need at least one regressor column after y");
  const Panel panel = balanced_panel(t, "SFM");
  SfmData d;
  d.N = static_cast<Eigen::Index>(panel.units.size());
  d.T = static_cast<Eigen::Index>(panel.periods.size());
  d.sign = sign;
  const Eigen::Index k = static_cast<Eigen::Index>(t.header.size() - 3);
  d.y.resize(d.N * d.T);
  d.x.resize(d.N * d.T, k);
  for (std::size_t o = 0; o < panel.order.size(); ++o) {
    const std::size_t r = panel.order[o];
    const auto i = static_cast<Eigen::Index>(o);
    d.y(i) = number_at(t, r, 2);
    for (Eigen::Index j = 0; j < k; ++j) d.x(i, j) = number_at(t, r, static_cast<std::size_t>(3 + j));
  }
  d.validate();
  return d;
}

LpmData ingest_lpm_csv(const CsvTable& t) {
  require_columns(t, {"subject_id", "period", "count"}, "LPM");
  const Panel panel = balanced_panel(t, "LPM");
  std::vector<std::size_t> xcols, zcols;
  std::optional<std::size_t> offset;
  for (std::size_t j = 3; j < t.header.size(); ++j) {
    const std::string name = lower(t.header[j]);
    if (name == "offset")
      offset = j;
    else if (name.rfind("z_", 0) == 0)
      zcols.push_back(j);
    else
      xcols.push_back(j);
  }
  if (xcols.empty()) throw ArgumentError("LPM CSV: need at least one covariate column");
  LpmData d;
  d.N = static_cast<Eigen::Index>(panel.units.size());
  d.T = static_cast<Eigen::Index>(panel.periods.size());
  const Eigen::Index rows = d.N * d.T;
  d.y.resize(rows);
  d.X.resize(rows, static_cast<Eigen::Index>(xcols.size()));
  d.Z = zcols.empty() ? Mat(Mat::Ones(rows, 1)) : Mat(rows, static_cast<Eigen::Index>(zcols.size()));
  d.a = offset ? Vec(rows) : LpmData::default_offsets(d.N, d.T);
  for (std::size_t o = 0; o < panel.order.size(); ++o) {
    const std::size_t r = panel.order[o];
    const auto i = static_cast<Eigen::Index>(o);
    d.y(i) = number_at(t, r, 2);
    if (d.y(i) < 0.0 || d.y(i) != std::floor(d.y(i)))
      throw ArgumentError("LPM CSV: " + cell_name(t, r, 2) + " is not a non-negative integer count");
    for (std::size_t j = 0; j < xcols.size(); ++j) d.X(i, static_cast<Eigen::Index>(j)) = number_at(t, r, xcols[j]);
    for (std::size_t j = 0; j < zcols.size(); ++j) d.Z(i, static_cast<Eigen::Index>(j)) = number_at(t, r, zcols[j]);
    if (offset) d.a(i) = number_at(t, r, *offset);
  }
  d.validate();
  return d;
}

std::string var_to_csv(const VarData& d) {
  const Eigen::Index n = d.N();
  std::ostringstream os;
  for (Eigen::Index j = 0; j < n; ++j) os << (j ? "," : "") << "y" << (j + 1);
  os << "\n";
  // Presample levels are the lags in the first regressor row, oldest first.
  for (int l = d.p; l >= 1; --l) {
    for (Eigen::Index j = 0; j < n; ++j) os << (j ? "," : "") << fmt(d.X(0, 1 + (l - 1) * n + j));
    os << "\n";
  }
  for (Eigen::Index t = 0; t < d.T(); ++t) {
    for (Eigen::Index j = 0; j < n; ++j) os << (j ? "," : "") << fmt(d.Y(t, j));
    os << "\n";
  }
  return os.str();
}

std::string sfm_to_csv(const SfmData& d) {
  std::ostringstream os;
  os << "firm_id,period,y";
  for (Eigen::Index j = 0; j < d.k(); ++j) os << ",x" << (j + 1);
  os << "\n";
  for (Eigen::Index i = 0; i < d.N; ++i)
    for (Eigen::Index t = 0; t < d.T; ++t) {
      const Eigen::Index r = i * d.T + t;
      os << (i + 1) << "," << (t + 1) << "," << fmt(d.y(r));
      for (Eigen::Index j = 0; j < d.k(); ++j) os << "," << fmt(d.x(r, j));
      os << "\n";
    }
  return os.str();
}

std::string lpm_to_csv(const LpmData& d) {
  std::ostringstream os;
  os << "subject_id,period,count";
  for (Eigen::Index j = 0; j < d.k(); ++j) os << ",x" << (j + 1);
  for (Eigen::Index j = 0; j < d.m(); ++j) os << ",z_" << (j + 1);
  os << ",offset\n";
  for (Eigen::Index i = 0; i < d.N; ++i)
    for (Eigen::Index t = 0; t < d.T; ++t) {
      const Eigen::Index r = i * d.T + t;
      os << (i + 1) << "," << (t + 1) << "," << fmt(d.y(r));
      for (Eigen::Index j = 0; j < d.k(); ++j) os << "," << fmt(d.X(r, j));
      for (Eigen::Index j = 0; j < d.m(); ++j) os << "," << fmt(d.Z(r, j));
      os << "," << fmt(d.a(r)) << "\n";
    }
  return os.str();
}

std::string describe(const VarData& d) {
  std::ostringstream os;
  os << "VAR data: N = " << d.N() << " series, T = " << d.T() << " effective periods, p = " << d.p << " lags\n";
  for (Eigen::Index j = 0; j < d.N(); ++j) {
    const double m = d.Y.col(j).mean();
    const double sd = std::sqrt((d.Y.col(j).array() - m).square().sum() / std::max<double>(1.0, d.T() - 1.0));
    os << "  y" << (j + 1) << ": mean " << m << ", sd " << sd << "\n";
  }
  return os.str();
}

std::string describe(const SfmData& d) {
  std::ostringstream os;
  os << "SFM data: N = " << d.N << " firms, T = " << d.T << " periods, k = " << d.k() << " regressors, "
     << (d.sign < 0 ? "production" : "cost") << " frontier\n"
     << "  y: mean " << d.y.mean() << ", min " << d.y.minCoeff() << ", max " << d.y.maxCoeff() << "\n";
  return os.str();
}

std::string describe(const LpmData& d) {
  std::ostringstream os;
  os << "LPM data: N = " << d.N << " subjects, T = " << d.T << " periods, k = " << d.k() << " covariates, m = "
     << d.m() << " random effects\n"
     << "  counts: mean " << d.y.mean() << ", max " << d.y.maxCoeff() << ", zeros "
     << (d.y.array() == 0.0).count() << "\n";
  return os.str();
}

}  // namespace vbmdd
