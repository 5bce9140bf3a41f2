#include "vbmdd/stats/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vbmdd/error.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half, centre last).
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the 7-point rule; nodes are kXgk[1], kXgk[3], kXgk[5], kXgk[7].
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  double log_value;
  double log_error;
  int depth;
};

// Maps the working variable u in [ua, ub] to the original variable, returning
// t and ln|dt/du|.
struct Mapping {
  enum Kind { Finite, UpperInf, LowerInf, BothInf } kind;
  double lower, upper, scale;

  double to_original(double u, double& log_jac) const {
    switch (kind) {
      case Finite:
        log_jac = 0.0;
        return u;
      case UpperInf: {
        const double w = 1.0 - u;
        log_jac = std::log(scale) - 2.0 * std::log(w);
        return lower + scale * u / w;
      }
      case LowerInf: {
        const double w = 1.0 - u;
        log_jac = std::log(scale) - 2.0 * std::log(w);
        return upper - scale * u / w;
      }
      case BothInf: {
        const double w = 1.0 - u * u;
        log_jac = std::log(scale) + std::log1p(u * u) - 2.0 * std::log(w);
        return scale * u / w;
      }
    }
    log_jac = 0.0;
    return u;
  }

  // Inverse map, used to place breakpoints.
  double to_working(double t) const {
    switch (kind) {
      case Finite:
        return t;
      case UpperInf: {
        const double r = (t - lower) / scale;
        return r / (1.0 + r);
      }
      case LowerInf: {
        const double r = (upper - t) / scale;
        return r / (1.0 + r);
      }
      case BothInf: {
        const double r = t / scale;
        if (r == 0.0) return 0.0;
        return (std::sqrt(1.0 + 4.0 * r * r) - 1.0) / (2.0 * r);
      }
    }
    return t;
  }
};

Panel evaluate_panel(const std::function<double(double)>& log_f, const Mapping& map, double a, double b,
                     int depth, int& evals) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double lf[15];
  double x[15];
  for (int j = 0; j < 7; ++j) {
    x[2 * j] = centre - half * kXgk[j];
    x[2 * j + 1] = centre + half * kXgk[j];
  }
  x[14] = centre;
  double shift = kNegInf;
  for (int j = 0; j < 15; ++j) {
    double log_jac;
    const double t = map.to_original(x[j], log_jac);
    double v = log_f(t);
    if (std::isnan(v)) v = kNegInf;
    lf[j] = v + log_jac;
    if (!std::isfinite(lf[j])) lf[j] = (lf[j] > 0) ? lf[j] : kNegInf;
    shift = std::max(shift, lf[j]);
  }
  evals += 15;
  if (shift == kNegInf) return {a, b, kNegInf, kNegInf, depth};
  if (shift == std::numeric_limits<double>::infinity())
    throw NumericError("quadrature: integrand is infinite inside the domain");

  auto val = [&](int j) { return std::exp(lf[j] - shift); };
  double kron = kWgk[7] * val(14);
  double gauss = kWg[3] * val(14);
  for (int j = 0; j < 7; ++j) {
    const double pair = val(2 * j) + val(2 * j + 1);
    kron += kWgk[j] * pair;
    if (j % 2 == 1) gauss += kWg[j / 2] * pair;
  }
  const double log_half = std::log(half);
  Panel p{a, b, shift + log_half + std::log(kron), kNegInf, depth};
  const double diff = std::abs(kron - gauss);
  p.log_error = diff > 0.0 ? shift + log_half + std::log(diff) : kNegInf;
  // Guard against accidental Gauss/Kronrod agreement on under-resolved panels.
  p.log_error = std::max(p.log_error, p.log_value + std::log(1e-15));
  return p;
}

}  // namespace

QuadratureResult log_integrate(const std::function<double(double)>& log_f, double lower, double upper,
                               const QuadratureOptions& opts) {
  if (std::isnan(lower) || std::isnan(upper)) throw ArgumentError("quadrature: NaN bound");
  if (!(upper > lower)) {
    if (upper == lower) return {kNegInf, 0.0, 0, true};
    throw ArgumentError("quadrature: upper bound below lower bound");
  }
  if (!(opts.scale > 0.0)) throw ArgumentError("quadrature: scale must be positive");

  Mapping map{Mapping::Finite, lower, upper, opts.scale};
  double ua = lower, ub = upper;
  const bool lo_inf = std::isinf(lower), hi_inf = std::isinf(upper);
  if (lo_inf && hi_inf) {
    map.kind = Mapping::BothInf;
    ua = -1.0;
    ub = 1.0;
  } else if (hi_inf) {
    map.kind = Mapping::UpperInf;
    ua = 0.0;
    ub = 1.0;
  } else if (lo_inf) {
    map.kind = Mapping::LowerInf;
    ua = 0.0;
    ub = 1.0;
  }

  std::vector<double> cuts;
  const int panels = std::max(1, opts.initial_panels);
  for (int i = 0; i <= panels; ++i) cuts.push_back(ua + (ub - ua) * i / panels);
  for (double t : opts.breakpoints) {
    if (!(t > lower && t < upper)) continue;
    const double u = map.to_working(t);
    if (u > ua && u < ub) cuts.push_back(u);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double x, double y) { return std::abs(x - y) < 1e-15; }),
             cuts.end());

  QuadratureResult res;
  std::vector<Panel> active;
  std::vector<Panel> frozen;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    active.push_back(evaluate_panel(log_f, map, cuts[i], cuts[i + 1], 0, res.evaluations));
  }

  auto totals = [&](double& log_val, double& log_err) {
    std::vector<double> v, e;
    for (const auto* set : {&active, &frozen})
      for (const Panel& p : *set) {
        v.push_back(p.log_value);
        e.push_back(p.log_error);
      }
    log_val = log_sum_exp(v);
    log_err = log_sum_exp(e);
  };

  constexpr int kMaxPanels = 4000;
  while (true) {
    double log_val, log_err;
    totals(log_val, log_err);
    res.log_value = log_val;
    res.rel_error = (log_val == kNegInf) ? 0.0 : std::exp(log_err - log_val);
    if (log_val == kNegInf || res.rel_error <= opts.rel_tol) {
      res.converged = true;
      return res;
    }
    if (active.empty() || static_cast<int>(active.size() + frozen.size()) >= kMaxPanels) return res;
    auto worst = std::max_element(active.begin(), active.end(),
                                  [](const Panel& x, const Panel& y) { return x.log_error < y.log_error; });
    Panel p = *worst;
    active.erase(worst);
    if (p.depth >= opts.max_levels) {
      frozen.push_back(p);
      continue;
    }
    const double mid = 0.5 * (p.a + p.b);
    active.push_back(evaluate_panel(log_f, map, p.a, mid, p.depth + 1, res.evaluations));
    active.push_back(evaluate_panel(log_f, map, mid, p.b, p.depth + 1, res.evaluations));
  }
}

std::vector<double> peak_breakpoints(double mode, double sd) {
  std::vector<double> cuts{mode};
  for (double k = 3.0; k <= 48.0; k *= 2.0) {
    cuts.push_back(mode - k * sd);
    cuts.push_back(mode + k * sd);
  }
  return cuts;
}

double quadrature_1d(const std::function<double(double)>& log_f, double lower, double upper,
                     const QuadratureOptions& opts) {
  const QuadratureResult r = log_integrate(log_f, lower, upper, opts);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "quadrature did not converge: achieved relative error " << r.rel_error << " (tolerance "
        << opts.rel_tol << ")";
    throw NumericError(msg.str(), r.log_value);
  }
  return r.log_value;
}

double quadrature_1d(const std::function<double(double)>& log_f, double lower, double upper, double tol) {
  QuadratureOptions opts;
  opts.rel_tol = tol;
  return quadrature_1d(log_f, lower, upper, opts);
}

double integrate_signed(const std::function<double(double)>& f, double lower, double upper,
                        std::vector<double> pivots, const QuadratureOptions& opts) {
  QuadratureOptions o = opts;
  o.breakpoints.insert(o.breakpoints.end(), pivots.begin(), pivots.end());
  auto part = [&](double sign) {
    return log_integrate(
        [&](double t) {
          const double v = sign * f(t);
          return v > 0.0 ? std::log(v) : kNegInf;
        },
        lower, upper, o);
  };
  const QuadratureResult pos = part(1.0);
  const QuadratureResult neg = part(-1.0);
  if (!pos.converged || !neg.converged)
    throw NumericError("signed quadrature did not converge",
                       std::exp(pos.log_value) - std::exp(neg.log_value));
  return std::exp(pos.log_value) - std::exp(neg.log_value);
}

}  // namespace vbmdd
