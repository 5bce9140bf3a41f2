#pragma once

#include "vbmdd/models/sfm.hpp"

namespace vbmdd::sfm_detail {

/// Per-firm aggregates used by the variational updates.
struct PanelStats {
  Mat xx;    // x'x
  Vec xy;    // x'y
  Mat xf;    // N x k, row i = sum_t x_it
  Vec ysum;  // N, sum_t y_it
};

PanelStats panel_stats(const SfmData& d);

/// Least-squares beta, used to start chains and VB iterations.
Vec ols_beta(const SfmData& d);

/// sum_t (y_it - x_it beta) per firm.
Vec firm_residual_sums(const SfmData& d, const Vec& beta);

/// E sum_it (y_it - x_it beta - sign u_i)^2 under independent q(beta) = N(b, V)
/// and q(u) with means u1 and second moments u2.
double expected_sse(const SfmData& d, const PanelStats& s, const Vec& b, const Mat& V, const Vec& u1, const Vec& u2);

/// q(beta) update given E[h] and E[u]: returns the mean, writes the covariance.
Vec update_beta(const SfmData& d, const PanelStats& s, const Vec& prior_mean, const Mat& prior_prec, double h,
                const Vec& u1, Mat& cov);

/// Normal conditional of beta given h and u.
BlockDensityPtr beta_conditional(const SfmData& d, const Mat& xx, const Mat& prior_prec, const Vec& prior_mean,
                                 double h, const Vec& u);

/// Sum of squares of y - x beta - sign u_i.
double residual_ss(const SfmData& d, const Vec& beta, const Vec& u);

void validate_normal_prior(const Vec& beta, const Mat& V, Eigen::Index k);

}  // namespace vbmdd::sfm_detail
