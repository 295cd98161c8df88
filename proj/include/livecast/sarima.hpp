#pragma once

#include <string>
#include <vector>

#include "livecast/error.hpp"

namespace livecast::stats {

// (p, d, q) x (P, D, Q)_m
struct SarimaOrder {
  int p = 0, d = 0, q = 0;
  int P = 0, D = 0, Q = 0;
  int m = 1;

  void validate() const;
  bool seasonal() const { return P > 0 || D > 0 || Q > 0; }
  std::string str() const;
};

// Single-recursion form of the full seasonal model,
//   y_t = intercept - sum_j phi[j] y_{t-1-j} + a_t + sum_{i>=1} theta[i] a_{t-i},
// where phi comes from expanding phi_p(B) (1-B)^d phi_P(B^m) (1-B^m)^D and
// theta from theta_q(B) theta_Q(B^m). theta[0] is always 1 (the a_t term).
struct ReducedForm {
  std::vector<double> phi;    // length p + d + m*(P + D)
  std::vector<double> theta;  // length q + m*Q + 1
  double intercept = 0.0;
  double mu = 0.0;  // mean of the differenced series; doubles as history padding
};

// Expand the factored polynomials. Sign conventions: AR factors are
// (1 - phi_1 B - ...), MA factors (1 + theta_1 B + ...); the stored phi array
// is the expanded AR polynomial without its leading 1.
ReducedForm expand_reduced_form(const SarimaOrder& order, const std::vector<double>& phi,
                                const std::vector<double>& theta, const std::vector<double>& seasonal_phi,
                                const std::vector<double>& seasonal_theta, double mu);

// Apply (1-B)^d then (1-B^m)^D. Output length shrinks by d + m*D.
std::vector<double> difference(const std::vector<double>& series, int d, int D, int m);

// Inverse of difference(). `initial` must hold the first d + m*D values of the
// original series.
std::vector<double> integrate(const std::vector<double>& diffed, const std::vector<double>& initial,
                              int d, int D, int m);

struct SarimaModel {
  SarimaOrder order;
  std::vector<double> phi, theta;                    // non-seasonal factors
  std::vector<double> seasonal_phi, seasonal_theta;  // seasonal factors
  double mu = 0.0;
  ReducedForm rf;

  std::string to_json() const;
  static SarimaModel from_json(const std::string& text);
};

struct FitOptions {
  int long_ar_order = 0;  // 0 = max(20, 2(p+q) + m(P+Q))
};

// Two-stage least squares: a long autoregression estimates the innovation
// sequence, then the model coefficients are regressed on lagged values and
// lagged innovations (seasonal terms at lags m*j). Throws ConfigError when the
// series is too short (< 10*(p+q+P+Q+1) after differencing needs) and
// CollinearityError when the regression system is singular.
SarimaModel fit(const std::vector<double>& series, const SarimaOrder& order, const FitOptions& opts = {});

// Streaming forecast state: two value rings sized by the reduced polynomials
// (y capacity = |phi|, a capacity = |theta|), plus a committed copy taken at
// the last observation so a feed can rewind speculative forecasts. Total live
// buffer occupancy never exceeds |phi| + |theta|.
class StatState {
 public:
  StatState() = default;
  StatState(const ReducedForm& rf, double pad_value);

  // One-step forecast from the current ring contents (future residuals 0).
  double eval(const ReducedForm& rf) const;

  // Absorb an observation: the residual is observation minus the one-step
  // forecast for that slot, then both rings advance and the state commits.
  void absorb(const ReducedForm& rf, double value);

  // Speculative advance: append (forecast, 0) without committing.
  double forecast_step(const ReducedForm& rf);

  // Replace previously forecast slots with fresh observations: rewind to the
  // committed rings, then absorb each observation in order (its residual is
  // recomputed against the one-step forecast from the corrected prefix).
  // Throws Error if fresh is longer than the outstanding forecast horizon.
  void online_update(const ReducedForm& rf, const std::vector<double>& fresh);

  int outstanding() const { return outstanding_; }
  int buffered_values() const { return static_cast<int>(y_.size()); }
  int buffered_residuals() const { return static_cast<int>(a_.size()); }
  double last_residual() const;

  const std::vector<double>& values_ring() const { return y_; }
  const std::vector<double>& residuals_ring() const { return a_; }

 private:
  void push(std::vector<double>& ring, size_t cap, double v);

  std::vector<double> y_, a_;                      // live rings
  std::vector<double> y_committed_, a_committed_;  // at last observation
  size_t y_cap_ = 0, a_cap_ = 0;
  int outstanding_ = 0;
  double pad_ = 0.0;
};

}  // namespace livecast::stats
