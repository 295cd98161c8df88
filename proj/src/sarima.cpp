#include "livecast/sarima.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace livecast::stats {

namespace {

// Coefficient-vector polynomial product (index = power of the lag operator).
std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Solve the symmetric positive system G x = r by Gaussian elimination with
// partial pivoting. G is destroyed.
std::vector<double> solve_system(std::vector<std::vector<double>>& G, std::vector<double> r) {
  const int n = static_cast<int>(r.size());
  double max_diag = 0.0;
  for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::fabs(G[i][i]));
  if (max_diag == 0.0) throw CollinearityError("regression matrix is zero");
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row)
      if (std::fabs(G[row][col]) > std::fabs(G[pivot][col])) pivot = row;
    if (std::fabs(G[pivot][col]) < 1e-10 * max_diag)
      throw CollinearityError("regression matrix is singular (column " + std::to_string(col) + ")");
    std::swap(G[pivot], G[col]);
    std::swap(r[pivot], r[col]);
    for (int row = col + 1; row < n; ++row) {
      const double f = G[row][col] / G[col][col];
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) G[row][k] -= f * G[col][k];
      r[row] -= f * r[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int row = n - 1; row >= 0; --row) {
    double s = r[row];
    for (int k = row + 1; k < n; ++k) s -= G[row][k] * x[k];
    x[row] = s / G[row][row];
  }
  return x;
}

// Ordinary least squares of target on the given regressor columns (each
// column has the same length as target). Returns the coefficient vector.
std::vector<double> ols(const std::vector<std::vector<double>>& cols, const std::vector<double>& target) {
  const int k = static_cast<int>(cols.size());
  const size_t n = target.size();
  std::vector<std::vector<double>> G(k, std::vector<double>(k, 0.0));
  std::vector<double> r(k, 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      double s = 0.0;
      const double* a = cols[i].data();
      const double* b = cols[j].data();
      for (size_t t = 0; t < n; ++t) s += a[t] * b[t];
      G[i][j] = G[j][i] = s;
    }
    double s = 0.0;
    for (size_t t = 0; t < n; ++t) s += cols[i][t] * target[t];
    r[i] = s;
  }
  return solve_system(G, r);
}

}  // namespace

void SarimaOrder::validate() const {
  if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0) throw ConfigError("negative order component");
  if (m < 1) throw ConfigError("seasonal period must be >= 1");
  if (seasonal() && m < 2) throw ConfigError("seasonal components need period >= 2");
}

std::string SarimaOrder::str() const {
  std::ostringstream os;
  os << '(' << p << ',' << d << ',' << q << ')';
  if (seasonal()) os << '(' << P << ',' << D << ',' << Q << ',' << m << ')';
  return os.str();
}

ReducedForm expand_reduced_form(const SarimaOrder& order, const std::vector<double>& phi,
                                const std::vector<double>& theta, const std::vector<double>& seasonal_phi,
                                const std::vector<double>& seasonal_theta, double mu) {
  order.validate();
  if (static_cast<int>(phi.size()) != order.p || static_cast<int>(theta.size()) != order.q ||
      static_cast<int>(seasonal_phi.size()) != order.P || static_cast<int>(seasonal_theta.size()) != order.Q)
    throw ConfigError("coefficient count does not match order " + order.str());

  std::vector<double> ar{1.0};
  {
    std::vector<double> factor(order.p + 1, 0.0);
    factor[0] = 1.0;
    for (int j = 0; j < order.p; ++j) factor[j + 1] = -phi[j];
    ar = poly_mul(ar, factor);
  }
  if (order.P > 0) {
    std::vector<double> factor(static_cast<size_t>(order.m) * order.P + 1, 0.0);
    factor[0] = 1.0;
    for (int j = 0; j < order.P; ++j) factor[static_cast<size_t>(order.m) * (j + 1)] = -seasonal_phi[j];
    ar = poly_mul(ar, factor);
  }
  for (int k = 0; k < order.d; ++k) ar = poly_mul(ar, {1.0, -1.0});
  for (int k = 0; k < order.D; ++k) {
    std::vector<double> factor(static_cast<size_t>(order.m) + 1, 0.0);
    factor[0] = 1.0;
    factor[order.m] = -1.0;
    ar = poly_mul(ar, factor);
  }

  std::vector<double> ma{1.0};
  {
    std::vector<double> factor(order.q + 1, 0.0);
    factor[0] = 1.0;
    for (int i = 0; i < order.q; ++i) factor[i + 1] = theta[i];
    ma = poly_mul(ma, factor);
  }
  if (order.Q > 0) {
    std::vector<double> factor(static_cast<size_t>(order.m) * order.Q + 1, 0.0);
    factor[0] = 1.0;
    for (int i = 0; i < order.Q; ++i) factor[static_cast<size_t>(order.m) * (i + 1)] = seasonal_theta[i];
    ma = poly_mul(ma, factor);
  }

  ReducedForm rf;
  rf.phi.assign(ar.begin() + 1, ar.end());
  rf.theta = ma;
  rf.mu = mu;
  // Constant term of the recursion: the stationary AR factors applied to the
  // differenced-series mean.
  double phi1 = 1.0;
  for (double v : phi) phi1 -= v;
  double sphi1 = 1.0;
  for (double v : seasonal_phi) sphi1 -= v;
  rf.intercept = mu * phi1 * sphi1;
  return rf;
}

std::vector<double> difference(const std::vector<double>& series, int d, int D, int m) {
  if (d < 0 || D < 0 || m < 1) throw ConfigError("bad differencing spec");
  std::vector<double> w = series;
  for (int k = 0; k < d; ++k) {
    if (w.size() < 2) throw ConfigError("series too short to difference");
    std::vector<double> next(w.size() - 1);
    for (size_t i = 0; i + 1 < w.size(); ++i) next[i] = w[i + 1] - w[i];
    w = std::move(next);
  }
  for (int k = 0; k < D; ++k) {
    if (static_cast<int>(w.size()) <= m) throw ConfigError("series too short to difference seasonally");
    std::vector<double> next(w.size() - m);
    for (size_t i = 0; i + m < w.size(); ++i) next[i] = w[i + m] - w[i];
    w = std::move(next);
  }
  return w;
}

std::vector<double> integrate(const std::vector<double>& diffed, const std::vector<double>& initial,
                              int d, int D, int m) {
  if (d < 0 || D < 0 || m < 1) throw ConfigError("bad differencing spec");
  const size_t need = static_cast<size_t>(d) + static_cast<size_t>(m) * D;
  if (initial.size() != need)
    throw ConfigError("integrate: expected " + std::to_string(need) + " initial values, got " +
                      std::to_string(initial.size()));
  if (need == 0) return diffed;

  // Stage prefixes: regular differences of the initial values, then seasonal.
  std::vector<std::vector<double>> regular{initial};
  for (int k = 0; k < d; ++k) {
    const auto& prev = regular.back();
    std::vector<double> next(prev.size() - 1);
    for (size_t i = 0; i + 1 < prev.size(); ++i) next[i] = prev[i + 1] - prev[i];
    regular.push_back(std::move(next));
  }
  std::vector<std::vector<double>> seasonal{regular.back()};  // level 0 = (1-B)^d prefix
  for (int j = 0; j < D - 1; ++j) {
    const auto& prev = seasonal.back();
    std::vector<double> next(prev.size() - m);
    for (size_t i = 0; i + m < prev.size(); ++i) next[i] = prev[i + m] - prev[i];
    seasonal.push_back(std::move(next));
  }

  std::vector<double> cur = diffed;
  for (int j = D - 1; j >= 0; --j) {
    std::vector<double> full = seasonal[j];
    full.reserve(full.size() + cur.size());
    for (double v : cur) full.push_back(v + full[full.size() - m]);
    cur = std::move(full);
  }
  for (int k = d - 1; k >= 0; --k) {
    std::vector<double> full{regular[k][0]};
    full.reserve(1 + cur.size());
    for (double v : cur) full.push_back(v + full.back());
    cur = std::move(full);
  }
  return cur;
}

SarimaModel fit(const std::vector<double>& series, const SarimaOrder& order, const FitOptions& opts) {
  order.validate();
  const int complexity = order.p + order.q + order.P + order.Q + 1;
  if (static_cast<int>(series.size()) < 10 * complexity)
    throw ConfigError("series too short to fit " + order.str() + ": need at least " +
                      std::to_string(10 * complexity) + " points");

  std::vector<double> w = difference(series, order.d, order.D, order.m);
  const int n = static_cast<int>(w.size());
  double mu = std::accumulate(w.begin(), w.end(), 0.0) / n;
  if (!std::isfinite(mu)) throw NumericError("fit: series mean is not finite");
  std::vector<double> z(w.size());
  double var = 0.0;
  for (int t = 0; t < n; ++t) {
    z[t] = w[t] - mu;
    var += z[t] * z[t];
  }
  if (!std::isfinite(var)) throw NumericError("fit: series variance is not finite");
  if (var == 0.0 && (order.p + order.q + order.P + order.Q) > 0)
    throw CollinearityError("fit: constant series");

  // Stage 1: long autoregression to estimate the innovations.
  int L = opts.long_ar_order > 0
              ? opts.long_ar_order
              : std::max(20, 2 * (order.p + order.q) + order.m * (order.P + order.Q));
  L = std::min(L, n / 3);
  if (L < 1) throw ConfigError("fit: series too short for innovation estimation");
  std::vector<double> resid(w.size(), 0.0);
  if (order.q + order.Q > 0) {
    const int rows = n - L;
    if (rows < L + 8) throw ConfigError("fit: series too short for long autoregression of order " + std::to_string(L));
    std::vector<std::vector<double>> cols(L, std::vector<double>(rows));
    std::vector<double> target(rows);
    for (int t = L; t < n; ++t) {
      target[t - L] = z[t];
      for (int j = 1; j <= L; ++j) cols[j - 1][t - L] = z[t - j];
    }
    std::vector<double> b = ols(cols, target);
    for (int t = L; t < n; ++t) {
      double pred = 0.0;
      for (int j = 1; j <= L; ++j) pred += b[j - 1] * z[t - j];
      resid[t] = z[t] - pred;
    }
  }

  // Stage 2: regress on lagged values and lagged innovations.
  const int max_y_lag = std::max(order.p, order.m * order.P);
  const int max_e_lag = std::max(order.q, order.m * order.Q);
  int t0 = std::max(max_y_lag, max_e_lag);
  if (order.q + order.Q > 0) t0 = std::max(t0, L + max_e_lag);
  const int rows = n - t0;
  if (rows < 8 * complexity)
    throw ConfigError("fit: series too short for stage-2 regression of " + order.str());

  std::vector<std::vector<double>> cols;
  for (int j = 1; j <= order.p; ++j) {
    std::vector<double> c(rows);
    for (int t = t0; t < n; ++t) c[t - t0] = z[t - j];
    cols.push_back(std::move(c));
  }
  for (int j = 1; j <= order.P; ++j) {
    std::vector<double> c(rows);
    for (int t = t0; t < n; ++t) c[t - t0] = z[t - order.m * j];
    cols.push_back(std::move(c));
  }
  for (int i = 1; i <= order.q; ++i) {
    std::vector<double> c(rows);
    for (int t = t0; t < n; ++t) c[t - t0] = resid[t - i];
    cols.push_back(std::move(c));
  }
  for (int i = 1; i <= order.Q; ++i) {
    std::vector<double> c(rows);
    for (int t = t0; t < n; ++t) c[t - t0] = resid[t - order.m * i];
    cols.push_back(std::move(c));
  }

  SarimaModel model;
  model.order = order;
  model.mu = mu;
  if (!cols.empty()) {
    std::vector<double> target(rows);
    for (int t = t0; t < n; ++t) target[t - t0] = z[t];
    std::vector<double> beta = ols(cols, target);
    size_t at = 0;
    model.phi.assign(beta.begin() + at, beta.begin() + at + order.p);
    at += order.p;
    model.seasonal_phi.assign(beta.begin() + at, beta.begin() + at + order.P);
    at += order.P;
    model.theta.assign(beta.begin() + at, beta.begin() + at + order.q);
    at += order.q;
    model.seasonal_theta.assign(beta.begin() + at, beta.begin() + at + order.Q);
  }
  model.rf = expand_reduced_form(order, model.phi, model.theta, model.seasonal_phi, model.seasonal_theta, mu);
  return model;
}

std::string SarimaModel::to_json() const {
  nlohmann::json j;
  j["order"] = {{"p", order.p}, {"d", order.d}, {"q", order.q},
                {"P", order.P}, {"D", order.D}, {"Q", order.Q}, {"m", order.m}};
  j["phi"] = phi;
  j["theta"] = theta;
  j["seasonal_phi"] = seasonal_phi;
  j["seasonal_theta"] = seasonal_theta;
  j["mu"] = mu;
  j["reduced"] = {{"phi", rf.phi}, {"theta", rf.theta}, {"intercept", rf.intercept}, {"mu", rf.mu}};
  return j.dump(2);
}

SarimaModel SarimaModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SarimaModel model;
  const auto& o = j.at("order");
  model.order = {o.at("p"), o.at("d"), o.at("q"), o.at("P"), o.at("D"), o.at("Q"), o.at("m")};
  model.phi = j.at("phi").get<std::vector<double>>();
  model.theta = j.at("theta").get<std::vector<double>>();
  model.seasonal_phi = j.at("seasonal_phi").get<std::vector<double>>();
  model.seasonal_theta = j.at("seasonal_theta").get<std::vector<double>>();
  model.mu = j.at("mu");
  model.rf = expand_reduced_form(model.order, model.phi, model.theta, model.seasonal_phi,
                                 model.seasonal_theta, model.mu);
  return model;
}

// --- StatState ---------------------------------------------------------------

StatState::StatState(const ReducedForm& rf, double pad_value)
    : y_cap_(rf.phi.size()), a_cap_(rf.theta.size()), pad_(pad_value) {
  y_.reserve(y_cap_);
  a_.reserve(a_cap_);
}

double StatState::eval(const ReducedForm& rf) const {
  double s = rf.intercept;
  const size_t ny = y_.size();
  for (size_t j = 1; j <= rf.phi.size(); ++j) {
    const double yv = j <= ny ? y_[ny - j] : pad_;
    s -= rf.phi[j - 1] * yv;
  }
  const size_t na = a_.size();
  for (size_t i = 1; i < rf.theta.size(); ++i) {
    const double av = i <= na ? a_[na - i] : 0.0;
    s += rf.theta[i] * av;
  }
  if (!std::isfinite(s)) throw NumericError("forecast produced non-finite value");
  return s;
}

void StatState::push(std::vector<double>& ring, size_t cap, double v) {
  if (cap == 0) return;
  if (ring.size() == cap) ring.erase(ring.begin());
  ring.push_back(v);
}

void StatState::absorb(const ReducedForm& rf, double value) {
  const double f = eval(rf);
  push(y_, y_cap_, value);
  push(a_, a_cap_, value - f);
  y_committed_ = y_;
  a_committed_ = a_;
  outstanding_ = 0;
}

double StatState::forecast_step(const ReducedForm& rf) {
  const double f = eval(rf);
  push(y_, y_cap_, f);
  push(a_, a_cap_, 0.0);
  ++outstanding_;
  return f;
}

void StatState::online_update(const ReducedForm& rf, const std::vector<double>& fresh) {
  if (static_cast<int>(fresh.size()) > outstanding_)
    throw Error("online_update: feed of " + std::to_string(fresh.size()) +
                " values exceeds outstanding forecast horizon of " + std::to_string(outstanding_));
  y_ = y_committed_;
  a_ = a_committed_;
  outstanding_ = 0;
  for (double v : fresh) absorb(rf, v);
}

double StatState::last_residual() const {
  if (a_.empty()) throw Error("no residuals buffered");
  return a_.back();
}

}  // namespace livecast::stats
