#pragma once

// Independent reference implementations used only by tests. Everything here
// is deliberately naive (plain loops, no shared code with the library) so it
// can serve as an oracle for the optimized paths.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracles {

// Central finite differences of f at x.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

// Six-loop same-padding convolution. x: [ci][H][W] flattened, k: [co][ci][K][K].
inline std::vector<double> naive_conv2d(const std::vector<double>& x, int ci, int H, int W,
                                        const std::vector<double>& k, int co, int K,
                                        const std::vector<double>& bias) {
  const int P = K / 2;
  std::vector<double> out(static_cast<size_t>(co) * H * W, 0.0);
  for (int oc = 0; oc < co; ++oc)
    for (int y = 0; y < H; ++y)
      for (int x2 = 0; x2 < W; ++x2) {
        double s = bias[oc];
        for (int c = 0; c < ci; ++c)
          for (int dy = 0; dy < K; ++dy)
            for (int dx = 0; dx < K; ++dx) {
              const int yy = y + dy - P;
              const int xx = x2 + dx - P;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              s += x[(static_cast<size_t>(c) * H + yy) * W + xx] *
                   k[((static_cast<size_t>(oc) * ci + c) * K + dy) * K + dx];
            }
        out[(static_cast<size_t>(oc) * H + y) * W + x2] = s;
      }
  return out;
}

inline std::vector<double> naive_matmul(const std::vector<double>& a, int m, int k,
                                        const std::vector<double>& b, int n) {
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += a[static_cast<size_t>(i) * k + kk] * b[static_cast<size_t>(kk) * n + j];
      out[static_cast<size_t>(i) * n + j] = s;
    }
  return out;
}

// Two-pass mean squared error.
inline double naive_mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

inline double autocorrelation(const std::vector<double>& v, int lag) {
  const double m = mean(v);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i + lag < v.size(); ++i) num += (v[i] - m) * (v[i + lag] - m);
  for (double x : v) den += (x - m) * (x - m);
  return num / den;
}

// Product of polynomials given as coefficient vectors (index = power of B,
// coefficient 0 = constant term).
inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Reference forecaster for the reduced ARMA recursion
//   y_t = c - sum_j phi[j] * y_{t-j-1} + a_t + sum_i theta[i] * a_{t-i-1}
// recomputed from the complete actual history at every call. History values
// before the series start read as mu with residual 0 (conditional convention).
// Returns `horizon` forecasts past the end of `history`.
inline std::vector<double> full_history_forecast(const std::vector<double>& history,
                                                 const std::vector<double>& phi,
                                                 const std::vector<double>& theta, double c,
                                                 double mu, int horizon) {
  const size_t n = history.size();
  std::vector<double> y(history);
  std::vector<double> a(n, 0.0);
  auto value_at = [&](long t) { return t < 0 ? mu : y[static_cast<size_t>(t)]; };
  auto resid_at = [&](long t) { return t < 0 ? 0.0 : a[static_cast<size_t>(t)]; };
  auto one_step = [&](long t) {
    double s = c;
    for (size_t j = 0; j < phi.size(); ++j) s -= phi[j] * value_at(t - 1 - static_cast<long>(j));
    for (size_t i = 0; i < theta.size(); ++i) s += theta[i] * resid_at(t - 1 - static_cast<long>(i));
    return s;
  };
  // In-sample pass fixes the residual sequence.
  for (size_t t = 0; t < n; ++t) a[t] = history[t] - one_step(static_cast<long>(t));
  std::vector<double> out;
  for (int hstep = 0; hstep < horizon; ++hstep) {
    const long t = static_cast<long>(y.size());
    const double f = one_step(t);
    out.push_back(f);
    y.push_back(f);
    a.push_back(0.0);
  }
  return out;
}

// Simulate a zero-mean ARMA process with the classic sign conventions
//   y_t = sum phi[j] y_{t-j-1} + e_t + sum theta[i] e_{t-i-1}.
template <typename RngT>
std::vector<double> simulate_arma(const std::vector<double>& phi, const std::vector<double>& theta,
                                  double noise_std, int n, int burn_in, RngT& rng) {
  std::vector<double> y, e;
  const int total = n + burn_in;
  y.reserve(total);
  e.reserve(total);
  for (int t = 0; t < total; ++t) {
    double v = rng.normal(0.0, noise_std);
    e.push_back(v);
    for (size_t j = 0; j < phi.size(); ++j)
      if (t > static_cast<int>(j)) v += phi[j] * y[t - 1 - j];
    for (size_t i = 0; i < theta.size(); ++i)
      if (t > static_cast<int>(i)) v += theta[i] * e[t - 1 - i];
    y.push_back(v);
  }
  return std::vector<double>(y.begin() + burn_in, y.end());
}

}  // namespace oracles
