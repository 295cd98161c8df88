#include <doctest.h>

#include <cmath>
#include <vector>

#include "livecast/rng.hpp"
#include "livecast/sarima.hpp"
#include "support/oracles.hpp"

using namespace livecast;
using namespace livecast::stats;

TEST_CASE("difference/integrate round trip") {
  Rng rng(17);
  SUBCASE("integer-valued series is exact") {
    for (int d = 0; d <= 2; ++d)
      for (int D = 0; D <= 1; ++D) {
        const int m = 4;
        std::vector<double> s(40);
        for (double& v : s) v = static_cast<double>(rng.uniform_int(0, 1000));
        auto w = difference(s, d, D, m);
        CHECK(static_cast<int>(w.size()) == 40 - d - D * m);
        std::vector<double> initial(s.begin(), s.begin() + d + D * m);
        auto back = integrate(w, initial, d, D, m);
        REQUIRE(back.size() == s.size());
        for (size_t i = 0; i < s.size(); ++i) CHECK(back[i] == s[i]);
      }
  }
  SUBCASE("continuous series round trips to near machine precision") {
    for (int d = 0; d <= 2; ++d)
      for (int D = 0; D <= 1; ++D) {
        const int m = 7;
        std::vector<double> s(60);
        for (double& v : s) v = rng.uniform(0.0, 100.0);
        auto w = difference(s, d, D, m);
        std::vector<double> initial(s.begin(), s.begin() + d + D * m);
        auto back = integrate(w, initial, d, D, m);
        REQUIRE(back.size() == s.size());
        for (size_t i = 0; i < s.size(); ++i) CHECK(back[i] == doctest::Approx(s[i]).epsilon(1e-10));
      }
  }
  SUBCASE("wrong initial length is rejected") {
    std::vector<double> w(10, 1.0);
    CHECK_THROWS_AS(integrate(w, {1.0}, 2, 0, 1), ConfigError);
  }
}

TEST_CASE("expand_reduced_form") {
  SUBCASE("AR(1): stored coefficient is -phi so the recursion adds phi*y") {
    auto rf = expand_reduced_form({1, 0, 0, 0, 0, 0, 1}, {0.5}, {}, {}, {}, 0.0);
    REQUIRE(rf.phi.size() == 1);
    CHECK(rf.phi[0] == doctest::Approx(-0.5));
    CHECK(rf.theta.size() == 1);
    CHECK(rf.theta[0] == 1.0);
  }
  SUBCASE("pure random walk reduces to y_{t-1}") {
    auto rf = expand_reduced_form({0, 1, 0, 0, 0, 0, 1}, {}, {}, {}, {}, 0.0);
    REQUIRE(rf.phi.size() == 1);
    CHECK(rf.phi[0] == doctest::Approx(-1.0));
  }
  SUBCASE("multiplicative seasonal AR produces the cross lag") {
    const double phi = 0.4, sphi = 0.3;
    auto rf = expand_reduced_form({1, 0, 0, 1, 0, 0, 4}, {phi}, {}, {sphi}, {}, 0.0);
    REQUIRE(rf.phi.size() == 5);
    // symbolic oracle: (1 - phi B)(1 - sphi B^4)
    auto want = oracles::poly_mul({1.0, -phi}, {1.0, 0.0, 0.0, 0.0, -sphi});
    for (int j = 1; j <= 5; ++j) CHECK(rf.phi[j - 1] == doctest::Approx(want[j]).epsilon(1e-12));
    // effective forecast coefficient at lag 5 is -phi*sphi
    CHECK(-rf.phi[4] == doctest::Approx(-phi * sphi).epsilon(1e-12));
    CHECK(rf.phi[1] == 0.0);
    CHECK(rf.phi[2] == 0.0);
  }
  SUBCASE("lengths follow the order arithmetic") {
    auto rf = expand_reduced_form({2, 1, 1, 1, 1, 1, 12}, {0.1, 0.1}, {0.2}, {0.3}, {0.4}, 1.5);
    CHECK(static_cast<int>(rf.phi.size()) == 2 + 1 + 12 * (1 + 1));
    CHECK(static_cast<int>(rf.theta.size()) == 1 + 12 * 1 + 1);
    CHECK(rf.theta[0] == 1.0);
  }
  SUBCASE("intercept scales the differenced mean by the stationary AR factors") {
    auto rf = expand_reduced_form({1, 0, 0, 0, 0, 0, 1}, {0.5}, {}, {}, {}, 10.0);
    CHECK(rf.intercept == doctest::Approx(5.0));
  }
}

TEST_CASE("forecast_step recursion") {
  SUBCASE("AR(1), phi=0.5, last value 2 -> 1") {
    auto rf = expand_reduced_form({1, 0, 0, 0, 0, 0, 1}, {0.5}, {}, {}, {}, 0.0);
    StatState st(rf, 0.0);
    st.absorb(rf, 2.0);
    CHECK(st.forecast_step(rf) == doctest::Approx(1.0));
    CHECK(st.forecast_step(rf) == doctest::Approx(0.5));
  }
  SUBCASE("MA(1), theta=0.7, last residual 1 -> 0.7 then 0") {
    auto rf = expand_reduced_form({0, 0, 1, 0, 0, 0, 1}, {}, {0.7}, {}, {}, 0.0);
    StatState st(rf, 0.0);
    st.absorb(rf, 1.0);  // forecast was 0, so the residual is 1
    CHECK(st.last_residual() == doctest::Approx(1.0));
    CHECK(st.forecast_step(rf) == doctest::Approx(0.7));
    CHECK(st.forecast_step(rf) == doctest::Approx(0.0));
  }
  SUBCASE("white noise forecasts the sample mean") {
    auto rf = expand_reduced_form({0, 0, 0, 0, 0, 0, 1}, {}, {}, {}, {}, 3.25);
    StatState st(rf, 3.25);
    CHECK(st.forecast_step(rf) == doctest::Approx(3.25));
    st.absorb(rf, 99.0);
    CHECK(st.forecast_step(rf) == doctest::Approx(3.25));
  }
}

TEST_CASE("online_update semantics") {
  auto rf = expand_reduced_form({1, 0, 1, 0, 0, 0, 1}, {0.6}, {0.4}, {}, {}, 0.0);

  SUBCASE("feed equal to the forecasts leaves residuals zero and the path unchanged") {
    StatState st(rf, 0.0);
    st.absorb(rf, 1.0);
    st.absorb(rf, 0.8);
    std::vector<double> preds;
    for (int i = 0; i < 4; ++i) preds.push_back(st.forecast_step(rf));
    StatState replay = st;
    st.online_update(rf, {preds[0], preds[1]});
    CHECK(st.last_residual() == doctest::Approx(0.0));
    // the continuation matches what uninterrupted forecasting produced
    CHECK(st.forecast_step(rf) == doctest::Approx(preds[2]).epsilon(1e-12));
    CHECK(st.forecast_step(rf) == doctest::Approx(preds[3]).epsilon(1e-12));
    (void)replay;
  }
  SUBCASE("feed longer than the outstanding horizon is an error") {
    StatState st(rf, 0.0);
    st.absorb(rf, 1.0);
    st.forecast_step(rf);
    CHECK_THROWS_AS(st.online_update(rf, {1.0, 2.0}), Error);
  }
  SUBCASE("AR(1): one-at-a-time feeds reproduce the classic rolling one-step sequence") {
    auto ar = expand_reduced_form({1, 0, 0, 0, 0, 0, 1}, {0.5}, {}, {}, {}, 0.0);
    StatState st(ar, 0.0);
    st.absorb(ar, 4.0);
    std::vector<double> actuals{3.0, 2.5, 1.0, 0.5};
    std::vector<double> got;
    double prev = 4.0;
    for (double a : actuals) {
      const double f = st.forecast_step(ar);
      CHECK(f == doctest::Approx(0.5 * prev));
      got.push_back(f);
      st.online_update(ar, {a});
      prev = a;
    }
  }
}

TEST_CASE("streaming state equals full-history recomputation") {
  Rng rng(41);
  auto run_case = [&](const SarimaOrder& order, const std::vector<double>& phi,
                      const std::vector<double>& theta, const std::vector<double>& sphi,
                      const std::vector<double>& stheta) {
    auto rf = expand_reduced_form(order, phi, theta, sphi, stheta, 0.35);
    const int seed_len = 80, feed = 5, span = 12, rounds = 24;
    std::vector<double> truth(seed_len + feed * rounds);
    for (double& v : truth) v = rng.uniform(-1.0, 1.0) + 0.35;

    StatState st(rf, rf.mu);
    std::vector<double> history(truth.begin(), truth.begin() + seed_len);
    for (double v : history) st.absorb(rf, v);

    std::vector<double> theta_tail(rf.theta.begin() + 1, rf.theta.end());
    double worst = 0.0;
    size_t next = seed_len;
    for (int r = 0; r < rounds; ++r) {
      std::vector<double> mine;
      for (int sidx = 0; sidx < span; ++sidx) mine.push_back(st.forecast_step(rf));
      auto want = oracles::full_history_forecast(history, rf.phi, theta_tail, rf.intercept, rf.mu, span);
      for (int sidx = 0; sidx < span; ++sidx) worst = std::max(worst, std::fabs(mine[sidx] - want[sidx]));
      std::vector<double> fresh(truth.begin() + next, truth.begin() + next + feed);
      st.online_update(rf, fresh);
      history.insert(history.end(), fresh.begin(), fresh.end());
      next += feed;
    }
    return worst;
  };

  CHECK(run_case({3, 0, 5, 0, 0, 0, 1}, {0.4, -0.2, 0.1}, {0.3, -0.1, 0.2, 0.05, -0.05}, {}, {}) < 1e-9);
  CHECK(run_case({1, 0, 1, 1, 0, 1, 12}, {0.5}, {0.3}, {0.4}, {0.2}) < 1e-9);
}

TEST_CASE("ring occupancy stays within the reduced-form budget") {
  SarimaOrder order{1, 0, 1, 1, 0, 1, 12};
  auto rf = expand_reduced_form(order, {0.5}, {0.3}, {0.4}, {0.2}, 0.0);
  StatState st(rf, 0.0);
  Rng rng(3);
  const int budget = (order.p + order.d + order.m * (order.P + order.D)) + (order.q + order.m * order.Q) + 1;
  for (int round = 0; round < 40; ++round) {
    for (int s = 0; s < 6; ++s) {
      st.forecast_step(rf);
      CHECK(st.buffered_values() + st.buffered_residuals() <= budget);
    }
    st.online_update(rf, {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    CHECK(st.buffered_values() + st.buffered_residuals() <= budget);
  }
}

TEST_CASE("in-sample residuals equal observation minus fitted one-step forecast") {
  auto rf = expand_reduced_form({2, 0, 1, 0, 0, 0, 1}, {0.4, 0.2}, {0.5}, {}, {}, 0.0);
  StatState st(rf, 0.0);
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const double f = st.eval(rf);
    const double y = rng.uniform(-1.0, 1.0);
    st.absorb(rf, y);
    CHECK(st.last_residual() == doctest::Approx(y - f).epsilon(1e-12));
  }
}

TEST_CASE("fit recovers known processes") {
  Rng rng(1234);
  SUBCASE("AR(1) phi=0.8 at n=10000 within 0.05") {
    auto series = oracles::simulate_arma({0.8}, {}, 1.0, 10000, 200, rng);
    auto model = fit(series, {1, 0, 0, 0, 0, 0, 1});
    CHECK(model.phi[0] == doctest::Approx(0.8).epsilon(0.0625));
    CHECK(std::fabs(model.phi[0] - 0.8) < 0.05);
  }
  SUBCASE("seasonal AR(1)_12 phi=0.9 at n=10000 within 0.05") {
    std::vector<double> phi(12, 0.0);
    phi[11] = 0.9;
    auto series = oracles::simulate_arma(phi, {}, 1.0, 10000, 400, rng);
    auto model = fit(series, {0, 0, 0, 1, 0, 0, 12});
    CHECK(std::fabs(model.seasonal_phi[0] - 0.9) < 0.05);
  }
  SUBCASE("MA(1) theta=0.6 at n=10000 within 0.05") {
    auto series = oracles::simulate_arma({}, {0.6}, 1.0, 10000, 200, rng);
    auto model = fit(series, {0, 0, 1, 0, 0, 0, 1});
    CHECK(std::fabs(model.theta[0] - 0.6) < 0.05);
  }
  SUBCASE("ARMA(1,1) joint recovery") {
    auto series = oracles::simulate_arma({0.7}, {0.4}, 1.0, 10000, 200, rng);
    auto model = fit(series, {1, 0, 1, 0, 0, 0, 1});
    CHECK(std::fabs(model.phi[0] - 0.7) < 0.08);
    CHECK(std::fabs(model.theta[0] - 0.4) < 0.08);
  }
  SUBCASE("series shorter than 10x parameter count is rejected") {
    std::vector<double> series(80, 1.0);
    CHECK_THROWS_AS(fit(series, {3, 0, 5, 0, 0, 0, 1}), ConfigError);
  }
  SUBCASE("constant series triggers the collinearity error") {
    std::vector<double> series(500, 42.0);
    CHECK_THROWS_AS(fit(series, {1, 0, 0, 0, 0, 0, 1}), CollinearityError);
  }
}

TEST_CASE("model JSON round trip") {
  Rng rng(77);
  auto series = oracles::simulate_arma({0.6}, {0.3}, 1.0, 2000, 100, rng);
  auto model = fit(series, {1, 0, 1, 0, 0, 0, 1});
  auto text = model.to_json();
  auto back = SarimaModel::from_json(text);
  CHECK(back.order.p == 1);
  CHECK(back.phi[0] == doctest::Approx(model.phi[0]).epsilon(1e-12));
  CHECK(back.theta[0] == doctest::Approx(model.theta[0]).epsilon(1e-12));
  CHECK(back.mu == doctest::Approx(model.mu).epsilon(1e-12));
  REQUIRE(back.rf.phi.size() == model.rf.phi.size());
  for (size_t i = 0; i < model.rf.phi.size(); ++i)
    CHECK(back.rf.phi[i] == doctest::Approx(model.rf.phi[i]).epsilon(1e-12));
}

TEST_CASE("order validation") {
  CHECK_THROWS_AS(SarimaOrder({-1, 0, 0, 0, 0, 0, 1}).validate(), ConfigError);
  CHECK_THROWS_AS(SarimaOrder({1, 0, 0, 1, 0, 0, 1}).validate(), ConfigError);
  CHECK_NOTHROW(SarimaOrder({3, 0, 5, 0, 0, 0, 1}).validate());
}
