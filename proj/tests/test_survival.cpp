#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "censreg/error.hpp"
#include "censreg/survival.hpp"
#include "oracles.hpp"

using namespace censreg;

namespace {

Eigen::MatrixXd column(const std::vector<double>& h) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(h.size()), 1);
  for (std::size_t i = 0; i < h.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = h[i];
  return m;
}

struct Sample {
  std::vector<double> t, h;
  std::vector<int> ev;
};

// Times on a coarse grid so ties show up regularly.
Sample random_sample(oracle::Gen& g, int n, bool ties) {
  Sample s;
  for (int i = 0; i < n; ++i) {
    s.h.push_back(g.norm());
    s.t.push_back(ties ? g.integer(1, 6) : g.unif(0.1, 5.0));
    s.ev.push_back(g.coin(0.7));
  }
  if (std::count(s.ev.begin(), s.ev.end(), 1) == 0) s.ev[0] = 1;
  return s;
}

}  // namespace

TEST_SUITE("survival") {

TEST_CASE("product-limit example") {
  const std::vector<double> t{1, 2, 2, 3, 4};
  const std::vector<int> e{1, 1, 0, 1, 0};
  const KmCurve km = km_fit(t, e);
  CHECK(km.times == std::vector<double>{1, 2, 3});
  CHECK(km.at_risk == std::vector<int>{5, 4, 2});
  CHECK(km.events == std::vector<int>{1, 1, 1});
  CHECK(std::abs(km.surv[0] - 0.8) < 1e-15);
  CHECK(std::abs(km.surv[1] - 0.6) < 1e-15);
  CHECK(std::abs(km.surv[2] - 0.3) < 1e-15);
  CHECK(km_eval(km, 0.5) == 1.0);
  CHECK(km_eval(km, 2.0) == km.surv[1]);
  CHECK(km_eval(km, 2.0, Side::LeftLimit) == km.surv[0]);
  CHECK(km_eval(km, 100.0) == km.surv[2]);
}

TEST_CASE("product-limit hand values") {
  const std::vector<double> one{5};
  const std::vector<int> ev1{1};
  const KmCurve single = km_fit(one, ev1);
  CHECK(km_eval(single, 4.999) == 1.0);
  CHECK(km_eval(single, 5.0) == 0.0);
  CHECK(km_eval(single, 9.0) == 0.0);

  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<int> e{1, 0, 1, 1};
  const KmCurve km = km_fit(t, e);
  CHECK(km_eval(km, 0.5) == 1.0);
  CHECK(km_eval(km, 1.0) == 0.75);
  CHECK(km_eval(km, 2.0) == 0.75);
  CHECK(km_eval(km, 3.0) == 0.375);
  CHECK(km_eval(km, 3.0, Side::LeftLimit) == 0.75);
  CHECK(km_eval(km, 4.0) == 0.0);
  CHECK(km_eval(km, 40.0) == 0.0);
}

TEST_CASE("product-limit input checks") {
  const std::vector<double> empty;
  const std::vector<int> none;
  CHECK_THROWS_AS(km_fit(empty, none), DataError);
  const std::vector<double> t{1, -1};
  const std::vector<int> e{1, 1};
  CHECK_THROWS_AS(km_fit(t, e), DataError);
  const std::vector<int> bad{1, 2};
  const std::vector<double> ok{1, 2};
  CHECK_THROWS_AS(km_fit(ok, bad), DataError);
}

TEST_CASE("property: product-limit agrees with the definition") {
  oracle::Gen g(21);
  for (int trial = 0; trial < 200; ++trial) {
    const Sample s = random_sample(g, g.integer(1, 30), trial % 2 == 0);
    const KmCurve km = km_fit(s.t, s.ev);
    for (std::size_t j = 1; j < km.at_risk.size(); ++j) CHECK(km.at_risk[j] <= km.at_risk[j - 1]);
    for (std::size_t j = 1; j < km.surv.size(); ++j) CHECK(km.surv[j] <= km.surv[j - 1]);
    for (double u : {0.0, 0.5, 1.0, 2.0, 2.5, 3.0, 4.7, 6.0, 9.0}) {
      CHECK(std::abs(km_eval(km, u) - oracle::km_at(s.t, s.ev, u)) < 1e-14);
      CHECK(std::abs(km_eval(km, u, Side::LeftLimit) - oracle::km_at(s.t, s.ev, u, true)) < 1e-14);
    }
  }
}

TEST_CASE("without censoring the curve is one minus the empirical CDF") {
  oracle::Gen g(22);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = g.integer(1, 40);
    const Sample s = random_sample(g, n, trial % 2 == 0);
    const std::vector<int> all(static_cast<std::size_t>(n), 1);
    const KmCurve km = km_fit(s.t, all);
    for (double u : s.t) {
      const double ecdf = static_cast<double>(std::count_if(s.t.begin(), s.t.end(), [&](double v) { return v <= u; })) / n;
      CHECK(std::abs(km_eval(km, u) - (1.0 - ecdf)) < 1e-14);
    }
  }
}

TEST_CASE("Breslow increments") {
  const std::vector<double> t{1, 2, 3};
  const std::vector<int> e{1, 1, 1};
  const BreslowBaseline b = breslow_baseline(t, e, column({0.3, -1, 2}), Eigen::VectorXd::Zero(1));
  REQUIRE(b.increments.size() == 3);
  CHECK(std::abs(b.increments[0] - 1.0 / 3) < 1e-15);
  CHECK(std::abs(b.increments[1] - 0.5) < 1e-15);
  CHECK(std::abs(b.increments[2] - 1.0) < 1e-15);

  const std::vector<double> t2{1, 2};
  const std::vector<int> e2{1, 1};
  for (double th : {-1.3, 0.0, 0.4, 2.0}) {
    const BreslowBaseline b2 = breslow_baseline(t2, e2, column({0, 1}), Eigen::VectorXd::Constant(1, th));
    CHECK(std::abs(b2.increments[0] - 1.0 / (1.0 + std::exp(th))) < 1e-14);
    CHECK(std::abs(b2.increments[1] - std::exp(-th)) < 1e-14);
  }

  const std::vector<int> e3{1, 0, 1};
  const BreslowBaseline b3 = breslow_baseline(t, e3, column({0, 0, 0}), Eigen::VectorXd::Zero(1));
  CHECK(b3.times == std::vector<double>{1, 3});
}

TEST_CASE("Cox fit matches a brute-force maximizer") {
  oracle::Gen g(23);
  SUBCASE("four subjects, all events") {
    const std::vector<double> t{1, 2, 3, 4}, h{0, 1, 0, 1};
    const std::vector<int> e{1, 1, 1, 1};
    const auto [theta, interior] = oracle::cox_argmax_1d(t, e, h);
    REQUIRE(interior);
    CHECK(std::abs(cox_fit(t, e, column(h)).theta[0] - theta) < 1e-6);
  }
  SUBCASE("four subjects") {
    const std::vector<double> t{1, 2, 3, 4}, h{0.5, -1.0, 1.5, 0.0};
    const std::vector<int> e{1, 1, 0, 1};
    const auto [theta, interior] = oracle::cox_argmax_1d(t, e, h);
    REQUIRE(interior);
    const CoxFit fit = cox_fit(t, e, column(h));
    CHECK(std::abs(fit.theta[0] - theta) < 1e-6);
  }
  SUBCASE("random small samples") {
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
      const Sample s = random_sample(g, g.integer(4, 8), trial % 3 == 0);
      const auto [theta, interior] = oracle::cox_argmax_1d(s.t, s.ev, s.h);
      if (!interior || std::abs(theta) > 10) continue;  // numerically flat boundary
      const CoxFit fit = cox_fit(s.t, s.ev, column(s.h));
      CHECK(std::abs(fit.theta[0] - theta) < 1e-6);
      CHECK(std::abs(fit.log_partial_likelihood - oracle::cox_loglik_1d(s.t, s.ev, s.h, theta)) < 1e-8);
      ++checked;
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("Cox score and information agree with finite differences") {
  oracle::Gen g(24);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = g.integer(6, 30);
    std::vector<double> t;
    std::vector<int> e;
    Eigen::MatrixXd h(n, 2);
    for (int i = 0; i < n; ++i) {
      t.push_back(g.integer(1, 8));
      e.push_back(g.coin(0.6));
      h(i, 0) = g.norm();
      h(i, 1) = g.coin();
    }
    e[0] = 1;
    Eigen::Vector2d th(g.norm(0, 0.5), g.norm(0, 0.5));
    const Eigen::VectorXd u = cox_score(t, e, h, th);
    const Eigen::MatrixXd info = cox_information(t, e, h, th);
    for (int j = 0; j < 2; ++j) {
      const double step = 1e-6;
      Eigen::VectorXd p = th, m = th;
      p[j] += step;
      m[j] -= step;
      const double fd = (cox_log_partial_likelihood(t, e, h, p) - cox_log_partial_likelihood(t, e, h, m)) / (2 * step);
      CHECK(std::abs(u[j] - fd) < 1e-5 * std::max(1.0, std::abs(fd)));
      const Eigen::VectorXd dfd = -(cox_score(t, e, h, p) - cox_score(t, e, h, m)) / (2 * step);
      for (int k = 0; k < 2; ++k) CHECK(std::abs(info(k, j) - dfd[k]) < 1e-5 * std::max(1.0, std::abs(dfd[k])));
    }
  }
}

TEST_CASE("Cox fit reaches a score root and ignores record order") {
  oracle::Gen g(25);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 60;
    std::vector<double> t;
    std::vector<int> e;
    Eigen::MatrixXd h(n, 2);
    for (int i = 0; i < n; ++i) {
      h(i, 0) = g.norm();
      h(i, 1) = g.coin();
      t.push_back(-std::log(g.unif(1e-9, 1.0)) / std::exp(0.5 * h(i, 0) - 0.3 * h(i, 1)));
      e.push_back(g.coin(0.8));
    }
    const CoxFit fit = cox_fit(t, e, h);
    CHECK(fit.converged);
    CHECK(cox_score(t, e, h, fit.theta).cwiseAbs().maxCoeff() <= 1e-8);

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = n - 1 - i;
    std::vector<double> t2;
    std::vector<int> e2;
    Eigen::MatrixXd h2(n, 2);
    for (int i = 0; i < n; ++i) {
      const auto p = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
      t2.push_back(t[p]);
      e2.push_back(e[p]);
      h2.row(i) = h.row(static_cast<Eigen::Index>(p));
    }
    const CoxFit back = cox_fit(t2, e2, h2);
    CHECK((back.theta - fit.theta).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("Cox failure modes") {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<int> e{1, 1, 1, 1};
  CHECK_THROWS_AS(cox_fit(t, e, column({0, 0, 0, 0})), SingularError);
  const std::vector<int> none{0, 0, 0, 0};
  CHECK_THROWS_AS(cox_fit(t, none, column({0, 1, 0, 1})), DataError);
  try {
    cox_fit(t, e, column({4, 3, 2, 1}));
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& err) {
    CHECK(err.hint() == "divergence");
  }
}

TEST_CASE("theta = 0 reproduces the Nelson-Aalen increments and the product-limit curve") {
  oracle::Gen g(26);
  for (int trial = 0; trial < 50; ++trial) {
    const Sample s = random_sample(g, g.integer(2, 40), true);
    CoxOptions opts;
    opts.fixed_theta = Eigen::VectorXd::Zero(1);
    const CoxFit fit = cox_fit(s.t, s.ev, column(s.h), opts);
    const KmCurve km = km_fit(s.t, s.ev);
    REQUIRE(fit.baseline_times == km.times);
    for (std::size_t j = 0; j < km.times.size(); ++j) {
      CHECK(fit.baseline_increments[j] == static_cast<double>(km.events[j]) / km.at_risk[j]);
    }
    for (double hv : {-2.0, 0.0, 0.7}) {
      const double row[1] = {hv};
      for (double u : {0.5, 1.0, 2.0, 3.5, 6.0, 7.0}) {
        const SurvivalValue sv = cox_survival_at(fit, row, u);
        const double k = km_eval(km, u, Side::LeftLimit);
        if (sv.degenerate) {
          // a risk set emptied by events: the product reaches zero and is floored
          CHECK(k == 0.0);
          CHECK(sv.value == 1e-6);
        } else {
          CHECK(sv.value == k);
        }
      }
    }
  }
}

TEST_CASE("Cox survival evaluation") {
  CoxFit fit;
  fit.theta = Eigen::VectorXd::Constant(1, std::log(2.0));
  fit.center = Eigen::VectorXd::Zero(1);
  fit.baseline_times = {1.0};
  fit.baseline_increments = {0.25};
  fit.baseline_events = {1};
  const double one[1] = {1.0};
  CHECK(cox_survival_at(fit, one, 0.5).value == 1.0);
  CHECK(cox_survival_at(fit, one, 1.0).value == 1.0);  // strictly before u
  CHECK(std::abs(cox_survival_at(fit, one, 2.0).value - 0.5) < 1e-15);

  SurvivalOptions expo;
  expo.form = SurvivalForm::Exponential;
  CHECK(std::abs(cox_survival_at(fit, one, 2.0, expo).value - std::exp(-0.5)) < 1e-15);

  fit.baseline_increments = {0.75};
  const SurvivalValue sv = cox_survival_at(fit, one, 2.0);
  CHECK(sv.degenerate);
  CHECK(sv.value == 1e-6);
}

}  // TEST_SUITE
