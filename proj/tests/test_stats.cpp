// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "pmchar/rng.hpp"
#include "pmchar/stats.hpp"

using namespace pmchar;
using namespace pmchar::stats;

TEST_CASE("summarize: moments of a known sample") {
  std::vector<double> xs{1, 2, 3, 4};
  Summary s = summarize(xs);
  CHECK(s.n == 4);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.sigma == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(s.sigma_defined);

  Summary one = summarize(std::vector<double>{7});
  CHECK(one.mean == 7);
  CHECK(one.sigma == 0);
  CHECK(!one.sigma_defined);
  CHECK_THROWS(summarize({}));
}

TEST_CASE("median: odd, even, unsorted input") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 3, 2}) == doctest::Approx(2.5));
  CHECK_THROWS(median({}));
}

TEST_CASE("histogram: floor binning with edge samples in the upper bin") {
  std::vector<double> xs{390, 400, 414.9, 415, 1390};
  Histogram h = make_histogram(xs, 25.0);
  CHECK(h.total == 5);
  CHECK(h.origin == doctest::Approx(375));  // floor(390/25)*25
  REQUIRE(!h.counts.empty());
  CHECK(h.counts[0] == 1);  // 390 in [375, 400)
  CHECK(h.counts[1] == 3);  // 400, 414.9, 415 all in [400, 425)
  CHECK(h.lower_edge(1) == doctest::Approx(400));
  CHECK(h.counts.back() == 1);  // 1390
}

TEST_CASE("uniform window fit: recovers the window of synthetic U[d, d+T]") {
  Rng rng(123);
  std::vector<double> xs;
  for (int i = 0; i < 10000; i++) xs.push_back(rng.uniform(390.0, 1390.0));
  UniformFit f = fit_uniform_window(xs);
  CHECK(f.n_used == xs.size());
  CHECK(f.n_excluded == 0);
  CHECK(f.d_hat_us == doctest::Approx(390).epsilon(0.005));
  CHECK(f.t_hat_us == doctest::Approx(1000).epsilon(0.005));
  CHECK(f.ks_stat < dkw_bound(xs.size()));
}

TEST_CASE("uniform window fit: floor excludes the shortcut subpopulation") {
  Rng rng(7);
  std::vector<double> xs;
  for (int i = 0; i < 5000; i++) xs.push_back(rng.uniform(390.0, 1390.0));
  for (int i = 0; i < 500; i++) xs.push_back(rng.uniform(1.0, 20.0));  // shortcut samples
  UniformFit f = fit_uniform_window(xs, 100.0);
  CHECK(f.n_excluded == 500);
  CHECK(f.n_used == 5000);
  CHECK(f.d_hat_us == doctest::Approx(390).epsilon(0.01));
  CHECK(f.t_hat_us == doctest::Approx(1000).epsilon(0.01));
}

TEST_CASE("uniform window fit: exact unbiased estimators on a tiny sample") {
  // order statistics: min 400, max 500, n 101 -> T = 100*102/100, d = 400 - 1
  std::vector<double> xs;
  for (int i = 0; i <= 100; i++) xs.push_back(400.0 + i);
  UniformFit f = fit_uniform_window(xs);
  CHECK(f.t_hat_us == doctest::Approx(102.0));
  CHECK(f.d_hat_us == doctest::Approx(399.0));
}

TEST_CASE("uniform window fit: refuses degenerate or tiny inputs") {
  std::vector<double> same(200, 500.0);
  CHECK_THROWS_WITH_AS(fit_uniform_window(same), doctest::Contains("no window"),
                       std::runtime_error);
  std::vector<double> few{400, 500};
  CHECK_THROWS(fit_uniform_window(few));
}

TEST_CASE("one-sample KS against the true uniform law is small, against a wrong law large") {
  Rng rng(99);
  std::vector<double> xs;
  for (int i = 0; i < 4000; i++) xs.push_back(rng.uniform(0.0, 1.0));
  CHECK(ks_uniform(xs, 0, 1) < dkw_bound(xs.size()));
  CHECK(ks_uniform(xs, 0, 2) > 0.4);  // halves the CDF slope
  CHECK_THROWS(ks_uniform(xs, 1, 1));
}

TEST_CASE("two-sample KS: equal laws small, disjoint supports exactly 1") {
  Rng rng(5);
  std::vector<double> a, b, c;
  for (int i = 0; i < 3000; i++) a.push_back(rng.normal(0, 1));
  for (int i = 0; i < 3000; i++) b.push_back(rng.normal(0, 1));
  for (int i = 0; i < 3000; i++) c.push_back(10 + rng.uniform());
  CHECK(ks_two_sample(a, b) < dkw_bound(a.size()) + dkw_bound(b.size()));
  CHECK(ks_two_sample(a, c) == doctest::Approx(1.0));
}

TEST_CASE("dkw bound shrinks like 1/sqrt(m)") {
  CHECK(dkw_bound(100) == doctest::Approx(std::sqrt(std::log(200.0) / 200.0)));
  CHECK(dkw_bound(400) == doctest::Approx(dkw_bound(100) / 2).epsilon(1e-12));
}

TEST_CASE("ecdf: right-continuous step evaluation") {
  EcdfSeries e = make_ecdf(std::vector<double>{1, 2, 2, 4}, "x");
  CHECK(e.at(0.5) == 0);
  CHECK(e.at(1) == doctest::Approx(0.25));
  CHECK(e.at(2) == doctest::Approx(0.75));
  CHECK(e.at(3.9999) == doctest::Approx(0.75));
  CHECK(e.at(4) == doctest::Approx(1.0));
  CHECK(e.at(99) == doctest::Approx(1.0));
}

TEST_CASE("ecdf subsets partition each group and track the full ECDF") {
  Rng rng(31);
  std::map<std::string, std::vector<double>> groups;
  for (int i = 0; i < 1003; i++) groups["a"].push_back(rng.normal(5, 2));
  for (int i = 0; i < 800; i++) groups["b"].push_back(rng.normal(9, 2));
  auto series = ecdf_with_subsets(groups, 4, 17);
  // per group: 4 subsets + 1 full
  CHECK(series.size() == 10);
  size_t a_total = 0;
  std::vector<double> a_full;
  for (const auto& s : series) {
    if (s.label != "a") continue;
    if (s.subset < 0) {
      a_full = s.values;
      continue;
    }
    a_total += s.values.size();
    // subset sizes differ by at most one
    CHECK(s.values.size() >= 1003u / 4);
    CHECK(s.values.size() <= 1003u / 4 + 1);
  }
  CHECK(a_total == 1003);
  REQUIRE(a_full.size() == 1003);
  // same-law subsets stay inside the DKW band of the full set
  for (const auto& s : series) {
    if (s.label != "a" || s.subset < 0) continue;
    double worst = 0;
    EcdfSeries full = make_ecdf(a_full, "a");
    for (double x : s.values) worst = std::max(worst, std::fabs(s.at(x) - full.at(x)));
    CHECK(worst < dkw_bound(s.values.size()) + dkw_bound(a_full.size()));
  }
  CHECK_THROWS(ecdf_with_subsets(groups, 900, 17));
}

TEST_CASE("ecdf subsets are deterministic in the seed") {
  std::map<std::string, std::vector<double>> groups;
  Rng rng(2);
  for (int i = 0; i < 100; i++) groups["g"].push_back(rng.uniform());
  auto s1 = ecdf_with_subsets(groups, 3, 42);
  auto s2 = ecdf_with_subsets(groups, 3, 42);
  auto s3 = ecdf_with_subsets(groups, 3, 43);
  REQUIRE(s1.size() == s2.size());
  bool all_equal = true, any_diff = false;
  for (size_t i = 0; i < s1.size(); i++) {
    all_equal = all_equal && s1[i].values == s2[i].values;
    if (s1[i].subset >= 0 && s1[i].values != s3[i].values) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("mean gap: zero for identical groups, exact for a known shift") {
  std::vector<double> a{10, 10, 10};
  std::vector<double> b{10.76, 10.76};
  CHECK(mean_gap(a, a) == 0);
  CHECK(mean_gap(a, b) == doctest::Approx(0.076));
  CHECK_THROWS(mean_gap(a, {}));
}

TEST_CASE("affine fit recovers exact coefficients on a noise-free line") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 50; i++) {
    xs.push_back(i);
    ys.push_back(3.25 * i + 11.5);
  }
  AffineFit f = fit_affine(xs, ys);
  CHECK(f.slope == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(11.5).epsilon(1e-12));
  CHECK(f.max_rel_residual < 1e-12);
  CHECK_THROWS(fit_affine(std::vector<double>{1}, std::vector<double>{2}));
}

TEST_CASE("incremental fit on a sweep segment isolates the chosen occupancy axis") {
  std::vector<CStatePowerPoint> pts;
  // idle-entry phase: power = 100 + 0.09*n_c1 (plus a structural jump at n=1)
  for (int i = 1; i <= 10; i++) {
    CStatePowerPoint p;
    p.sweep = "c1";
    p.order_index = i;
    p.n_c1 = i;
    p.n_active = 0;
    p.mean_w = 181.2 + 0.09 * (i - 1);
    pts.push_back(p);
  }
  AffineFit f = fit_linear_increments(pts, "c1", 2, 10, false);
  CHECK(f.slope == doctest::Approx(0.09).epsilon(1e-9));
  // active-conversion phase indexed by active count
  std::vector<CStatePowerPoint> act;
  for (int i = 1; i <= 8; i++) {
    CStatePowerPoint p;
    p.sweep = "active";
    p.order_index = i;
    p.n_c1 = 10 - i;
    p.n_active = i;
    p.mean_w = 186.0 + 0.33 * (i - 1);
    act.push_back(p);
  }
  AffineFit g = fit_linear_increments(act, "active", 2, 8, true);
  CHECK(g.slope == doctest::Approx(0.33).epsilon(1e-9));
  CHECK_THROWS(fit_linear_increments(act, "active", 7, 3, true));
}
