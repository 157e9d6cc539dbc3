// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "lf2l/error.hpp"
#include "lf2l/eval.hpp"
#include "oracles.hpp"

using namespace lf2l;
using namespace lf2l::eval;

namespace {

// Scores drawn from a small grid so that ties are common.
void random_instance(RandomEngine& rng, std::vector<double>& s, std::vector<int>& y) {
  const std::size_t n = 2 + rng() % 99;
  const bool coarse = rng() & 1U;
  s.resize(n);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = coarse ? static_cast<double>(rng() % 7) / 7.0 : uniform01(rng);
    y[i] = static_cast<int>(rng() % 3 == 0);
  }
  y[0] = 1;
  y[1] = 0;
}

}  // namespace

TEST_CASE("auroc and auprc agree with brute-force oracles") {
  RandomEngine rng(21);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    random_instance(rng, s, y);
    CHECK(std::abs(auroc(s, y) - oracle::brute_auroc(s, y)) < 1e-12);
    CHECK(std::abs(auprc(s, y) - oracle::brute_auprc(s, y)) < 1e-12);
  }
}

TEST_CASE("metric edge cases") {
  const std::vector<int> y{0, 0, 1, 1, 0, 1};
  const std::vector<double> perfect{0.1, 0.2, 0.8, 0.9, 0.3, 0.7};
  CHECK(auroc(perfect, y) == 1.0);
  CHECK(auprc(perfect, y) == 1.0);
  const std::vector<double> reversed{0.9, 0.8, 0.2, 0.1, 0.7, 0.3};
  CHECK(auroc(reversed, y) == 0.0);
  const std::vector<double> constant(6, 0.5);
  CHECK(auroc(constant, y) == 0.5);
  CHECK(auprc(constant, y) == 0.5);  // prevalence

  const std::vector<int> one_class{1, 1, 1};
  const std::vector<double> three{0.1, 0.2, 0.3};
  CHECK_THROWS_AS(auroc(three, one_class), MetricError);
  const std::vector<int> no_pos{0, 0, 0};
  CHECK_THROWS_AS(auprc(three, no_pos), MetricError);
  const std::vector<int> short_y{0, 1};
  CHECK_THROWS_AS(auroc(three, short_y), Error);
}

TEST_CASE("incomplete beta against frozen high-precision values") {
  // Reference values computed once at 40 significant digits.
  CHECK(regularized_incomplete_beta(4.0, 0.5, 8.0 / 9.0) == doctest::Approx(0.3465935070873341).epsilon(1e-12));
  CHECK(regularized_incomplete_beta(4.0, 0.5, 0.8) == doctest::Approx(0.1950155281000758).epsilon(1e-12));
  CHECK(regularized_incomplete_beta(2.5, 3.5, 0.3) == doctest::Approx(0.2967529892956664).epsilon(1e-12));
  CHECK(regularized_incomplete_beta(10.0, 0.5, 0.99) == doctest::Approx(0.6579281751567843).epsilon(1e-12));
  CHECK(regularized_incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(regularized_incomplete_beta(30.0, 0.5, 0.9) == doctest::Approx(0.01228244849985276).epsilon(1e-10));
  CHECK(regularized_incomplete_beta(3.0, 2.0, 0.0) == 0.0);
  CHECK(regularized_incomplete_beta(3.0, 2.0, 1.0) == 1.0);
}

TEST_CASE("welch worked example") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{2, 3, 4, 5, 6};
  const WelchResult r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(std::abs(r.p - 0.3465935070873341) < 1e-3);
  CHECK(std::abs(r.p - oracle::student_t_two_sided_even_df(-1.0, 8)) < 1e-12);
}

TEST_CASE("welch p matches the closed-form t tail for even df") {
  // Equal sizes and variances give df = 2n - 2.
  for (int n : {2, 3, 5, 10, 16}) {
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(i);
      b.push_back(i + 0.37 * n);
    }
    const WelchResult r = welch_t_test(a, b);
    REQUIRE(r.df == doctest::Approx(2.0 * n - 2.0).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(oracle::student_t_two_sided_even_df(r.t, 2 * n - 2)).epsilon(1e-10));
  }
}

TEST_CASE("welch degenerate inputs") {
  const std::vector<double> c{1, 1, 1};
  const std::vector<double> d{2, 2, 2};
  CHECK(welch_t_test(c, c).p == 1.0);
  CHECK(welch_t_test(c, d).p == 1e-300);
  CHECK(welch_t_test(c, d).t < 0.0);
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(welch_t_test(one, c), MetricError);
  CHECK(sample_sd(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(std::sqrt(5.0 / 3.0)));
}

TEST_CASE("report aggregation") {
  std::vector<MetricSample> samples;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (Method m : kAllMethods) {
      for (const char* client : {"b", "a"}) {
        const double base = m == Method::kLf2l ? 0.8 : 0.7;
        samples.push_back({m, client, seed, base + 0.01 * static_cast<double>(seed), 0.3});
      }
    }
  }
  const MetricReport rep = aggregate_report(samples);
  CHECK(rep.aggregates.size() == 8);
  CHECK(rep.aggregates.front().client_id == "a");
  CHECK(rep.aggregates.front().method == Method::kLocalized);
  const Aggregate& lf = rep.aggregate(Method::kLf2l, "a");
  CHECK(lf.count == 4);
  CHECK(lf.auroc_mean == doctest::Approx(0.825));
  CHECK(lf.sd_defined);
  const Comparison& cmp = rep.comparison(Method::kHfl, "b");
  CHECK(cmp.defined);
  CHECK(cmp.auroc.t > 0.0);
  CHECK(rep.comparisons.size() == 6);

  const auto round = samples_from_csv(samples_to_csv(rep.samples));
  CHECK(round == rep.samples);

  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j.contains("aggregates"));
  CHECK(j.contains("comparisons"));

  auto missing = samples;
  missing.pop_back();
  CHECK_THROWS_AS(aggregate_report(missing), ReportError);
  auto dup = samples;
  dup.push_back(samples.front());
  CHECK_THROWS_AS(aggregate_report(dup), ReportError);
  CHECK_THROWS_AS(samples_from_csv("bad,header\n"), ReportError);
}

TEST_CASE("single-seed report has no comparisons") {
  std::vector<MetricSample> samples;
  for (Method m : kAllMethods) samples.push_back({m, "a", 1, 0.6, 0.2});
  const MetricReport rep = aggregate_report(samples);
  CHECK_FALSE(rep.aggregate(Method::kHfl, "a").sd_defined);
  CHECK_FALSE(rep.comparison(Method::kHfl, "a").defined);
}
