// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Ranking metrics, seed-sweep aggregation and Welch's t-test.

#ifndef LF2L_EVAL_HPP_
#define LF2L_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lf2l::eval {

// Mann-Whitney form: (concordant pairs + 0.5 * tied pairs) / (P * N).
// Throws MetricError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision, sum_i (R_i - R_{i-1}) * P_i over descending score
// thresholds; tied scores form a single threshold. Throws MetricError
// without positives.
double auprc(std::span<const double> scores, std::span<const int> labels);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance t-test with Satterthwaite degrees of freedom.
// Two constant samples give p = 1 when equal and p = 1e-300 otherwise.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> v);

enum class Method { kLocalized, kHfl, kCentralized, kLf2l };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);
inline constexpr Method kAllMethods[] = {Method::kLocalized, Method::kHfl, Method::kCentralized,
                                         Method::kLf2l};

struct MetricSample {
  Method method = Method::kLf2l;
  std::string client_id;
  std::uint64_t seed = 0;
  double auroc = 0.0;
  double auprc = 0.0;

  bool operator==(const MetricSample&) const = default;
};

struct Aggregate {
  Method method = Method::kLf2l;
  std::string client_id;
  std::size_t count = 0;
  double auroc_mean = 0.0;
  double auroc_sd = 0.0;
  double auprc_mean = 0.0;
  double auprc_sd = 0.0;
  bool sd_defined = false;  // false with a single seed (SDs reported as 0)
};

// LF2L against one baseline for one client.
struct Comparison {
  std::string client_id;
  Method baseline = Method::kLocalized;
  bool defined = false;  // needs at least two seeds
  WelchResult auroc;
  WelchResult auprc;
};

struct MetricReport {
  std::vector<MetricSample> samples;
  std::vector<Aggregate> aggregates;    // clients ascending, then method order
  std::vector<Comparison> comparisons;  // clients ascending, then method order

  const Aggregate& aggregate(Method method, std::string_view client_id) const;
  const Comparison& comparison(Method baseline, std::string_view client_id) const;
};

// Requires the full (method x client x seed) grid; throws ReportError
// listing missing or duplicated cells.
MetricReport aggregate_report(std::vector<MetricSample> samples);

std::string samples_to_csv(std::span<const MetricSample> samples);
std::vector<MetricSample> samples_from_csv(std::string_view text);
std::string report_to_json(const MetricReport& report);

}  // namespace lf2l::eval

#endif  // LF2L_EVAL_HPP_
