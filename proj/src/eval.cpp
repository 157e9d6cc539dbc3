// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lf2l/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "json.hpp"
#include "lf2l/error.hpp"

namespace lf2l::eval {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  for (double s : scores) {
    if (std::isnan(s)) throw MetricError("NaN score");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw MetricError("labels must be 0 or 1");
  }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return order;
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw MetricError("incomplete beta continued fraction did not converge");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("AUROC is undefined unless both classes are present");
  }
  const std::vector<std::size_t> order = order_by_score(scores, /*descending=*/false);
  // Walk tie blocks in ascending order; every positive in a block beats all
  // negatives seen in earlier blocks and ties with the block's negatives.
  double concordant = 0.0;
  double ties = 0.0;
  std::size_t negatives_below = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::size_t block_pos = 0;
    std::size_t block_neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] == 1 ? block_pos : block_neg) += 1;
      ++end;
    }
    concordant += static_cast<double>(block_pos) * static_cast<double>(negatives_below);
    ties += static_cast<double>(block_pos) * static_cast<double>(block_neg);
    negatives_below += block_neg;
    start = end;
  }
  return (concordant + 0.5 * ties) /
         (static_cast<double>(positives) * static_cast<double>(negatives));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw MetricError("AUPRC is undefined without positives");
  const std::vector<std::size_t> order = order_by_score(scores, /*descending=*/true);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      tp += labels[order[end]] == 1;
      ++end;
    }
    seen = end;
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    start = end;
  }
  return ap;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw MetricError("incomplete beta needs positive a and b");
  if (!(x >= 0.0 && x <= 1.0)) throw MetricError("incomplete beta argument outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The continued fraction converges fast for x < (a + 1) / (a + b + 2);
  // otherwise use the symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size() - 1));
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw MetricError("Welch's test needs two values per sample");
  const double ma = mean(a);
  const double mb = mean(b);
  const double sa = sample_sd(a);
  const double sb = sample_sd(b);
  const double va = sa * sa / static_cast<double>(a.size());
  const double vb = sb * sb / static_cast<double>(b.size());
  WelchResult r;
  if (va + vb == 0.0) {
    if (ma == mb) return {0.0, static_cast<double>(a.size() + b.size() - 2), 1.0};
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.df = static_cast<double>(a.size() + b.size() - 2);
    r.p = 1e-300;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = regularized_incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
  r.p = std::clamp(r.p, 1e-300, 1.0);
  return r;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kLocalized:
      return "localized";
    case Method::kHfl:
      return "hfl";
    case Method::kCentralized:
      return "centralized";
    case Method::kLf2l:
      return "lf2l";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw ReportError("unknown method '" + std::string(name) + "'");
}

const Aggregate& MetricReport::aggregate(Method method, std::string_view client_id) const {
  for (const auto& a : aggregates) {
    if (a.method == method && a.client_id == client_id) return a;
  }
  throw ReportError("no aggregate for " + std::string(to_string(method)) + "/" +
                    std::string(client_id));
}

const Comparison& MetricReport::comparison(Method baseline, std::string_view client_id) const {
  for (const auto& c : comparisons) {
    if (c.baseline == baseline && c.client_id == client_id) return c;
  }
  throw ReportError("no comparison for lf2l vs " + std::string(to_string(baseline)) + "/" +
                    std::string(client_id));
}

MetricReport aggregate_report(std::vector<MetricSample> samples) {
  if (samples.empty()) throw ReportError("no samples to aggregate");
  std::set<Method> methods;
  std::set<std::string> clients;
  std::set<std::uint64_t> seeds;
  std::map<std::tuple<Method, std::string, std::uint64_t>, const MetricSample*> cells;
  std::string problems;
  for (const auto& s : samples) {
    if (!(s.auroc >= 0.0 && s.auroc <= 1.0) || !(s.auprc >= 0.0 && s.auprc <= 1.0)) {
      throw ReportError("metric outside [0, 1] for " + std::string(to_string(s.method)) + "/" +
                        s.client_id + "/seed " + std::to_string(s.seed));
    }
    methods.insert(s.method);
    clients.insert(s.client_id);
    seeds.insert(s.seed);
    if (!cells.emplace(std::make_tuple(s.method, s.client_id, s.seed), &s).second) {
      problems += " duplicate " + std::string(to_string(s.method)) + "/" + s.client_id + "/seed " +
                  std::to_string(s.seed) + ";";
    }
  }
  for (Method m : methods) {
    for (const auto& c : clients) {
      for (std::uint64_t seed : seeds) {
        if (!cells.count({m, c, seed})) {
          problems += " missing " + std::string(to_string(m)) + "/" + c + "/seed " +
                      std::to_string(seed) + ";";
        }
      }
    }
  }
  if (!problems.empty()) throw ReportError("incomplete sample grid:" + problems);

  MetricReport report;
  const auto series = [&](Method m, const std::string& c, bool roc) {
    std::vector<double> out;
    for (std::uint64_t seed : seeds) {
      const MetricSample* s = cells.at({m, c, seed});
      out.push_back(roc ? s->auroc : s->auprc);
    }
    return out;
  };
  for (const auto& c : clients) {
    for (Method m : kAllMethods) {
      if (!methods.count(m)) continue;
      const std::vector<double> roc = series(m, c, true);
      const std::vector<double> pr = series(m, c, false);
      Aggregate a;
      a.method = m;
      a.client_id = c;
      a.count = roc.size();
      a.auroc_mean = mean(roc);
      a.auroc_sd = sample_sd(roc);
      a.auprc_mean = mean(pr);
      a.auprc_sd = sample_sd(pr);
      a.sd_defined = roc.size() >= 2;
      report.aggregates.push_back(std::move(a));
    }
    if (!methods.count(Method::kLf2l)) continue;
    for (Method m : kAllMethods) {
      if (m == Method::kLf2l || !methods.count(m)) continue;
      Comparison cmp;
      cmp.client_id = c;
      cmp.baseline = m;
      cmp.defined = seeds.size() >= 2;
      if (cmp.defined) {
        cmp.auroc = welch_t_test(series(Method::kLf2l, c, true), series(m, c, true));
        cmp.auprc = welch_t_test(series(Method::kLf2l, c, false), series(m, c, false));
      }
      report.comparisons.push_back(std::move(cmp));
    }
  }
  std::sort(samples.begin(), samples.end(), [](const MetricSample& a, const MetricSample& b) {
    return std::tie(a.seed, a.client_id, a.method) < std::tie(b.seed, b.client_id, b.method);
  });
  report.samples = std::move(samples);
  return report;
}

std::string samples_to_csv(std::span<const MetricSample> samples) {
  std::string out = "method,client,seed,auroc,auprc\n";
  for (const auto& s : samples) {
    out += std::string(to_string(s.method)) + "," + s.client_id + "," + std::to_string(s.seed) +
           "," + format_double(s.auroc) + "," + format_double(s.auprc) + "\n";
  }
  return out;
}

std::vector<MetricSample> samples_from_csv(std::string_view text) {
  std::vector<MetricSample> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no++ == 0) {
      if (line != "method,client,seed,auroc,auprc") throw ReportError("unexpected samples header");
      continue;
    }
    std::vector<std::string_view> cells;
    std::size_t cs = 0;
    while (true) {
      const std::size_t comma = line.find(',', cs);
      cells.push_back(line.substr(cs, comma == std::string_view::npos ? line.npos : comma - cs));
      if (comma == std::string_view::npos) break;
      cs = comma + 1;
    }
    if (cells.size() != 5) throw ReportError("line " + std::to_string(line_no) + ": expected 5 cells");
    MetricSample s;
    s.method = method_from_string(cells[0]);
    s.client_id = std::string(cells[1]);
    const auto parse_num = [&](std::string_view v, auto& dst) {
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), dst);
      if (ec != std::errc() || p != v.data() + v.size()) {
        throw ReportError("line " + std::to_string(line_no) + ": bad number '" + std::string(v) + "'");
      }
    };
    parse_num(cells[2], s.seed);
    parse_num(cells[3], s.auroc);
    parse_num(cells[4], s.auprc);
    out.push_back(std::move(s));
  }
  return out;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    j["aggregates"].push_back({{"method", to_string(a.method)},
                               {"client", a.client_id},
                               {"seeds", a.count},
                               {"auroc_mean", a.auroc_mean},
                               {"auroc_sd", a.auroc_sd},
                               {"auprc_mean", a.auprc_mean},
                               {"auprc_sd", a.auprc_sd},
                               {"sd_defined", a.sd_defined}});
  }
  j["comparisons"] = nlohmann::json::array();
  for (const auto& c : report.comparisons) {
    nlohmann::json jc = {{"client", c.client_id},
                         {"method", "lf2l"},
                         {"baseline", to_string(c.baseline)},
                         {"test", "welch_two_sided"},
                         {"defined", c.defined}};
    if (c.defined) {
      jc["auroc"] = {{"t", c.auroc.t}, {"df", c.auroc.df}, {"p", c.auroc.p}};
      jc["auprc"] = {{"t", c.auprc.t}, {"df", c.auprc.df}, {"p", c.auprc.p}};
    }
    j["comparisons"].push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

}  // namespace lf2l::eval
