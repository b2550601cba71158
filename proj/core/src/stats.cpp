// Copyright 2026 the ztmesh authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ztmesh/stats.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ztmesh::stats {

namespace {

// Continued fraction for the incomplete beta, modified Lentz.
double betacf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("beta parameters must be positive");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0)) throw std::invalid_argument("df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
  return t >= 0 ? 1.0 - half_tail : half_tail;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw std::invalid_argument("df must be positive");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double f_cdf(double f, double df1, double df2) {
  if (!(df1 > 0) || !(df2 > 0)) {
    throw std::invalid_argument("df must be positive");
  }
  if (f <= 0) return 0.0;
  if (std::isinf(f)) return 1.0;
  return regularized_incomplete_beta(df1 / 2.0, df2 / 2.0,
                                     df1 * f / (df1 * f + df2));
}

double f_tail_p(double f, double df1, double df2) {
  if (!(df1 > 0) || !(df2 > 0)) {
    throw std::invalid_argument("df must be positive");
  }
  if (f <= 0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0,
                                     df2 / (df2 + df1 * f));
}

Summary describe(const SampleSet& samples) {
  const auto& v = samples.values;
  if (v.size() < 2) {
    throw std::invalid_argument("need at least two observations in '" +
                                samples.label + "'");
  }
  double sum = 0;
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("non-finite value in '" + samples.label +
                                  "'");
    }
    sum += x;
  }
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {static_cast<int>(v.size()), mean, sd};
}

TTestResult t_from_summary(double mean1, double sd1, int n1, double mean2,
                           double sd2, int n2) {
  if (n1 < 2 || n2 < 2) {
    throw std::invalid_argument("each group needs at least two observations");
  }
  TTestResult result;
  result.df = n1 + n2 - 2;
  const double pooled_var =
      ((n1 - 1) * sd1 * sd1 + (n2 - 1) * sd2 * sd2) / result.df;
  const double diff = mean1 - mean2;
  if (pooled_var == 0.0) {
    if (diff == 0.0) return result;  // t = 0, p = 1, d = 0
    const double inf = std::numeric_limits<double>::infinity();
    result.t = diff > 0 ? inf : -inf;
    result.cohen_d = result.t;
    result.p = 0.0;
    return result;
  }
  const double pooled_sd = std::sqrt(pooled_var);
  result.t = diff / (pooled_sd * std::sqrt(1.0 / n1 + 1.0 / n2));
  result.p = student_t_two_sided_p(result.t, result.df);
  result.cohen_d = diff / pooled_sd;
  return result;
}

TTestResult t_test(const SampleSet& a, const SampleSet& b) {
  const Summary sa = describe(a);
  const Summary sb = describe(b);
  return t_from_summary(sa.mean, sa.sd, sa.n, sb.mean, sb.sd, sb.n);
}

AnovaResult anova(const std::vector<SampleSet>& groups) {
  if (groups.size() < 2) {
    throw std::invalid_argument("need at least two groups");
  }
  std::vector<Summary> summaries;
  summaries.reserve(groups.size());
  std::size_t total_n = 0;
  double grand_sum = 0;
  for (const auto& g : groups) {
    summaries.push_back(describe(g));
    total_n += g.values.size();
    for (double x : g.values) grand_sum += x;
  }
  const double grand_mean = grand_sum / static_cast<double>(total_n);

  double ss_between = 0;
  double ss_within = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double dm = summaries[i].mean - grand_mean;
    ss_between += static_cast<double>(summaries[i].n) * dm * dm;
    for (double x : groups[i].values) {
      ss_within += (x - summaries[i].mean) * (x - summaries[i].mean);
    }
  }

  AnovaResult result;
  result.df_between = static_cast<int>(groups.size()) - 1;
  result.df_within =
      static_cast<int>(total_n) - static_cast<int>(groups.size());
  if (ss_within == 0.0 && ss_between == 0.0) {
    throw std::domain_error("all values identical: F is 0/0");
  }
  if (ss_within == 0.0) {
    result.F = std::numeric_limits<double>::infinity();
    result.p = 0.0;
    result.eta_sq_partial = 1.0;
    return result;
  }
  result.F = (ss_between / result.df_between) / (ss_within / result.df_within);
  result.p = f_tail_p(result.F, result.df_between, result.df_within);
  result.eta_sq_partial = ss_between / (ss_between + ss_within);
  return result;
}

std::vector<PairwiseResult> pairwise(const std::vector<SampleSet>& groups,
                                     double alpha) {
  if (groups.size() < 2) {
    throw std::invalid_argument("need at least two groups");
  }
  const std::size_t k = groups.size();
  const double comparisons = static_cast<double>(k * (k - 1) / 2);
  std::vector<PairwiseResult> results;
  results.reserve(static_cast<std::size_t>(comparisons));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const TTestResult t = t_test(groups[i], groups[j]);
      PairwiseResult r;
      r.label_a = groups[i].label;
      r.label_b = groups[j].label;
      r.mean_diff = describe(groups[i]).mean - describe(groups[j]).mean;
      r.t = t.t;
      r.df = t.df;
      r.p_unadjusted = t.p;
      r.p_adjusted = std::min(1.0, t.p * comparisons);
      r.significant = r.p_adjusted < alpha;
      results.push_back(std::move(r));
    }
  }
  return results;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream iss(line);
  while (std::getline(iss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

std::vector<LabeledSample> read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("empty CSV input");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  int label_col = -1;
  int value_col = -1;
  int region_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "label") label_col = static_cast<int>(i);
    if (header[i] == "value") value_col = static_cast<int>(i);
    if (header[i] == "region") region_col = static_cast<int>(i);
  }
  if (label_col < 0 || value_col < 0) {
    throw std::invalid_argument("CSV header must contain label and value");
  }

  std::vector<LabeledSample> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() <= static_cast<std::size_t>(std::max(label_col, value_col))) {
      throw std::invalid_argument("CSV line " + std::to_string(line_no) +
                                  ": too few fields");
    }
    LabeledSample row;
    row.label = fields[label_col];
    if (region_col >= 0 && static_cast<std::size_t>(region_col) < fields.size()) {
      row.region = fields[region_col];
    }
    try {
      std::size_t used = 0;
      row.value = std::stod(fields[value_col], &used);
      if (used != fields[value_col].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("CSV line " + std::to_string(line_no) +
                                  ": bad value '" + fields[value_col] + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SampleSet> group_by_label(const std::vector<LabeledSample>& rows,
                                      const std::string& region_filter) {
  std::vector<SampleSet> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& row : rows) {
    if (!region_filter.empty() && row.region != region_filter) continue;
    auto it = index.find(row.label);
    if (it == index.end()) {
      index.emplace(row.label, groups.size());
      groups.push_back({row.label, {}});
      it = index.find(row.label);
    }
    groups[it->second].values.push_back(row.value);
  }
  return groups;
}

}  // namespace ztmesh::stats
