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

#ifndef ZTMESH_STATS_HPP_
#define ZTMESH_STATS_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace ztmesh::stats {

struct SampleSet {
  std::string label;
  std::vector<double> values;
};

struct Summary {
  int n = 0;
  double mean = 0;
  double sd = 0;  // n-1 denominator
};

/// Throws std::invalid_argument for n < 2 or non-finite values.
Summary describe(const SampleSet& samples);

struct TTestResult {
  double t = 0;
  int df = 0;
  double p = 1;        // two-sided
  double cohen_d = 0;  // pooled-sd standardized mean difference
};

/// Student's pooled-variance two-sample t-test. Zero pooled variance with
/// unequal means reports t and d as +/-infinity with p = 0; identical
/// degenerate samples report t = 0, p = 1, d = 0.
TTestResult t_from_summary(double mean1, double sd1, int n1, double mean2,
                           double sd2, int n2);

/// Exactly t_from_summary(describe(a), describe(b)).
TTestResult t_test(const SampleSet& a, const SampleSet& b);

struct AnovaResult {
  double F = 0;
  int df_between = 0;
  int df_within = 0;
  double p = 1;
  double eta_sq_partial = 0;  // SS_between / (SS_between + SS_within)
};

/// One-way between-subjects ANOVA. Throws std::invalid_argument for fewer
/// than two groups or any group with n < 2, std::domain_error when all
/// values are identical (0/0).
AnovaResult anova(const std::vector<SampleSet>& groups);

struct PairwiseResult {
  std::string label_a;
  std::string label_b;
  double mean_diff = 0;  // mean(a) - mean(b)
  double t = 0;
  int df = 0;
  double p_unadjusted = 1;
  double p_adjusted = 1;  // Bonferroni over all k(k-1)/2 pairs
  bool significant = false;
};

/// Bonferroni-corrected pairwise t-tests over all unordered group pairs.
std::vector<PairwiseResult> pairwise(const std::vector<SampleSet>& groups,
                                     double alpha = 0.05);

/// I_x(a, b) via the standard continued fraction; the single primitive the
/// t and F distributions are built on.
double regularized_incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double df);
/// P(|T| >= |t|), the two-sided p-value.
double student_t_two_sided_p(double t, double df);

double f_cdf(double f, double df1, double df2);
/// P(F >= f), the ANOVA p-value.
double f_tail_p(double f, double df1, double df2);

/// One measurement row. `region` is empty when the CSV has no such column.
struct LabeledSample {
  std::string label;
  std::string region;
  double value = 0;
};

/// Header-driven CSV reader: requires `label` and `value` columns, picks up
/// an optional `region` column, ignores anything else. Throws
/// std::invalid_argument on malformed input.
std::vector<LabeledSample> read_samples_csv(std::istream& in);

/// Groups rows by label in first-appearance order; non-empty region_filter
/// keeps only matching rows.
std::vector<SampleSet> group_by_label(const std::vector<LabeledSample>& rows,
                                      const std::string& region_filter = "");

}  // namespace ztmesh::stats

#endif  // ZTMESH_STATS_HPP_
