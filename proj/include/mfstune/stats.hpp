#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfstune {

double median(std::vector<double> values);

struct MannWhitneyResult {
  double u_a = 0.0;  // U statistic of the first sample
  double u_b = 0.0;
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

inline constexpr std::size_t kExactLimit = 20;

/// Two-sided Mann-Whitney U test with midranks. The p value is exact (null
/// distribution of U by counting rank splits) when |a| + |b| <= kExactLimit and
/// there are no ties; otherwise the normal approximation with tie and
/// continuity corrections is used.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Exact null distribution: counts[u] = number of size-m subsets of m + n
/// ranks whose U statistic equals u.
std::vector<double> mann_whitney_null_counts(std::size_t m, std::size_t n);

/// Outcome of one repetition in one arm.
struct RunSummary {
  double best_q = 0.0;
  std::size_t distinct = 0;
};

struct ComparisonReport {
  double median_standard = 0.0;
  double median_preemptive = 0.0;
  double bonus = 0.0;  // median of paired (preemptive - standard) distinct counts
  double u_statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
  bool insufficient_n = false;  // p < alpha unattainable at this repetition count
};

inline constexpr double kSignificanceLevel = 0.05;

/// Compares paired repetitions of a standard and a preemptive arm. Throws
/// InvalidArgument if the arms differ in size or are empty.
ComparisonReport compare_strategies(std::span<const RunSummary> standard,
                                    std::span<const RunSummary> preemptive);

}  // namespace mfstune
