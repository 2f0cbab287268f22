#include "mfstune/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfstune/errors.hpp"

namespace mfstune {

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> mann_whitney_null_counts(std::size_t m, std::size_t n) {
  // counts(i, j)[u]: ways for i first-sample and j second-sample items to
  // produce U = u. Adding the largest item to the first sample contributes j
  // to U; adding it to the second contributes nothing.
  std::vector<std::vector<std::vector<double>>> table(
      m + 1, std::vector<std::vector<double>>(n + 1));
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      auto& cell = table[i][j];
      cell.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cell[0] = 1.0;
        continue;
      }
      const auto& with_first = table[i - 1][j];
      const auto& with_second = table[i][j - 1];
      for (std::size_t u = 0; u < with_first.size(); ++u) cell[u + j] += with_first[u];
      for (std::size_t u = 0; u < with_second.size(); ++u) cell[u] += with_second[u];
    }
  }
  return table[m][n];
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("Mann-Whitney U needs two non-empty samples");
  const std::size_t m = a.size(), n = b.size(), total = m + n;

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(total);
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool ties = false;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    if (j - i > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += midrank;
    }
    i = j;
  }

  MannWhitneyResult r;
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  r.u_a = rank_sum_a - md * (md + 1.0) / 2.0;
  r.u_b = md * nd - r.u_a;

  if (total <= kExactLimit && !ties) {
    const std::vector<double> counts = mann_whitney_null_counts(m, n);
    const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto u = static_cast<std::size_t>(std::llround(r.u_a));
    double lower = 0.0, upper = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (k <= u) lower += counts[k];
      if (k >= u) upper += counts[k];
    }
    r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    r.exact = true;
    return r;
  }

  const double mu = md * nd / 2.0;
  const double nn = md + nd;
  const double var = md * nd / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (!(var > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.u_a - mu) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

ComparisonReport compare_strategies(std::span<const RunSummary> standard,
                                    std::span<const RunSummary> preemptive) {
  if (standard.empty() || standard.size() != preemptive.size()) {
    throw InvalidArgument("compare_strategies needs equal, non-zero repetition counts");
  }
  std::vector<double> qs, qp, extra;
  for (std::size_t i = 0; i < standard.size(); ++i) {
    qs.push_back(standard[i].best_q);
    qp.push_back(preemptive[i].best_q);
    extra.push_back(static_cast<double>(preemptive[i].distinct) -
                    static_cast<double>(standard[i].distinct));
  }
  ComparisonReport rep;
  rep.median_standard = median(qs);
  rep.median_preemptive = median(qp);
  rep.bonus = median(extra);
  const MannWhitneyResult mw = mann_whitney_u(qp, qs);
  rep.u_statistic = mw.u_a;
  rep.p_value = mw.p_value;

  // Smallest attainable two-sided p with r per arm: 2 / C(2r, r).
  const std::vector<double> counts = mann_whitney_null_counts(standard.size(), standard.size());
  const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
  rep.insufficient_n = 2.0 * counts.front() / all >= kSignificanceLevel;
  rep.significant = !rep.insufficient_n && mw.p_value < kSignificanceLevel;
  return rep;
}

}  // namespace mfstune
