#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfstune/geometry.hpp"
#include "mfstune/kriging.hpp"
#include "mfstune/oracle.hpp"
#include "mfstune/sampling.hpp"

namespace mfstune {

enum class Strategy { sko, random };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct TunerConfig {
  int j_max = 200;   // total Q evaluations
  int n_avg = 10;    // dipoles per full trial
  int n_min = 3;     // evaluations before preemption may fire
  int j_init = 50;   // evaluations during which preemption is forbidden
  ThetaBounds bounds{};
  DipoleRegion region{};
  HeadModel head{};
  double dipole_magnitude = 1.0;
  Strategy strategy = Strategy::sko;
  std::uint64_t seed = 0;
  // Random suggestions before the surrogate takes over; 0 selects
  // max(2, j_init / n_avg).
  int initial_design = 0;
  // Compare against the pooled mean of R together with the running trial.
  bool pooled_includes_current = false;
  // Consecutive rank failures tolerated before aborting.
  int max_consecutive_failures = 1000;
  GpOptions gp{};
  SuggestOptions suggest{};

  bool preemptive() const { return n_min < n_avg; }
  int effective_initial_design() const;
  /// Throws InvalidArgument unless 1 <= n_min <= n_avg <= j_init <= j_max.
  void validate() const;
};

/// Black box scored by the tuner. prepare() runs once per theta and reports
/// whether the theta is usable; evaluate() scores one dipole.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual bool prepare(const ThetaVector& theta) = 0;
  virtual double evaluate(const ThetaVector& theta, const Dipole& dipole) = 0;
};

struct LedgerEntry {
  ThetaVector theta;
  std::vector<double> q_values;
  bool preempted = false;
  bool failed = false;
  bool truncated = false;  // cut short by budget exhaustion

  double mean() const;
  bool operator==(const LedgerEntry&) const = default;
};

/// Record set R: every suggested theta with the Q values it received.
class Ledger {
 public:
  void append(LedgerEntry entry);

  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  int j_used() const { return j_used_; }
  std::size_t distinct_evaluated() const;
  /// Running sum and count of all recorded Q values.
  double pooled_sum() const { return pooled_sum_; }
  std::size_t pooled_count() const { return pooled_count_; }

  bool operator==(const Ledger& other) const { return entries_ == other.entries_; }

 private:
  std::vector<LedgerEntry> entries_;
  int j_used_ = 0;
  double pooled_sum_ = 0.0;
  std::size_t pooled_count_ = 0;
};

/// Mean of every Q value across non-failed entries, pooled into one sample.
/// Throws InvalidArgument if no value has been recorded.
double pooled_mean(const Ledger& ledger);

struct BestTheta {
  ThetaVector theta;
  double mean = 0.0;
  std::size_t index = 0;
};

/// Entry with the highest mean; the earliest wins ties. Throws InsufficientData
/// if every entry failed.
BestTheta best_theta(const Ledger& ledger);

struct TuningResult {
  ThetaVector best_theta;
  double best_mean = 0.0;
  Ledger ledger;
  std::size_t distinct = 0;
  std::vector<double> means;      // per non-failed entry
  std::vector<double> variances;  // per non-failed entry
};

using EntryObserver = std::function<void(std::size_t index, const LedgerEntry& entry, int j_begin,
                                         int j_end)>;

/// Stream ids derived from the entry index, so a run can be resumed from its
/// ledger alone.
std::uint64_t suggestion_stream(std::size_t entry_index);
std::uint64_t dipole_stream(std::size_t entry_index);
std::uint64_t surrogate_stream(std::size_t entry_index);

/// Preemptive sequential optimization loop. `resume_from` continues a partial
/// ledger; `observer` sees each entry as it is appended.
TuningResult run(const TunerConfig& config, Objective& objective,
                 const EntryObserver& observer = {}, const Ledger* resume_from = nullptr);

/// Summaries shared by run() and ledger replay.
TuningResult summarize(Ledger ledger);

}  // namespace mfstune
