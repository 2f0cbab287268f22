#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfstune/config.hpp"
#include "mfstune/mfs.hpp"
#include "mfstune/stats.hpp"
#include "mfstune/tuner.hpp"

namespace mfstune {

/// Scores theta by the MFS forward solve against the layered-sphere oracle.
class MfsObjective : public Objective {
 public:
  explicit MfsObjective(const ExperimentConfig& config);

  bool prepare(const ThetaVector& theta) override;
  double evaluate(const ThetaVector& theta, const Dipole& dipole) override;

  const ForwardModel& model() const { return model_; }

 private:
  ForwardModel model_;
};

/// Standard normal deviate determined by the dipole's moment direction. For
/// isotropic moments the polar cosine and azimuth are independent uniforms,
/// which the Box-Muller transform maps to N(0, 1).
double dipole_noise(const Dipole& dipole);

/// Single-peak Gaussian bump over unit-cube theta plus dipole-driven noise.
class SyntheticObjective : public Objective {
 public:
  SyntheticObjective(SyntheticSpec spec, ThetaBounds bounds) : spec_(spec), bounds_(bounds) {}

  bool prepare(const ThetaVector&) override { return true; }
  double evaluate(const ThetaVector& theta, const Dipole& dipole) override;

  /// Noise-free value.
  double value(const ThetaVector& theta) const;
  ThetaVector argmax() const;

 private:
  SyntheticSpec spec_;
  ThetaBounds bounds_;
};

std::unique_ptr<Objective> make_objective(const ExperimentConfig& config);

/// Spiral test points on the scalp, k_test of them.
PointSet test_points(const ExperimentConfig& config);

nlohmann::json ledger_header(const ExperimentConfig& config);

struct TuneOutcome {
  TuningResult result;
  bool resumed = false;
  std::size_t replayed_entries = 0;
};

/// Runs one strategy/seed and persists the ledger. With `resume`, an existing
/// ledger at `ledger_path` is replayed (its header must match `config`) and
/// the run continues within the remaining budget.
TuneOutcome run_tune(const ExperimentConfig& config, const std::filesystem::path& ledger_path,
                     bool resume, Objective* objective = nullptr);

std::string ledger_filename(Strategy strategy, bool preemptive, int repetition,
                            std::uint64_t seed);

struct ReportRow {
  int index = 0;  // catalog index, 0 for an inline region
  std::string region;
  Strategy strategy = Strategy::sko;
  std::size_t repetitions = 0;
  ComparisonReport comparison;
};

/// Thread count from MFSTUNE_THREADS, else the hardware concurrency.
int thread_count_from_env();

/// Runs {sko, random} x {standard, preemptive} x repetitions with paired
/// seeds (seed + r), writing one ledger per run into `out_dir`, then returns
/// the report for that directory.
std::vector<ReportRow> run_compare(const ExperimentConfig& config,
                                   const std::filesystem::path& out_dir, int threads,
                                   bool resume = false);

/// Rebuilds the comparison from the completed ledgers in a directory.
std::vector<ReportRow> build_report(const std::filesystem::path& dir);

std::string report_csv(const std::vector<ReportRow>& rows);
std::string report_text(const std::vector<ReportRow>& rows);
nlohmann::json report_json(const std::vector<ReportRow>& rows);
/// Writes report.csv, report.txt and report.json into `dir`.
void write_report(const std::vector<ReportRow>& rows, const std::filesystem::path& dir);

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

/// Oracle self-consistency suite: homogeneous reduction, linearity,
/// axisymmetry and truncation stability (doubling the degree must change the
/// field by less than `stability_tol`, relative).
std::vector<CheckResult> oracle_checks(const ExperimentConfig& config, double stability_tol = 1e-10);

}  // namespace mfstune
