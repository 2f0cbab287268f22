// mfstune command-line driver.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfstune/config.hpp"
#include "mfstune/errors.hpp"
#include "mfstune/experiment.hpp"
#include "mfstune/persistence.hpp"

namespace fs = std::filesystem;
using namespace mfstune;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfigError = 2, kNumericalError = 3, kResumeError = 4 };

struct CommonFlags {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<bool> preemptive;
  bool resume = false;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment configuration");
  cmd->add_option("--preset", f.preset, "Base profile")->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--strategy", f.strategy, "Suggestion strategy")
      ->check(CLI::IsMember({"sko", "random"}));
  cmd->add_flag("--preemptive,!--standard", f.preemptive, "Preemptive termination on or off");
  cmd->add_flag("--resume", f.resume, "Continue from existing ledgers");
  cmd->add_option("--out", f.out, "Output directory");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c;
  if (!f.config_path.empty()) {
    c = load_config(f.config_path);
    if (!f.preset.empty() && f.preset != c.preset) {
      throw ConfigError("--preset " + f.preset + " conflicts with config preset " + c.preset);
    }
  } else {
    c = ExperimentConfig::from_preset(f.preset.empty() ? "desk" : f.preset);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.strategy) c.strategy = strategy_from_string(*f.strategy);
  if (f.preemptive) c.preemptive = *f.preemptive;
  if (f.out) c.output = *f.out;
  c.validate();
  return c;
}

int cmd_forward(const ExperimentConfig& c, const std::vector<double>& theta_in,
                const std::vector<double>& position, const std::vector<double>& moment) {
  std::array<double, kThetaDim> a{};
  std::copy(theta_in.begin(), theta_in.end(), a.begin());
  const ThetaVector theta = ThetaVector::from_array(a);
  if (!c.bounds.contains(theta)) throw ConfigError("theta lies outside the configured bounds");
  const Dipole dipole{Vec3(position[0], position[1], position[2]),
                      Vec3(moment[0], moment[1], moment[2])};

  const auto start = std::chrono::steady_clock::now();
  ForwardModel model(c.head, c.mfs_options(), test_points(c), c.oracle_tol, c.oracle_max_degree,
                     c.metric);
  if (!model.prepare(theta)) {
    const RankFailure f = model.solver().failure();
    std::cerr << "rank failure: rank " << f.rank << " of " << f.columns << " columns\n";
    return kNumericalError;
  }
  const ForwardReport r = model.evaluate(dipole);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("Q              %.6f%s\n", r.quality.q, r.quality.capped ? " (capped)" : "");
  std::printf("residual       %.6e\n", r.residual_norm);
  std::printf("rhs norm       %.6e\n", r.rhs_norm);
  std::printf("rank           %d / %d\n", r.rank, r.columns);
  std::printf("singular range %.3e .. %.3e\n", r.sigma_min, r.sigma_max);
  std::printf("oracle degrees %d\n", r.oracle_degrees);
  std::printf("time           %.3f s\n", seconds);
  return kOk;
}

int cmd_oracle_check(const ExperimentConfig& c, double stability_tol) {
  bool ok = true;
  for (const auto& r : oracle_checks(c, stability_tol)) {
    std::printf("%-22s %s  value %.3e  threshold %.1e\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                r.value, r.threshold);
    ok = ok && r.passed;
  }
  return ok ? kOk : kCheckFailed;
}

int cmd_tune(const ExperimentConfig& c, bool resume) {
  fs::create_directories(c.output);
  const fs::path ledger =
      fs::path(c.output) / ledger_filename(c.strategy, c.preemptive, 0, c.seed);
  const TuneOutcome out = run_tune(c, ledger, resume);
  const auto& r = out.result;
  const auto t = r.best_theta.to_array();
  std::printf("ledger     %s\n", ledger.string().c_str());
  if (out.resumed) std::printf("replayed   %zu entries\n", out.replayed_entries);
  std::printf("best theta %.6f %.6f %.6f %.6f %.6f\n", t[0], t[1], t[2], t[3], t[4]);
  std::printf("best mean  %.6f\n", r.best_mean);
  std::printf("distinct   %zu\n", r.distinct);
  std::printf("j used     %d\n", r.ledger.j_used());
  return kOk;
}

void print_report(const std::vector<ReportRow>& rows, const fs::path& dir) {
  std::cout << report_text(rows);
  std::cout << "written " << (dir / "report.csv").string() << ", report.txt, report.json\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fictitious-boundary tuning for the MFS EEG forward solver"};
  app.require_subcommand(1);

  CommonFlags forward_flags, oracle_flags, tune_flags, compare_flags, report_flags;

  auto* forward = app.add_subcommand("forward", "Single MFS solve scored against the oracle");
  add_common(forward, forward_flags);
  std::vector<double> theta{1.3, 0.7, 1.3, 0.6, 1.1};
  std::vector<double> position{0.0, 0.0, 0.06};
  std::vector<double> moment{0.0, 0.0, 1.0};
  forward->add_option("--theta", theta, "t1i t1d t2i t2d t3i")->expected(5);
  forward->add_option("--dipole-position", position, "x y z in metres")->expected(3);
  forward->add_option("--dipole-moment", moment, "Moment vector")->expected(3);

  auto* oracle = app.add_subcommand("oracle-check", "Layered-sphere oracle self-consistency");
  add_common(oracle, oracle_flags);
  double stability_tol = 1e-10;
  oracle->add_option("--stability-tol", stability_tol, "Truncation stability threshold");

  auto* tune = app.add_subcommand("tune", "One tuning run with a persisted ledger");
  add_common(tune, tune_flags);

  auto* compare = app.add_subcommand("compare", "All strategy arms over paired repetitions");
  add_common(compare, compare_flags);
  std::optional<int> repetitions;
  std::optional<int> region;
  compare->add_option("--repetitions", repetitions, "Repetitions per arm")->check(CLI::PositiveNumber);
  compare->add_option("--region", region, "Catalog region index")->check(CLI::Range(1, 6));

  auto* report = app.add_subcommand("report", "Rebuild the comparison table from ledgers");
  add_common(report, report_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (forward->parsed()) return cmd_forward(resolve(forward_flags), theta, position, moment);
    if (oracle->parsed()) return cmd_oracle_check(resolve(oracle_flags), stability_tol);
    if (tune->parsed()) return cmd_tune(resolve(tune_flags), tune_flags.resume);
    if (compare->parsed()) {
      ExperimentConfig c = resolve(compare_flags);
      if (repetitions) c.repetitions = *repetitions;
      if (region) {
        c.region_index = *region;
        c.region_inline.reset();
      }
      c.validate();
      const auto rows = run_compare(c, c.output, thread_count_from_env(), compare_flags.resume);
      print_report(rows, c.output);
      return kOk;
    }
    if (report->parsed()) {
      const fs::path dir = report_flags.out ? fs::path(*report_flags.out)
                                            : fs::path(resolve(report_flags).output);
      const auto rows = build_report(dir);
      write_report(rows, dir);
      print_report(rows, dir);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ResumeIntegrityError& e) {
    std::cerr << "resume integrity error: " << e.what() << "\n";
    return kResumeError;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  }
  return kOk;
}
